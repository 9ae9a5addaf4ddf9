#![no_main]
use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;
use rlfbm::experiments::parse_model_param;
use rlfbm::ModelSpec;

// first line is the model name, every further line a key=value parameter
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut lines = text.lines();
    let name = lines.next().unwrap_or("");
    let mut params = BTreeMap::new();
    for line in lines {
        match parse_model_param(line) {
            Ok((k, v)) => {
                params.insert(k, v);
            }
            Err(_) => return,
        }
    }
    if let Ok(spec) = ModelSpec::from_name(name, &params) {
        let _ = spec.to_string();
    }
});
