#![no_main]
use libfuzzer_sys::fuzz_target;
use rlfbm::experiments::{ConfigFile, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = ConfigFile::parse(text) {
        let mut cfg = ExperimentConfig::default();
        if cfg.apply(file).is_ok() {
            let _ = cfg.validate();
        }
    }
});
