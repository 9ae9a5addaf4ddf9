#![no_main]
use libfuzzer_sys::fuzz_target;
use rlfbm::experiments::parse_eps_ladder;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(steps) = parse_eps_ladder(text) {
        assert!(!steps.is_empty() && steps.iter().all(|&k| k > 0));
        // the canonical spelling parses back to the same ladder
        let canon: Vec<String> = steps.iter().map(|k| format!("{k}Δ")).collect();
        assert_eq!(parse_eps_ladder(&canon.join(",")).unwrap(), steps);
    }
});
