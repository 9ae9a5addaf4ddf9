//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, so the seeds stay meaningful without a fuzzing toolchain.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rlfbm::experiments::io::{read_identity_csv, write_identity_csv};
use rlfbm::experiments::{parse_eps_ladder, parse_model_param, ConfigFile, ExperimentConfig};
use rlfbm::ModelSpec;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_file_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("config_file") {
        let text = String::from_utf8(data).unwrap();
        if let Ok(file) = ConfigFile::parse(&text) {
            let mut cfg = ExperimentConfig::default();
            if cfg.apply(file).is_ok() && cfg.validate().is_ok() {
                accepted += 1;
            }
        } else {
            assert!(name.contains("unknown"), "{name} rejected");
        }
    }
    assert_eq!(accepted, 3);
}

#[test]
fn eps_ladder_seeds() {
    for (name, data) in seeds("eps_ladder") {
        let text = String::from_utf8(data).unwrap();
        match parse_eps_ladder(&text) {
            Ok(steps) => {
                let canon: Vec<String> = steps.iter().map(|k| format!("{k}Δ")).collect();
                assert_eq!(parse_eps_ladder(&canon.join(",")).unwrap(), steps);
            }
            Err(_) => assert!(["non_integer.txt", "zero.txt", "overflow.txt"].contains(&name.as_str()), "{name}"),
        }
    }
}

#[test]
fn model_params_seeds() {
    let mut built = Vec::new();
    for (name, data) in seeds("model_params") {
        let text = String::from_utf8(data).unwrap();
        let mut lines = text.lines();
        let model = lines.next().unwrap_or("");
        let params: BTreeMap<String, String> = lines.map(|l| parse_model_param(l).unwrap()).collect();
        if let Ok(spec) = ModelSpec::from_name(model, &params) {
            built.push((name, spec.to_string()));
        }
    }
    let names: Vec<&str> = built.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["constant.txt", "fracmart.txt", "linear.txt"]);
}

#[test]
fn identity_csv_seeds() {
    for (name, data) in seeds("identity_csv") {
        match read_identity_csv(&data[..]) {
            Ok(rows) => {
                let mut buf = Vec::new();
                write_identity_csv(&rows, &mut buf).unwrap();
                let again = read_identity_csv(&buf[..]).unwrap();
                assert_eq!(rows.len(), again.len());
                for (a, b) in rows.iter().zip(&again) {
                    assert_eq!(a.lhs.to_bits(), b.lhs.to_bits(), "{name}");
                    assert_eq!(a.eps.to_bits(), b.eps.to_bits(), "{name}");
                }
            }
            Err(_) => assert_eq!(name, "wrong_header.csv"),
        }
    }
}
