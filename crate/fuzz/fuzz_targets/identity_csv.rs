#![no_main]
use libfuzzer_sys::fuzz_target;
use rlfbm::experiments::io::{read_identity_csv, write_identity_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_identity_csv(data) {
        let mut buf = Vec::new();
        write_identity_csv(&rows, &mut buf).unwrap();
        let again = read_identity_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), again.len());
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.path_index, b.path_index);
            for (x, y) in [(a.eps, b.eps), (a.lhs, b.lhs), (a.rhs_total, b.rhs_total), (a.rhs_drift, b.rhs_drift)] {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
});
