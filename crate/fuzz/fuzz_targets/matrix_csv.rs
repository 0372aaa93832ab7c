#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_core::io::{matrix_from_csv, matrix_to_csv, vector_from_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = vector_from_csv(text);
    if let Ok(m) = matrix_from_csv(text) {
        if m.iter().all(|v| v.is_finite()) {
            assert_eq!(matrix_from_csv(&matrix_to_csv(&m)).expect("own output parses"), m);
        }
    }
});
