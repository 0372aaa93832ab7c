#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_core::io::{trace_from_csv, trace_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(trace) = trace_from_csv(text) else {
        return;
    };
    // Non-finite values parse but are refused on output.
    if let Ok(out) = trace_to_csv(&trace) {
        assert_eq!(trace_from_csv(&out).expect("own output parses"), trace);
    }
});
