#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_core::io::{encode_idx, parse_idx};

fuzz_target!(|data: &[u8]| {
    // Anything that parses must re-encode to the same bytes.
    if let Ok(t) = parse_idx(data) {
        let bytes = encode_idx(&t).expect("parsed tensor re-encodes");
        assert_eq!(bytes, data);
    }
});
