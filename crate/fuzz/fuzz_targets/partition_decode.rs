#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_core::io::instance::{decode_partition, encode_partition};

fuzz_target!(|data: &[u8]| {
    let Some((&dim, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let dimension = 1 + dim as usize;
    if let Ok(p) = decode_partition(text, dimension) {
        let again = decode_partition(&encode_partition(&p), dimension).expect("own encoding decodes");
        assert_eq!(again.groups(), p.groups());
    }
});
