#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_bench::config::{effective_config, Command, RunConfig};
use proxnag_core::io::KvMap;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(kv) = KvMap::parse(text) else {
        return;
    };
    assert_eq!(KvMap::parse(&kv.to_text()).expect("own output parses"), kv);
    let _ = RunConfig::from_kv(&effective_config(Command::Solve, Some(&kv), &KvMap::new()));
});
