#![no_main]

use libfuzzer_sys::fuzz_target;
use proxnag_bench::summary::parse_summary_csv;
use proxnag_bench::table::render_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_summary_csv(text) {
        let _ = render_table(&rows);
    }
});
