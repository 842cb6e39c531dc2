#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = poolvcm::io::parse_table("fuzz.csv", text) {
            assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
        }
    }
});
