#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pools) = poolvcm::io::parse_pools(text) {
            assert!(pools.iter().all(|p| p.assay_id >= 1 && !p.members.is_empty()));
        }
    }
});
