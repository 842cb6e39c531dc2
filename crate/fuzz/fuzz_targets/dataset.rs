#![no_main]

//! Both dataset files at once, separated by a NUL byte, through assembly
//! and validation.

use libfuzzer_sys::fuzz_target;
use poolvcm::io::{assemble_dataset, parse_individuals, parse_pools};

fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0) else { return };
    let (Ok(a), Ok(b)) = (std::str::from_utf8(&data[..split]), std::str::from_utf8(&data[split + 1..])) else {
        return;
    };
    if let (Ok(ind), Ok(pools)) = (parse_individuals(a), parse_pools(b)) {
        let ds = assemble_dataset(ind, pools);
        let _ = poolvcm::model::validate(&ds);
    }
});
