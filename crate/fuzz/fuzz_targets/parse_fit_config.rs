#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = poolvcm::io::parse_fit_config(text) {
            assert!(cfg.priors().validate().is_ok());
            assert!(cfg.mcmc().validate().is_ok());
        }
    }
});
