#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ind) = poolvcm::io::parse_individuals(text) {
            assert_eq!(ind.ages.len(), ind.ids.len());
            assert_eq!(ind.covariates.len(), ind.ids.len() * ind.covariate_names.len());
            assert!(ind.clinic.iter().all(|&c| c < ind.n_clinics));
        }
    }
});
