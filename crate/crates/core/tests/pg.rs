use poolvcm::pg::{pg_mean, pg_variance, sample_pg};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn draws_are_positive_and_finite(z in -1e6f64..1e6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let w = sample_pg(z, &mut rng);
            prop_assert!(w > 0.0 && w.is_finite(), "z = {z}, w = {w}");
        }
    }

    #[test]
    fn draws_depend_only_on_seed_and_tilt(z in -50.0f64..50.0, seed: u64) {
        let mut a = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            prop_assert_eq!(sample_pg(z, &mut a), sample_pg(z, &mut b));
        }
    }

    #[test]
    fn sign_of_tilt_is_irrelevant(z in 0.0f64..100.0, seed: u64) {
        let mut a = ChaCha8Rng::seed_from_u64(seed);
        let mut b = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            prop_assert_eq!(sample_pg(z, &mut a), sample_pg(-z, &mut b));
        }
    }

    #[test]
    fn analytic_moments_are_consistent(z in -200.0f64..200.0) {
        let m = pg_mean(z);
        let v = pg_variance(z);
        prop_assert!(m > 0.0 && m <= 0.25);
        prop_assert!(v > 0.0 && v <= 1.0 / 24.0 + 1e-15);
        prop_assert_eq!(m, pg_mean(-z));
    }
}

#[test]
fn sample_mean_tracks_analytic_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for z in [0.0, 0.5, 2.0, 7.5, 40.0] {
        let n = 40_000;
        let sum: f64 = (0..n).map(|_| sample_pg(z, &mut rng)).sum();
        let mean = sum / n as f64;
        let se = (pg_variance(z) / n as f64).sqrt();
        assert!((mean - pg_mean(z)).abs() < 4.0 * se, "z {z}: {mean} vs {}", pg_mean(z));
    }
}
