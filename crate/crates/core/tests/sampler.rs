use poolvcm::gpp::{equally_spaced_knots, factor_knots, Matern};
use poolvcm::harness::{simulate_rep, ModelSet, ScenarioSpec};
use poolvcm::linalg;
use poolvcm::model::{init_state, ChainState, Dataset, Inclusion, PriorConfig};
use poolvcm::protocols::Protocol;
use poolvcm::sampler::Sampler;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn small_dataset(n: usize, protocol: Protocol, seed: u64) -> Dataset {
    let c = if protocol == Protocol::It { 1 } else { 5 };
    let mut spec = ScenarioSpec::new(ModelSet::M1, n, protocol, c);
    spec.n_clinics = 4;
    spec.base_seed = seed;
    simulate_rep(&spec, 0).dataset
}

fn small_priors() -> PriorConfig {
    PriorConfig {
        n_knots: 10,
        ..Default::default()
    }
}

fn check_invariants(sampler: &Sampler<'_>, state: &ChainState, data: &Dataset) -> Result<(), TestCaseError> {
    prop_assert!(sampler.eta_drift(state) <= 1e-8);
    for (d, s) in sampler.curve_sums(state).iter().enumerate() {
        prop_assert!(s.abs() <= 1e-8, "coefficient {d} curve sums to {s}");
    }
    prop_assert_eq!(state.coefs[0].inclusion, Inclusion::Varying);
    for c in &state.coefs {
        prop_assert!(Inclusion::from_deltas(c.inclusion.delta1(), c.inclusion.delta2()) == Some(c.inclusion));
        if c.inclusion == Inclusion::Excluded {
            prop_assert_eq!(c.alpha, 0.0);
        }
        prop_assert!(c.tau > 0.0 && c.phi > 0.075 && c.phi < 0.75);
    }
    prop_assert!(state.omega.iter().all(|&w| w > 0.0 && w.is_finite()));
    prop_assert!(state.se.iter().chain(&state.sp).all(|&v| v > 0.0 && v < 1.0));
    prop_assert!(state.sigma2 > 0.0);
    for (j, pool) in data.pools.iter().enumerate() {
        let count = pool.members.iter().filter(|&&i| state.y_tilde[i]).count() as u32;
        prop_assert_eq!(sampler.pool_positive_counts()[j], count);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn caches_and_support_hold_after_every_sweep(
        seed in 0u64..1000,
        protocol in prop_oneof![Just(Protocol::Dt), Just(Protocol::At)],
    ) {
        let data = small_dataset(150, protocol, seed);
        let priors = small_priors();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = init_state(&data, &priors, &mut rng);
        let mut sampler = Sampler::new(&data, &priors, &mut state).unwrap();
        for _ in 0..40 {
            sampler.sweep(&mut state, &mut rng).unwrap();
            check_invariants(&sampler, &state, &data)?;
        }
    }
}

#[test]
fn chains_are_reproducible() {
    let data = small_dataset(120, Protocol::Dt, 1);
    let priors = small_priors();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut state = init_state(&data, &priors, &mut rng);
        let mut sampler = Sampler::new(&data, &priors, &mut state).unwrap();
        for _ in 0..20 {
            sampler.sweep(&mut state, &mut rng).unwrap();
        }
        state
    };
    assert_eq!(run(), run());
}

#[test]
fn state_and_dataset_survive_serde() {
    let data = small_dataset(60, Protocol::At, 2);
    let priors = small_priors();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = init_state(&data, &priors, &mut rng);
    let mut sampler = Sampler::new(&data, &priors, &mut state).unwrap();
    for _ in 0..5 {
        sampler.sweep(&mut state, &mut rng).unwrap();
    }
    let back: ChainState = serde_json::from_str(&serde_json::to_string(&state).unwrap()).unwrap();
    assert_eq!(back, state);
    let back: Dataset = serde_json::from_str(&serde_json::to_string(&data).unwrap()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn sampler_rejects_mismatched_state() {
    let data = small_dataset(30, Protocol::Dt, 0);
    let priors = small_priors();
    let mut state = init_state(&data, &priors, &mut ChaCha8Rng::seed_from_u64(0));
    state.coefs.pop();
    assert!(Sampler::new(&data, &priors, &mut state).is_err());
}

/// With the curve inactive and the knot values held fixed, the range
/// update alone must leave `p(phi | beta~, tau)` invariant. Compare thinned
/// draws with the density computed on a fine grid.
#[test]
fn range_update_targets_its_conditional() {
    let data = small_dataset(40, Protocol::It, 5);
    let priors = PriorConfig {
        n_knots: 8,
        phi_step: 1.0,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut state = init_state(&data, &priors, &mut rng);
    let d = 1;
    let tau = 2.0;
    state.coefs[d].inclusion = Inclusion::Excluded;
    state.coefs[d].tau = tau;
    state.coefs[d].phi = 0.3;
    for z in state.coefs[d].z.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *z = e / tau.sqrt();
    }
    let mut sampler = Sampler::new(&data, &priors, &mut state).unwrap();
    let beta = state.coefs[d].beta_knots.clone();

    let (a, b) = (priors.a_phi, priors.b_phi);
    let lo = data.ages.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.ages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let knots = equally_spaced_knots(lo, hi, priors.n_knots);
    let kernel = Matern::new(priors.nu);
    let log_density = |phi: f64| {
        let (l, _) = factor_knots(&kernel, &knots, phi).unwrap();
        let mut z = beta.clone();
        linalg::solve_lower(&l, knots.len(), &mut z);
        -0.5 * linalg::chol_log_det(&l, knots.len()) - 0.5 * tau * linalg::dot(&z, &z)
    };
    let grid_n = 4000;
    let h = (b - a) / grid_n as f64;
    let mids: Vec<f64> = (0..grid_n).map(|i| a + (i as f64 + 0.5) * h).collect();
    let logs: Vec<f64> = mids.iter().map(|&p| log_density(p)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(grid_n);
    let mut acc = 0.0;
    for m in &mass {
        acc += m / total;
        cdf.push(acc);
    }
    let n_bins = 10;
    let edges: Vec<f64> = (1..n_bins)
        .map(|k| {
            let q = k as f64 / n_bins as f64;
            let i = cdf.iter().position(|&c| c >= q).unwrap();
            mids[i] + 0.5 * h
        })
        .collect();

    let (thin, n_draws) = (25, 3000);
    for _ in 0..500 {
        sampler.step3c_update_phi(&mut state, d, &mut rng).unwrap();
    }
    let mut counts = vec![0usize; n_bins];
    for _ in 0..n_draws {
        for _ in 0..thin {
            sampler.step3c_update_phi(&mut state, d, &mut rng).unwrap();
        }
        assert_eq!(state.coefs[d].inclusion, Inclusion::Excluded);
        let phi = state.coefs[d].phi;
        counts[edges.iter().filter(|&&e| phi > e).count()] += 1;
    }
    for (x, y) in state.coefs[d].beta_knots.iter().zip(&beta) {
        assert!((x - y).abs() < 1e-9, "knot values moved");
    }
    let expected = n_draws as f64 / n_bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((n_bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2} (p = {p}), counts {counts:?}");
    assert!(sampler.phi_moves()[d].rate() > 0.05);
}
