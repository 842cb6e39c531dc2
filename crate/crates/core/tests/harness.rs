use poolvcm::harness::{generate_truth, parse_scenario, simulate_rep, ModelSet, ScenarioSpec};
use poolvcm::io::{assemble_dataset, individuals_csv, parse_individuals, parse_pools, pools_csv};
use poolvcm::model::validate;
use poolvcm::protocols::Protocol;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The population depends on the design fields and seed only, never on
    /// how it is later tested.
    #[test]
    fn truth_ignores_testing_settings(seed: u64, rep in 0usize..20, c in 2usize..11, se in 0.5f64..1.0) {
        let mut a = ScenarioSpec::new(ModelSet::M2, 80, Protocol::It, 1);
        a.base_seed = seed;
        let mut b = a.clone();
        b.protocol = Protocol::At;
        b.pool_size = c;
        b.se_master = se;
        b.reps = 3;
        prop_assert_eq!(generate_truth(&a, rep), generate_truth(&b, rep));
    }

    #[test]
    fn simulated_datasets_validate_and_round_trip(
        seed: u64,
        protocol in prop_oneof![Just(Protocol::It), Just(Protocol::Dt), Just(Protocol::At)],
    ) {
        let c = if protocol == Protocol::It { 1 } else { 4 };
        let mut spec = ScenarioSpec::new(ModelSet::M1, 70, protocol, c);
        spec.base_seed = seed;
        spec.n_clinics = 5;
        let rep = simulate_rep(&spec, 1);
        prop_assert!(validate(&rep.dataset).is_ok());
        prop_assert_eq!(rep.tests_used, rep.dataset.pools.len());
        let ind = parse_individuals(&individuals_csv(&rep.dataset)).unwrap();
        let pools = parse_pools(&pools_csv(&rep.dataset)).unwrap();
        let back = assemble_dataset(ind, pools);
        prop_assert_eq!(back.pools, rep.dataset.pools);
        prop_assert_eq!(back.ages, rep.dataset.ages);
        prop_assert_eq!(back.covariates, rep.dataset.covariates);
        prop_assert_eq!(back.clinic, rep.dataset.clinic);
    }
}

#[test]
fn perfect_individual_testing_costs_n() {
    let text = "model_set = \"M1\"\nn = 250\nprotocol = \"IT\"\nse_individual = 1.0\nsp_individual = 1.0\n";
    let spec = parse_scenario(text).unwrap();
    let rep = simulate_rep(&spec, 0);
    assert_eq!(rep.tests_used, 250);
    for pool in &rep.dataset.pools {
        assert_eq!(pool.outcome, rep.truth.y_tilde[pool.members[0]]);
    }
}

#[test]
fn replications_differ() {
    let spec = ScenarioSpec::new(ModelSet::M1, 50, Protocol::Dt, 5);
    assert_ne!(generate_truth(&spec, 0), generate_truth(&spec, 1));
}
