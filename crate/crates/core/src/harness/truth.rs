use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{ModelSet, ScenarioSpec};
use crate::model::{Dataset, Inclusion};
use crate::protocols::{simulate_testing, AssaySpec};
use crate::rng::{stream, Purpose};

/// Number of covariates in the simulation design.
pub const N_COVARIATES: usize = 6;

/// Constant parts of `psi_0 .. psi_6`.
pub const TRUE_ALPHA: [f64; N_COVARIATES + 1] = [-3.5, -1.0, 0.5, -0.5, 0.5, 0.0, 0.0];

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Age-varying part `beta_d(u)` of the true coefficient curves.
pub fn true_beta(model: ModelSet, d: usize, u: f64) -> f64 {
    match (model, d) {
        (ModelSet::M1, 0) => (PI * u / 3.0).sin(),
        (ModelSet::M1, 2) => u.powi(3) / 8.0,
        (ModelSet::M1, 4) => -u * u / 4.0 + 0.75,
        (ModelSet::M2, 0) => -0.5 * (-u.sin()).exp() + 0.64,
        (ModelSet::M2, 2) => 0.3 * u * u + (u / 3.0).sin().powi(2) - 0.9,
        (ModelSet::M2, 4) => std_normal_cdf(u) - 0.5,
        _ => 0.0,
    }
}

pub fn true_psi(model: ModelSet, d: usize, u: f64) -> f64 {
    TRUE_ALPHA[d] + true_beta(model, d, u)
}

/// True inclusion state of covariate `d` (1-based, as in `x_d`).
pub fn true_inclusion(d: usize) -> Inclusion {
    match d {
        2 | 4 => Inclusion::Varying,
        1 | 3 => Inclusion::Constant,
        _ => Inclusion::Excluded,
    }
}

/// Latent population for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub ages: Vec<f64>,
    /// `N x 6`, row-major.
    pub covariates: Vec<f64>,
    /// 0-based.
    pub clinic: Vec<usize>,
    pub gamma: Vec<f64>,
    pub eta: Vec<f64>,
    pub y_tilde: Vec<bool>,
}

impl Truth {
    pub fn prevalence(&self) -> f64 {
        self.y_tilde.iter().filter(|&&y| y).count() as f64 / self.y_tilde.len() as f64
    }
}

/// Draws the population of replication `rep`. Depends only on the spec's
/// design fields, `base_seed` and `rep`.
pub fn generate_truth(spec: &ScenarioSpec, rep: usize) -> Truth {
    let mut rng = stream(spec.base_seed, rep as u64, Purpose::Truth);
    let n = spec.n;
    let gamma: Vec<f64> = (0..spec.n_clinics)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            spec.sigma_true * e
        })
        .collect();
    let mut ages = Vec::with_capacity(n);
    let mut covariates = Vec::with_capacity(n * N_COVARIATES);
    let mut clinic = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut y_tilde = Vec::with_capacity(n);
    for _ in 0..n {
        let u = (rng.random_range(-3.0..3.0_f64) * 100.0).round() / 100.0;
        let mut x = [0.0; N_COVARIATES];
        x[0] = StandardNormal.sample(&mut rng);
        for v in x.iter_mut().skip(1) {
            *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
        let l = rng.random_range(0..spec.n_clinics);
        let mut e = true_psi(spec.model_set, 0, u) + gamma[l];
        for (d, &xd) in x.iter().enumerate() {
            e += xd * true_psi(spec.model_set, d + 1, u);
        }
        let p = 1.0 / (1.0 + (-e).exp());
        y_tilde.push(rng.random::<f64>() < p);
        ages.push(u);
        covariates.extend_from_slice(&x);
        clinic.push(l);
        eta.push(e);
    }
    Truth {
        ages,
        covariates,
        clinic,
        gamma,
        eta,
        y_tilde,
    }
}

/// One simulated replication: the observed dataset and the number of
/// tests the protocol spent.
#[derive(Debug, Clone)]
pub struct SimulatedRep {
    pub truth: Truth,
    pub dataset: Dataset,
    pub tests_used: usize,
}

pub fn simulate_rep(spec: &ScenarioSpec, rep: usize) -> SimulatedRep {
    let truth = generate_truth(spec, rep);
    let mut rng = stream(spec.base_seed, rep as u64, Purpose::Testing);
    let master = AssaySpec {
        se: spec.se_master,
        sp: spec.sp_master,
    };
    let individual = AssaySpec {
        se: spec.se_individual,
        sp: spec.sp_individual,
    };
    let rec = simulate_testing(&truth.y_tilde, spec.protocol, spec.pool_size, master, individual, &mut rng);
    let dataset = Dataset {
        ids: (1..=spec.n as u64).collect(),
        ages: truth.ages.clone(),
        covariate_names: (1..=N_COVARIATES).map(|d| format!("x{d}")).collect(),
        covariates: truth.covariates.clone(),
        clinic: truth.clinic.clone(),
        n_clinics: spec.n_clinics,
        pools: rec.pools,
        n_assays: 2,
        age_transform: None,
    };
    SimulatedRep {
        truth,
        dataset,
        tests_used: rec.tests_used,
    }
}

/// `truth.csv`: latent status and linear predictor per individual.
pub fn truth_csv(truth: &Truth) -> String {
    use std::fmt::Write as _;
    let mut s = String::from("id,eta,y_tilde\n");
    for i in 0..truth.eta.len() {
        let _ = writeln!(s, "{},{},{}", i + 1, truth.eta[i], truth.y_tilde[i] as u8);
    }
    s
}
