use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::PriorConfig;
use super::dataset::Dataset;
use crate::pg::sample_pg;

/// Inclusion state of one coefficient. Only `(0,0)`, `(1,0)` and `(1,1)`
/// are reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inclusion {
    Excluded,
    Constant,
    Varying,
}

impl Inclusion {
    pub const ALL: [Inclusion; 3] = [Inclusion::Excluded, Inclusion::Constant, Inclusion::Varying];

    pub fn delta1(self) -> bool {
        self != Inclusion::Excluded
    }

    pub fn delta2(self) -> bool {
        self == Inclusion::Varying
    }

    pub fn from_deltas(delta1: bool, delta2: bool) -> Option<Self> {
        match (delta1, delta2) {
            (false, false) => Some(Inclusion::Excluded),
            (true, false) => Some(Inclusion::Constant),
            (true, true) => Some(Inclusion::Varying),
            (false, true) => None,
        }
    }
}

/// Parameters of coefficient `d` (the intercept is `d = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefState {
    pub inclusion: Inclusion,
    pub alpha: f64,
    /// Knot values `beta~`.
    pub beta_knots: Vec<f64>,
    /// Whitened knot values, `beta~ = L z`.
    pub z: Vec<f64>,
    pub tau: f64,
    pub phi: f64,
}

/// Full state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub y_tilde: Vec<bool>,
    pub omega: Vec<f64>,
    /// `h_i = (y~_i - 1/2) / omega_i`
    pub h: Vec<f64>,
    pub coefs: Vec<CoefState>,
    /// Indexed by covariate, `theta1[d - 1]`.
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub se: Vec<f64>,
    pub sp: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ChainState {
    pub fn refresh_h(&mut self) {
        for ((h, &y), &w) in self.h.iter_mut().zip(&self.y_tilde).zip(&self.omega) {
            *h = (if y { 0.5 } else { -0.5 }) / w;
        }
    }
}

/// Starting statuses: the last individual test of each person if any,
/// otherwise positive only when every pool containing them was positive.
pub fn initial_statuses(data: &Dataset) -> Vec<bool> {
    let n = data.n();
    let mut single: Vec<Option<bool>> = vec![None; n];
    let mut all_pos = vec![true; n];
    for pool in &data.pools {
        if pool.members.len() == 1 {
            single[pool.members[0]] = Some(pool.outcome);
        }
        for &i in &pool.members {
            all_pos[i] &= pool.outcome;
        }
    }
    single
        .into_iter()
        .zip(all_pos)
        .map(|(s, a)| s.unwrap_or(a))
        .collect()
}

/// Builds the starting state. Unknown assay accuracies start at their
/// conjugate posterior means given the starting statuses.
pub fn init_state<R: Rng + ?Sized>(data: &Dataset, priors: &PriorConfig, rng: &mut R) -> ChainState {
    let n = data.n();
    let p = data.p();
    let kt = priors.n_knots;
    let y_tilde = initial_statuses(data);
    let omega: Vec<f64> = (0..n).map(|_| sample_pg(0.0, rng)).collect();
    let phi0 = 0.5 * (priors.a_phi + priors.b_phi);
    let coefs = (0..=p)
        .map(|d| CoefState {
            inclusion: if d == 0 && priors.force_vary_intercept {
                Inclusion::Varying
            } else {
                Inclusion::Constant
            },
            alpha: 0.0,
            beta_knots: vec![0.0; kt],
            z: vec![0.0; kt],
            tau: 1.0,
            phi: phi0,
        })
        .collect();

    let (se, sp) = match (&priors.known_se, &priors.known_sp) {
        (Some(se), Some(sp)) => (se.clone(), sp.clone()),
        _ => {
            let counts = assay_counts(data, &y_tilde);
            counts
                .iter()
                .map(|c| {
                    (
                        (priors.a_se + c.true_pos) / (priors.a_se + priors.b_se + c.true_pos + c.false_neg),
                        (priors.a_sp + c.true_neg) / (priors.a_sp + priors.b_sp + c.true_neg + c.false_pos),
                    )
                })
                .unzip()
        }
    };

    let mut state = ChainState {
        h: vec![0.0; n],
        y_tilde,
        omega,
        coefs,
        theta1: vec![0.5; p],
        theta2: vec![0.5; p],
        gamma: vec![0.0; data.n_clinics],
        sigma2: 1.0,
        se,
        sp,
        eta: vec![0.0; n],
    };
    state.refresh_h();
    state
}

/// Outcome tallies of one assay against true pool statuses.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AssayCounts {
    /// `sum Z Z~`
    pub true_pos: f64,
    /// `sum (1 - Z) Z~`
    pub false_neg: f64,
    /// `sum (1 - Z)(1 - Z~)`
    pub true_neg: f64,
    /// `sum Z (1 - Z~)`
    pub false_pos: f64,
}

pub fn assay_counts(data: &Dataset, y_tilde: &[bool]) -> Vec<AssayCounts> {
    let mut out = vec![AssayCounts::default(); data.n_assays];
    for pool in &data.pools {
        let truly = pool.members.iter().any(|&i| y_tilde[i]);
        let c = &mut out[pool.assay];
        match (pool.outcome, truly) {
            (true, true) => c.true_pos += 1.0,
            (false, true) => c.false_neg += 1.0,
            (false, false) => c.true_neg += 1.0,
            (true, false) => c.false_pos += 1.0,
        }
    }
    out
}
