use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gibbs::Sampler;
use crate::error::{Error, Result};
use crate::gpp::equally_spaced_knots;
use crate::model::{init_state, ChainState, Dataset, Inclusion, McmcConfig, PriorConfig};

/// Tolerance of the periodic linear-predictor check.
pub const ETA_TOLERANCE: f64 = 1e-8;

/// Retained draws of one chain. Per-draw blocks are stored draw-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub grid: Vec<f64>,
    /// `intercept` followed by the covariate names.
    pub coef_names: Vec<String>,
    pub n_assays: usize,
    pub n_draws: usize,
    /// `n_draws x n_coef x grid.len()`
    pub curves: Vec<f64>,
    /// `n_draws x n_coef`
    pub alpha: Vec<f64>,
    pub inclusion: Vec<Inclusion>,
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `n_draws x n_assays`
    pub se: Vec<f64>,
    pub sp: Vec<f64>,
    pub meta: ChainMeta,
}

/// Run metadata. Timings are kept out of the result files by the writers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub sweeps_completed: usize,
    pub interrupted: bool,
    pub phi_acceptance: Vec<f64>,
    pub seconds: f64,
}

impl ChainOutput {
    pub fn n_coef(&self) -> usize {
        self.coef_names.len()
    }

    fn new(grid: Vec<f64>, coef_names: Vec<String>, n_assays: usize, capacity: usize) -> Self {
        let nc = coef_names.len();
        ChainOutput {
            curves: Vec::with_capacity(capacity * nc * grid.len()),
            alpha: Vec::with_capacity(capacity * nc),
            inclusion: Vec::with_capacity(capacity * nc),
            tau: Vec::with_capacity(capacity * nc),
            phi: Vec::with_capacity(capacity * nc),
            sigma: Vec::with_capacity(capacity),
            se: Vec::with_capacity(capacity * n_assays),
            sp: Vec::with_capacity(capacity * n_assays),
            grid,
            coef_names,
            n_assays,
            n_draws: 0,
            meta: ChainMeta {
                sweeps_completed: 0,
                interrupted: false,
                phi_acceptance: Vec::new(),
                seconds: 0.0,
            },
        }
    }

    pub fn record(&mut self, sampler: &Sampler<'_>, state: &ChainState) {
        for d in 0..self.n_coef() {
            let c = &state.coefs[d];
            self.curves.extend(sampler.psi_on(state, d, &self.grid));
            self.alpha.push(c.alpha);
            self.inclusion.push(c.inclusion);
            self.tau.push(c.tau);
            self.phi.push(c.phi);
        }
        self.sigma.push(state.sigma2.sqrt());
        self.se.extend_from_slice(&state.se);
        self.sp.extend_from_slice(&state.sp);
        self.n_draws += 1;
    }

    /// Draws of `psi_d` at grid point `g`.
    pub fn curve_draws(&self, d: usize, g: usize) -> Vec<f64> {
        let nc = self.n_coef();
        let ng = self.grid.len();
        (0..self.n_draws)
            .map(|s| self.curves[(s * nc + d) * ng + g])
            .collect()
    }

    /// Per-coefficient series, e.g. `alpha` or `tau`.
    pub fn coef_series(&self, values: &[f64], d: usize) -> Vec<f64> {
        let nc = self.n_coef();
        (0..self.n_draws).map(|s| values[s * nc + d]).collect()
    }

    pub fn inclusion_draws(&self, d: usize) -> Vec<Inclusion> {
        let nc = self.n_coef();
        (0..self.n_draws).map(|s| self.inclusion[s * nc + d]).collect()
    }

    /// `delta1_d * alpha_d`, the constant part of the effect.
    pub fn effective_alpha(&self, d: usize) -> Vec<f64> {
        let nc = self.n_coef();
        (0..self.n_draws)
            .map(|s| {
                if self.inclusion[s * nc + d].delta1() {
                    self.alpha[s * nc + d]
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn assay_series(&self, values: &[f64], m: usize) -> Vec<f64> {
        (0..self.n_draws).map(|s| values[s * self.n_assays + m]).collect()
    }
}

/// Ages at which curves are recorded.
pub fn monitor_grid(data: &Dataset, mcmc: &McmcConfig) -> Vec<f64> {
    if !mcmc.monitor_grid.is_empty() {
        return mcmc.monitor_grid.clone();
    }
    let lo = data.ages.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.ages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    equally_spaced_knots(lo, hi, mcmc.grid_points)
}

/// Runs burn-in and retains every `thin`-th sweep afterwards. When
/// `cancel` is raised the draws collected so far are returned with
/// `meta.interrupted` set.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
    rng: &mut R,
    cancel: Option<&AtomicBool>,
) -> Result<ChainOutput> {
    mcmc.validate()?;
    priors.validate()?;
    if let Some(se) = &priors.known_se {
        if se.len() != data.n_assays {
            return Err(Error::Config(format!(
                "known_se has {} entries but the dataset uses {} assays",
                se.len(),
                data.n_assays
            )));
        }
    }
    let mut state = init_state(data, priors, rng);
    let mut sampler = Sampler::new(data, priors, &mut state)?;
    let names = std::iter::once("intercept".to_string())
        .chain(data.covariate_names.iter().cloned())
        .collect();
    let mut out = ChainOutput::new(monitor_grid(data, mcmc), names, data.n_assays, mcmc.n_retained());
    let start = Instant::now();
    for it in 1..=mcmc.n_iter {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            out.meta.interrupted = true;
            break;
        }
        sampler.sweep(&mut state, rng)?;
        out.meta.sweeps_completed = it;
        if mcmc.drift_check_every > 0 && it % mcmc.drift_check_every == 0 {
            let fresh = sampler.recompute_eta(&state);
            let drift = fresh
                .iter()
                .zip(&state.eta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if drift > ETA_TOLERANCE {
                return Err(Error::EtaDrift { drift });
            }
            state.eta = fresh;
        }
        if it > mcmc.burn_in && (it - mcmc.burn_in) % mcmc.thin == 0 {
            out.record(&sampler, &state);
        }
    }
    out.meta.seconds = start.elapsed().as_secs_f64();
    out.meta.phi_acceptance = sampler.phi_moves().iter().map(|m| m.rate()).collect();
    Ok(out)
}
