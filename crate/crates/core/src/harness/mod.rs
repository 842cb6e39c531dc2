//! Replication studies: simulated populations under two truth settings,
//! protocol simulation, repeated fitting and the summary metrics.

mod metrics;
mod truth;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{aggregate, metrics_report, parse_metrics, MetricsRow, ReplicationMetrics, METRICS_COLUMNS};
pub use truth::{
    generate_truth, simulate_rep, true_beta, true_inclusion, true_psi, truth_csv, SimulatedRep, Truth,
    N_COVARIATES, TRUE_ALPHA,
};

use crate::error::{Error, Result};
use crate::model::{McmcConfig, PriorConfig};
use crate::protocols::Protocol;
use crate::rng::{stream, Purpose};
use crate::sampler::{run_chain, ChainOutput};
use crate::summary::{inclusion_summary, scalar_summary, InclusionSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSet {
    M1,
    M2,
}

impl fmt::Display for ModelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelSet::M1 => "M1",
            ModelSet::M2 => "M2",
        })
    }
}

impl FromStr for ModelSet {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(ModelSet::M1),
            "M2" => Ok(ModelSet::M2),
            other => Err(format!("unknown model set '{other}'")),
        }
    }
}

fn default_clinics() -> usize {
    64
}
fn default_pool_size() -> usize {
    1
}
fn default_reps() -> usize {
    50
}
fn default_se_master() -> f64 {
    0.95
}
fn default_sp_master() -> f64 {
    0.98
}
fn default_se_individual() -> f64 {
    0.98
}
fn default_sp_individual() -> f64 {
    0.99
}
fn default_sigma() -> f64 {
    0.5
}

/// A simulation scenario, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub model_set: ModelSet,
    pub n: usize,
    #[serde(default = "default_clinics")]
    pub n_clinics: usize,
    pub protocol: Protocol,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_se_master")]
    pub se_master: f64,
    #[serde(default = "default_sp_master")]
    pub sp_master: f64,
    #[serde(default = "default_se_individual")]
    pub se_individual: f64,
    #[serde(default = "default_sp_individual")]
    pub sp_individual: f64,
    #[serde(default = "default_sigma")]
    pub sigma_true: f64,
    /// Fit with the true accuracies held fixed. Defaults to true for IT only.
    #[serde(default)]
    pub assays_known: Option<bool>,
}

impl ScenarioSpec {
    pub fn new(model_set: ModelSet, n: usize, protocol: Protocol, pool_size: usize) -> Self {
        ScenarioSpec {
            model_set,
            n,
            n_clinics: default_clinics(),
            protocol,
            pool_size,
            reps: default_reps(),
            base_seed: 0,
            se_master: default_se_master(),
            sp_master: default_sp_master(),
            se_individual: default_se_individual(),
            sp_individual: default_sp_individual(),
            sigma_true: default_sigma(),
            assays_known: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.n_clinics == 0 {
            return fail("n_clinics must be positive".into());
        }
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.protocol != Protocol::It && self.pool_size < 2 {
            return fail(format!("pool_size must be at least 2 for {}", self.protocol));
        }
        for (name, v) in [
            ("se_master", self.se_master),
            ("sp_master", self.sp_master),
            ("se_individual", self.se_individual),
            ("sp_individual", self.sp_individual),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(self.sigma_true >= 0.0 && self.sigma_true.is_finite()) {
            return fail(format!("sigma_true must be non-negative, got {}", self.sigma_true));
        }
        Ok(())
    }

    pub fn assays_known(&self) -> bool {
        self.assays_known.unwrap_or(self.protocol == Protocol::It)
    }

    /// Priors for fitting this scenario: `base` with the true accuracies
    /// fixed when the scenario treats them as known.
    pub fn fit_priors(&self, base: &PriorConfig) -> PriorConfig {
        let mut p = base.clone();
        if self.assays_known() {
            p.known_se = Some(vec![self.se_master, self.se_individual]);
            p.known_sp = Some(vec![self.sp_master, self.sp_individual]);
        }
        p
    }
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Posterior median, sd and equal-tailed 95% interval of one estimand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandResult {
    pub name: String,
    pub truth: f64,
    pub estimate: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// What a replication contributes to the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub tests_used: usize,
    pub estimands: Vec<EstimandResult>,
    pub inclusion: Vec<(String, InclusionSummary)>,
    pub phi_acceptance: Vec<f64>,
}

fn estimand(name: &str, truth: f64, draws: &[f64]) -> Result<EstimandResult> {
    let s = scalar_summary(draws)?;
    Ok(EstimandResult {
        name: name.to_string(),
        truth,
        estimate: s.median,
        sd: s.sd,
        lo: s.lo,
        hi: s.hi,
    })
}

/// Scores one chain against the scenario truth.
pub fn score_rep(spec: &ScenarioSpec, priors: &PriorConfig, rep: usize, tests_used: usize, out: &ChainOutput) -> Result<RepResult> {
    let mut estimands = Vec::new();
    for d in [1, 3] {
        estimands.push(estimand(&format!("alpha_x{d}"), TRUE_ALPHA[d], &out.effective_alpha(d))?);
    }
    if priors.random_effects {
        estimands.push(estimand("sigma", spec.sigma_true, &out.sigma)?);
    }
    if !priors.assays_known() {
        let truth = [
            (spec.se_master, spec.sp_master),
            (spec.se_individual, spec.sp_individual),
        ];
        for (m, (se, sp)) in truth.iter().enumerate() {
            estimands.push(estimand(&format!("se{}", m + 1), *se, &out.assay_series(&out.se, m))?);
            estimands.push(estimand(&format!("sp{}", m + 1), *sp, &out.assay_series(&out.sp, m))?);
        }
    }
    let inclusion = (1..out.n_coef())
        .map(|d| (out.coef_names[d].clone(), inclusion_summary(&out.inclusion_draws(d))))
        .collect();
    Ok(RepResult {
        rep,
        tests_used,
        estimands,
        inclusion,
        phi_acceptance: out.meta.phi_acceptance.clone(),
    })
}

/// Everything produced by one replication, handed to the caller's sink.
pub struct RepArtifacts<'a> {
    pub rep: usize,
    pub sim: &'a SimulatedRep,
    pub chain: &'a ChainOutput,
    pub result: &'a RepResult,
}

/// Outcome of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRun {
    /// Completed replications in index order.
    pub results: Vec<RepResult>,
    /// Failed replications with their error messages.
    pub failures: Vec<(usize, String)>,
    /// Replications skipped or cut short by cancellation.
    pub interrupted: Vec<usize>,
    pub metrics: ReplicationMetrics,
}

enum RepOutcome {
    Done(RepResult),
    Failed(String),
    Interrupted,
}

fn run_one(
    spec: &ScenarioSpec,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
    rep: usize,
    cancel: Option<&AtomicBool>,
    sink: &(dyn Fn(&RepArtifacts) -> Result<()> + Sync),
) -> RepOutcome {
    if cancel.is_some_and(|c| c.load(std::sync::atomic::Ordering::Relaxed)) {
        return RepOutcome::Interrupted;
    }
    let sim = simulate_rep(spec, rep);
    let mut rng = stream(spec.base_seed, rep as u64, Purpose::Chain);
    let chain = match run_chain(&sim.dataset, priors, mcmc, &mut rng, cancel) {
        Ok(c) => c,
        Err(e) => return RepOutcome::Failed(e.to_string()),
    };
    if chain.meta.interrupted {
        return RepOutcome::Interrupted;
    }
    let result = match score_rep(spec, priors, rep, sim.tests_used, &chain) {
        Ok(r) => r,
        Err(e) => return RepOutcome::Failed(e.to_string()),
    };
    let art = RepArtifacts {
        rep,
        sim: &sim,
        chain: &chain,
        result: &result,
    };
    match sink(&art) {
        Ok(()) => RepOutcome::Done(result),
        Err(e) => RepOutcome::Failed(e.to_string()),
    }
}

/// Runs `spec.reps` replications on `jobs` threads. Every replication
/// draws from its own seed streams, so the results do not depend on
/// `jobs` or on scheduling. `sink` is called once per completed
/// replication, possibly concurrently.
pub fn run_replications(
    spec: &ScenarioSpec,
    priors: &PriorConfig,
    mcmc: &McmcConfig,
    jobs: usize,
    cancel: Option<&AtomicBool>,
    sink: &(dyn Fn(&RepArtifacts) -> Result<()> + Sync),
) -> Result<ReplicationRun> {
    spec.validate()?;
    mcmc.validate()?;
    let priors = spec.fit_priors(priors);
    priors.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..spec.reps)
            .into_par_iter()
            .map(|rep| run_one(spec, &priors, mcmc, rep, cancel, sink))
            .collect()
    });
    let mut run = ReplicationRun {
        results: Vec::new(),
        failures: Vec::new(),
        interrupted: Vec::new(),
        metrics: ReplicationMetrics::default(),
    };
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            RepOutcome::Done(r) => run.results.push(r),
            RepOutcome::Failed(msg) => run.failures.push((rep, msg)),
            RepOutcome::Interrupted => run.interrupted.push(rep),
        }
    }
    run.metrics = aggregate(&run.results, spec.n);
    Ok(run)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_parsing() {
        let s = parse_scenario("model_set = \"M1\"\nn = 100\nprotocol = \"DT\"\npool_size = 5\n").unwrap();
        assert_eq!(s.n_clinics, 64);
        assert_eq!(s.reps, 50);
        assert!(!s.assays_known());
        assert!(parse_scenario("model_set = \"M1\"\nn = 100\nprotocol = \"DT\"\n").is_err());
        assert!(parse_scenario("model_set = \"M3\"\nn = 100\nprotocol = \"IT\"\n").is_err());
        assert!(parse_scenario("model_set = \"M1\"\nn = 100\nprotocol = \"IT\"\nextra = 1\n").is_err());
        let it = parse_scenario("model_set = \"M2\"\nn = 10\nprotocol = \"IT\"\n").unwrap();
        assert!(it.assays_known());
        let p = it.fit_priors(&PriorConfig::default());
        assert_eq!(p.known_se, Some(vec![0.95, 0.98]));
    }
}
