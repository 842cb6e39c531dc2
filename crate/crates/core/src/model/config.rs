use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prior hyperparameters. `xi_alpha` is a variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub xi_alpha: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub nu: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    /// Standard deviation of the logit-scale random walk for `phi`.
    pub phi_step: f64,
    pub a_sigma2: f64,
    pub b_sigma2: f64,
    pub a_theta1: f64,
    pub b_theta1: f64,
    pub a_theta2: f64,
    pub b_theta2: f64,
    pub a_se: f64,
    pub b_se: f64,
    pub a_sp: f64,
    pub b_sp: f64,
    pub n_knots: usize,
    pub force_vary_intercept: bool,
    pub random_effects: bool,
    /// Fixed assay accuracies, one per assay. Both or neither must be set.
    pub known_se: Option<Vec<f64>>,
    pub known_sp: Option<Vec<f64>>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            xi_alpha: 50.0,
            a_tau: 2.0,
            b_tau: 1.0,
            nu: 2.0,
            a_phi: 0.075,
            b_phi: 0.75,
            phi_step: 0.1,
            a_sigma2: 2.0,
            b_sigma2: 1.0,
            a_theta1: 1.0,
            b_theta1: 1.0,
            a_theta2: 1.0,
            b_theta2: 1.0,
            a_se: 0.5,
            b_se: 0.5,
            a_sp: 0.5,
            b_sp: 0.5,
            n_knots: 100,
            force_vary_intercept: true,
            random_effects: true,
            known_se: None,
            known_sp: None,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("xi_alpha", self.xi_alpha),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("nu", self.nu),
            ("a_phi", self.a_phi),
            ("b_phi", self.b_phi),
            ("phi_step", self.phi_step),
            ("a_sigma2", self.a_sigma2),
            ("b_sigma2", self.b_sigma2),
            ("a_theta1", self.a_theta1),
            ("b_theta1", self.b_theta1),
            ("a_theta2", self.a_theta2),
            ("b_theta2", self.b_theta2),
            ("a_se", self.a_se),
            ("b_se", self.b_se),
            ("a_sp", self.a_sp),
            ("b_sp", self.b_sp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.a_phi >= self.b_phi {
            return Err(Error::Config(format!(
                "a_phi ({}) must be below b_phi ({})",
                self.a_phi, self.b_phi
            )));
        }
        if self.n_knots == 0 {
            return Err(Error::Config("n_knots must be at least 1".into()));
        }
        match (&self.known_se, &self.known_sp) {
            (None, None) => {}
            (Some(se), Some(sp)) => {
                if se.len() != sp.len() {
                    return Err(Error::Config("known_se and known_sp differ in length".into()));
                }
                if se.iter().chain(sp).any(|&v| !(v > 0.0 && v <= 1.0)) {
                    return Err(Error::Config("known accuracies must lie in (0, 1]".into()));
                }
            }
            _ => return Err(Error::Config("known_se and known_sp must be given together".into())),
        }
        Ok(())
    }

    pub fn assays_known(&self) -> bool {
        self.known_se.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Ages (on the fitting scale) at which curves are recorded. When
    /// empty, `grid_points` equally spaced ages over the data range.
    pub monitor_grid: Vec<f64>,
    pub grid_points: usize,
    /// Sweeps between full recomputations of the linear predictor.
    pub drift_check_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 15_000,
            burn_in: 5_000,
            thin: 5,
            seed: 0,
            monitor_grid: Vec::new(),
            grid_points: 61,
            drift_check_every: 100,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be below n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.monitor_grid.is_empty() && self.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        if self.monitor_grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("monitor_grid must be finite".into()));
        }
        Ok(())
    }

    pub fn n_retained(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// Flat key-value configuration file combining priors, MCMC settings and
/// the optional age standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub xi_alpha: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub nu: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub phi_step: f64,
    pub a_sigma2: f64,
    pub b_sigma2: f64,
    pub a_theta1: f64,
    pub b_theta1: f64,
    pub a_theta2: f64,
    pub b_theta2: f64,
    pub a_se: f64,
    pub b_se: f64,
    pub a_sp: f64,
    pub b_sp: f64,
    pub n_knots: usize,
    pub force_vary_intercept: bool,
    pub random_effects: bool,
    pub known_se: Option<Vec<f64>>,
    pub known_sp: Option<Vec<f64>>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: Option<u64>,
    pub monitor_grid: Vec<f64>,
    pub grid_points: usize,
    pub drift_check_every: usize,
    pub age_center: Option<f64>,
    pub age_scale: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig::from_parts(&PriorConfig::default(), &McmcConfig::default())
    }
}

impl FitConfig {
    pub fn from_parts(p: &PriorConfig, m: &McmcConfig) -> Self {
        FitConfig {
            xi_alpha: p.xi_alpha,
            a_tau: p.a_tau,
            b_tau: p.b_tau,
            nu: p.nu,
            a_phi: p.a_phi,
            b_phi: p.b_phi,
            phi_step: p.phi_step,
            a_sigma2: p.a_sigma2,
            b_sigma2: p.b_sigma2,
            a_theta1: p.a_theta1,
            b_theta1: p.b_theta1,
            a_theta2: p.a_theta2,
            b_theta2: p.b_theta2,
            a_se: p.a_se,
            b_se: p.b_se,
            a_sp: p.a_sp,
            b_sp: p.b_sp,
            n_knots: p.n_knots,
            force_vary_intercept: p.force_vary_intercept,
            random_effects: p.random_effects,
            known_se: p.known_se.clone(),
            known_sp: p.known_sp.clone(),
            n_iter: m.n_iter,
            burn_in: m.burn_in,
            thin: m.thin,
            seed: Some(m.seed),
            monitor_grid: m.monitor_grid.clone(),
            grid_points: m.grid_points,
            drift_check_every: m.drift_check_every,
            age_center: None,
            age_scale: None,
        }
    }

    pub fn priors(&self) -> PriorConfig {
        PriorConfig {
            xi_alpha: self.xi_alpha,
            a_tau: self.a_tau,
            b_tau: self.b_tau,
            nu: self.nu,
            a_phi: self.a_phi,
            b_phi: self.b_phi,
            phi_step: self.phi_step,
            a_sigma2: self.a_sigma2,
            b_sigma2: self.b_sigma2,
            a_theta1: self.a_theta1,
            b_theta1: self.b_theta1,
            a_theta2: self.a_theta2,
            b_theta2: self.b_theta2,
            a_se: self.a_se,
            b_se: self.b_se,
            a_sp: self.a_sp,
            b_sp: self.b_sp,
            n_knots: self.n_knots,
            force_vary_intercept: self.force_vary_intercept,
            random_effects: self.random_effects,
            known_se: self.known_se.clone(),
            known_sp: self.known_sp.clone(),
        }
    }

    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed.unwrap_or(0),
            monitor_grid: self.monitor_grid.clone(),
            grid_points: self.grid_points,
            drift_check_every: self.drift_check_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.priors().validate()?;
        self.mcmc().validate()?;
        match (self.age_center, self.age_scale) {
            (Some(c), Some(s)) if c.is_finite() && s > 0.0 && s.is_finite() => Ok(()),
            (None, None) => Ok(()),
            _ => Err(Error::Config(
                "age_center and age_scale must be given together, with age_scale > 0".into(),
            )),
        }
    }
}
