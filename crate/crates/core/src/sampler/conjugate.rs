//! Closed-form full conditionals, kept separate so they can be checked
//! against hand-coded tallies.

use crate::model::{AssayCounts, Inclusion, PriorConfig};

/// Beta parameters `(a, b)`.
pub type BetaParams = (f64, f64);

/// Conditionals of `(theta1, theta2)` given the inclusion state. `theta2`
/// only enters the prior mass when the covariate is included, so under
/// `(0,0)` it keeps its prior.
pub fn theta_posterior(priors: &PriorConfig, inc: Inclusion) -> (BetaParams, BetaParams) {
    let d1 = inc.delta1() as u8 as f64;
    let d2 = inc.delta2() as u8 as f64;
    let t1 = (priors.a_theta1 + d1, priors.b_theta1 + 1.0 - d1);
    let t2 = if inc.delta1() {
        (priors.a_theta2 + d2, priors.b_theta2 + 1.0 - d2)
    } else {
        (priors.a_theta2, priors.b_theta2)
    };
    (t1, t2)
}

/// `(shape, rate)` of the Gamma conditional of `tau` given
/// `q = beta~' R~^{-1} beta~`.
pub fn tau_posterior(priors: &PriorConfig, n_knots: usize, q: f64) -> (f64, f64) {
    (priors.a_tau + 0.5 * n_knots as f64, priors.b_tau + 0.5 * q)
}

/// `(shape, scale)` of the inverse-Gamma conditional of `sigma^2`.
pub fn sigma2_posterior(priors: &PriorConfig, gamma: &[f64]) -> (f64, f64) {
    let ss: f64 = gamma.iter().map(|g| g * g).sum();
    (priors.a_sigma2 + 0.5 * gamma.len() as f64, priors.b_sigma2 + 0.5 * ss)
}

/// Beta conditionals of `(Se, Sp)` for one assay.
pub fn assay_posterior(priors: &PriorConfig, c: &AssayCounts) -> (BetaParams, BetaParams) {
    (
        (priors.a_se + c.true_pos, priors.b_se + c.false_neg),
        (priors.a_sp + c.true_neg, priors.b_sp + c.false_pos),
    )
}

/// Prior mass of each inclusion state.
pub fn inclusion_prior(theta1: f64, theta2: f64) -> [f64; 3] {
    [1.0 - theta1, theta1 * (1.0 - theta2), theta1 * theta2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plug_in_examples() {
        let p = PriorConfig::default();
        assert_eq!(theta_posterior(&p, Inclusion::Varying), ((2.0, 1.0), (2.0, 1.0)));
        assert_eq!(theta_posterior(&p, Inclusion::Constant), ((2.0, 1.0), (1.0, 2.0)));
        assert_eq!(theta_posterior(&p, Inclusion::Excluded).0, (1.0, 2.0));

        let p = PriorConfig { a_tau: 2.0, b_tau: 1.0, ..Default::default() };
        assert_eq!(tau_posterior(&p, 3, 4.0), (3.5, 3.0));
        assert_eq!(tau_posterior(&p, 3, 0.0), (3.5, 1.0));

        let p = PriorConfig::default();
        assert_eq!(sigma2_posterior(&p, &[1.0, -1.0]), (3.0, 2.0));

        let c = AssayCounts { true_pos: 2.0, false_neg: 1.0, ..Default::default() };
        assert_eq!(assay_posterior(&p, &c).0, (2.5, 1.5));
        assert_eq!(assay_posterior(&p, &AssayCounts::default()).0, (0.5, 0.5));

        let w = inclusion_prior(0.6, 0.5);
        assert!((w[0] - 0.4).abs() < 1e-15 && (w[1] - 0.3).abs() < 1e-15 && (w[2] - 0.3).abs() < 1e-15);
    }
}
