//! Collapsed inclusion update for one coefficient.
//!
//! With the augmented likelihood the block `lambda = (alpha, z)` is
//! Gaussian, so each inclusion state's marginal likelihood is available in
//! closed form. Everything depends on the data only through per-age
//! tallies `w_k = sum omega x^2` and `t_k = sum omega x r` where
//! `r = h - eta + x psi_d` is the partial residual.

use crate::error::Result;
use crate::linalg;
use crate::model::Inclusion;

/// Per-unique-age sufficient statistics for one coefficient.
#[derive(Debug, Clone, Default)]
pub struct BlockStats {
    pub w: Vec<f64>,
    pub t: Vec<f64>,
}

impl BlockStats {
    pub fn s_xx(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn s_xr(&self) -> f64 {
        self.t.iter().sum()
    }
}

/// Gaussian posterior of `(alpha, z)` in the varying state: factor `L` of
/// the precision and `y = L^{-1} b`, so the mean is `L^{-T} y`.
#[derive(Debug, Clone, Default)]
pub struct VaryingPosterior {
    pub dim: usize,
    pub chol: Vec<f64>,
    pub y: Vec<f64>,
    pub log_det: f64,
}

/// Scratch space reused across visits.
#[derive(Debug, Clone, Default)]
pub struct SsvsWork {
    scaled: Vec<f64>,
    hw: Vec<f64>,
    ht: Vec<f64>,
    sqrt_w: Vec<f64>,
    precision: Vec<f64>,
    pub varying: VaryingPosterior,
}

/// Log marginal weight of the constant state, without the prior mass.
pub fn constant_log_marginal(stats: &BlockStats, xi_alpha: f64) -> f64 {
    let prec = stats.s_xx() + 1.0 / xi_alpha;
    let sr = stats.s_xr();
    -0.5 * xi_alpha.ln() - 0.5 * prec.ln() + 0.5 * sr * sr / prec
}

/// Log marginal weight of the varying state (without prior mass). Leaves
/// the factored posterior in `work.varying`.
pub fn varying_log_marginal(
    stats: &BlockStats,
    h_centered: &[f64],
    n_knots: usize,
    tau: f64,
    xi_alpha: f64,
    work: &mut SsvsWork,
) -> Result<f64> {
    let k = stats.w.len();
    let kt = n_knots;
    let m = kt + 1;
    debug_assert_eq!(h_centered.len(), k * kt);

    work.sqrt_w.clear();
    work.sqrt_w.extend(stats.w.iter().map(|w| w.sqrt()));
    work.scaled.resize(k * kt, 0.0);
    for ((dst, src), &s) in work
        .scaled
        .chunks_exact_mut(kt)
        .zip(h_centered.chunks_exact(kt))
        .zip(&work.sqrt_w)
    {
        for (a, &b) in dst.iter_mut().zip(src) {
            *a = s * b;
        }
    }
    work.hw.resize(kt, 0.0);
    work.ht.resize(kt, 0.0);
    linalg::mat_t_vec(h_centered, k, kt, &stats.w, &mut work.hw);
    linalg::mat_t_vec(h_centered, k, kt, &stats.t, &mut work.ht);

    // only the lower triangle is read by the factorization
    let p = &mut work.precision;
    p.clear();
    p.resize(m * m, 0.0);
    p[0] = stats.s_xx() + 1.0 / xi_alpha;
    linalg::gram_lower(&work.scaled, k, kt, &mut p[m + 1..], m);
    for a in 0..kt {
        p[(a + 1) * m] = work.hw[a];
        p[(a + 1) * m + a + 1] += tau;
    }

    let v = &mut work.varying;
    v.dim = m;
    v.chol.clear();
    v.chol.extend_from_slice(p);
    if linalg::cholesky_in_place(&mut v.chol, m).is_err() {
        let (l, _) = linalg::cholesky_jittered(p, m, linalg::JITTER_START, "coefficient block precision")?;
        v.chol = l;
    }
    v.y.clear();
    v.y.push(stats.s_xr());
    v.y.extend_from_slice(&work.ht);
    linalg::solve_lower(&v.chol, m, &mut v.y);
    v.log_det = linalg::chol_log_det(&v.chol, m);
    let quad = linalg::dot(&v.y, &v.y);
    Ok(-0.5 * xi_alpha.ln() + 0.5 * kt as f64 * tau.ln() - 0.5 * v.log_det + 0.5 * quad)
}

/// Normalised probabilities from log weights (entries may be `-inf`).
pub fn normalize_log_weights(logw: &[f64; 3]) -> [f64; 3] {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; 3];
    let mut total = 0.0;
    for (pi, &l) in p.iter_mut().zip(logw) {
        *pi = if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() };
        total += *pi;
    }
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Full conditional probabilities of the three inclusion states.
#[allow(clippy::too_many_arguments)]
pub fn inclusion_probabilities(
    stats: &BlockStats,
    h_centered: &[f64],
    n_knots: usize,
    tau: f64,
    xi_alpha: f64,
    theta1: f64,
    theta2: f64,
    work: &mut SsvsWork,
) -> Result<[f64; 3]> {
    let prior = super::conjugate::inclusion_prior(theta1, theta2);
    let logw = [
        prior[0].ln(),
        prior[1].ln() + constant_log_marginal(stats, xi_alpha),
        prior[2].ln() + varying_log_marginal(stats, h_centered, n_knots, tau, xi_alpha, work)?,
    ];
    Ok(normalize_log_weights(&logw))
}

pub fn pick(probs: &[f64; 3], u: f64) -> Inclusion {
    if u < probs[0] {
        Inclusion::Excluded
    } else if u < probs[0] + probs[1] {
        Inclusion::Constant
    } else {
        Inclusion::Varying
    }
}
