//! Predictive-process projection from knots to observed ages.
//!
//! The knot vector is parametrised in whitened form: `beta_knots = L z`
//! with `L L^T = R_knots`, so the prior on `z` is `N(0, I / tau)`. The
//! curve at unique ages is then `H z` with `H = R_cross L^{-T}`. Rows of
//! `H` are centred with the age multiplicities so that the curve sums to
//! zero over individuals for every `z`.

use crate::error::{Error, Result};
use crate::linalg::{self, JITTER_START};

use super::kernel::Matern;

/// Unique ages, the individual-to-unique-age map and the knots. Shared by
/// every coefficient.
#[derive(Debug, Clone)]
pub struct AgeLayout {
    pub unique_ages: Vec<f64>,
    /// `age_index[i] = k` with `u_i = unique_ages[k]` (0-based).
    pub age_index: Vec<usize>,
    /// Number of individuals at each unique age.
    pub counts: Vec<f64>,
    pub knots: Vec<f64>,
}

impl AgeLayout {
    pub fn new(ages: &[f64], knots: Vec<f64>) -> Result<Self> {
        if ages.is_empty() {
            return Err(Error::Invalid("no ages supplied".into()));
        }
        if knots.is_empty() {
            return Err(Error::Invalid("no knots supplied".into()));
        }
        if ages.iter().chain(&knots).any(|a| !a.is_finite()) {
            return Err(Error::Invalid("ages and knots must be finite".into()));
        }
        // `+ 0.0` maps -0.0 to 0.0, which total_cmp would keep apart
        let mut unique_ages: Vec<f64> = ages.iter().map(|a| a + 0.0).collect();
        unique_ages.sort_by(f64::total_cmp);
        unique_ages.dedup();
        let age_index: Vec<usize> = ages
            .iter()
            .map(|a| {
                unique_ages
                    .binary_search_by(|u| u.total_cmp(&(a + 0.0)))
                    .expect("age present in unique set")
            })
            .collect();
        let mut counts = vec![0.0; unique_ages.len()];
        for &k in &age_index {
            counts[k] += 1.0;
        }
        Ok(AgeLayout {
            unique_ages,
            age_index,
            counts,
            knots,
        })
    }

    /// Layout with `n_knots` equally spaced knots over the age range.
    pub fn equally_spaced(ages: &[f64], n_knots: usize) -> Result<Self> {
        if n_knots == 0 {
            return Err(Error::Invalid("knot count must be at least 1".into()));
        }
        let lo = ages.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(ages, equally_spaced_knots(lo, hi, n_knots))
    }

    pub fn n_unique(&self) -> usize {
        self.unique_ages.len()
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.age_index.len()
    }
}

pub fn equally_spaced_knots(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|j| if j == n - 1 { hi } else { lo + step * j as f64 })
        .collect()
}

/// Knot correlation matrix (with nugget) for range `phi`.
pub fn knot_correlation(kernel: &Matern, knots: &[f64], phi: f64, nugget: f64) -> Vec<f64> {
    let n = knots.len();
    let mut r = vec![0.0; n * n];
    for a in 0..n {
        r[a * n + a] = 1.0 + nugget;
        for b in 0..a {
            let v = kernel.corr(knots[a] - knots[b], phi);
            let v = if knots[a] == knots[b] { v + nugget } else { v };
            r[a * n + b] = v;
            r[b * n + a] = v;
        }
    }
    r
}

/// Cross-correlation between `points` and `knots`. Coincident locations
/// receive the same nugget as the knot diagonal.
pub fn cross_correlation(
    kernel: &Matern,
    points: &[f64],
    knots: &[f64],
    phi: f64,
    nugget: f64,
    out: &mut Vec<f64>,
) {
    let kt = knots.len();
    out.clear();
    out.resize(points.len() * kt, 0.0);
    let inv_phi = phi.recip();
    let mut xs = vec![0.0; kt];
    for (row, &u) in out.chunks_exact_mut(kt).zip(points) {
        for (x, &k) in xs.iter_mut().zip(knots) {
            *x = (u - k).abs() * inv_phi;
        }
        kernel.corr_scaled_into(&xs, row);
        for (r, &k) in row.iter_mut().zip(knots) {
            if u == k {
                *r = 1.0 + nugget;
            }
        }
    }
}

/// Cholesky factor of the knot correlation at `phi`, with the nugget used.
pub fn factor_knots(kernel: &Matern, knots: &[f64], phi: f64) -> Result<(Vec<f64>, f64)> {
    let r = knot_correlation(kernel, knots, phi, 0.0);
    let n = knots.len();
    let context = format!("knot correlation, phi = {phi}");
    let (mut l, mut nugget) = linalg::cholesky_jittered(&r, n, JITTER_START, &context)?;
    // duplicated knots need the nugget on their off-diagonal too
    if knots.windows(2).any(|w| w[0] == w[1]) {
        let r = knot_correlation(kernel, knots, phi, nugget);
        let (l2, extra) = linalg::cholesky_jittered(&r, n, 0.0, &context)?;
        l = l2;
        nugget += extra;
    }
    Ok((l, nugget))
}

/// Per-coefficient basis at a fixed range `phi`.
#[derive(Debug, Clone)]
pub struct CoefBasis {
    pub phi: f64,
    /// Nugget added to zero-distance correlations.
    pub nugget: f64,
    /// Lower Cholesky factor of the knot correlation, row-major.
    pub chol: Vec<f64>,
    /// `log |R_knots|`
    pub log_det: f64,
    /// Centred whitened basis at unique ages, `K x K~` row-major.
    pub h_centered: Vec<f64>,
    /// Weighted column means removed from `H`; the curve offset is
    /// `col_means . z`.
    pub col_means: Vec<f64>,
}

impl CoefBasis {
    pub fn build(layout: &AgeLayout, kernel: &Matern, phi: f64) -> Result<Self> {
        let (chol, nugget) = factor_knots(kernel, &layout.knots, phi)?;
        let mut cross = Vec::new();
        cross_correlation(kernel, &layout.unique_ages, &layout.knots, phi, nugget, &mut cross);
        Ok(Self::from_factor(layout, phi, chol, nugget, cross))
    }

    /// Assembles a basis from a knot factor and the matching
    /// unique-age cross-correlation (consumed and overwritten).
    pub fn from_factor(
        layout: &AgeLayout,
        phi: f64,
        chol: Vec<f64>,
        nugget: f64,
        mut cross: Vec<f64>,
    ) -> Self {
        let kt = layout.n_knots();
        debug_assert_eq!(cross.len(), layout.n_unique() * kt);
        linalg::solve_lower_rows(&chol, kt, &mut cross, layout.n_unique());
        let n_total: f64 = layout.counts.iter().sum();
        let mut means = vec![0.0; kt];
        for (row, &c) in cross.chunks_exact(kt).zip(&layout.counts) {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += c * v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n_total);
        for row in cross.chunks_exact_mut(kt) {
            for (v, &m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        CoefBasis {
            phi,
            nugget,
            log_det: linalg::chol_log_det(&chol, kt),
            chol,
            h_centered: cross,
            col_means: means,
        }
    }

    pub fn n_knots(&self) -> usize {
        self.col_means.len()
    }

    /// `z = L^{-1} beta_knots`
    pub fn whiten(&self, beta_knots: &[f64]) -> Vec<f64> {
        let mut z = beta_knots.to_vec();
        linalg::solve_lower(&self.chol, self.n_knots(), &mut z);
        z
    }

    /// `beta_knots = L z`
    pub fn color(&self, z: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; z.len()];
        linalg::lower_mul(&self.chol, self.n_knots(), z, &mut b);
        b
    }

    /// Centred curve at the unique ages.
    pub fn curve_at_unique(&self, z: &[f64], out: &mut [f64]) {
        linalg::mat_vec(&self.h_centered, out.len(), self.n_knots(), z, out);
    }

    /// Offset removed from the raw projection, `m = col_means . z`.
    pub fn offset(&self, z: &[f64]) -> f64 {
        linalg::dot(&self.col_means, z)
    }

    /// Centred curve at arbitrary ages: `R_cross(grid) R^{-1} beta - m`.
    pub fn curve_at(&self, layout: &AgeLayout, kernel: &Matern, grid: &[f64], z: &[f64]) -> Vec<f64> {
        let kt = self.n_knots();
        let mut r = Vec::new();
        cross_correlation(kernel, grid, &layout.knots, self.phi, self.nugget, &mut r);
        let mut v = z.to_vec();
        linalg::solve_lower_transpose(&self.chol, kt, &mut v);
        let m = self.offset(z);
        r.chunks_exact(kt).map(|row| linalg::dot(row, &v) - m).collect()
    }

    /// Kriging weights `Q = R_cross R_knots^{-1}` at the unique ages
    /// (uncentred).
    pub fn projection(&self, layout: &AgeLayout, kernel: &Matern) -> Vec<f64> {
        let kt = self.n_knots();
        let mut q = Vec::new();
        cross_correlation(kernel, &layout.unique_ages, &layout.knots, self.phi, self.nugget, &mut q);
        for row in q.chunks_exact_mut(kt) {
            linalg::solve_lower(&self.chol, kt, row);
            linalg::solve_lower_transpose(&self.chol, kt, row);
        }
        q
    }
}

/// Layout plus one basis per coefficient.
#[derive(Debug, Clone)]
pub struct GppDesign {
    pub layout: AgeLayout,
    pub kernel: Matern,
    pub bases: Vec<CoefBasis>,
}

/// Builds the layout and a basis for each range in `phis`.
pub fn build_design(ages: &[f64], knots: Vec<f64>, nu: f64, phis: &[f64]) -> Result<GppDesign> {
    let layout = AgeLayout::new(ages, knots)?;
    let kernel = Matern::new(nu);
    let bases = phis
        .iter()
        .map(|&phi| CoefBasis::build(&layout, &kernel, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(GppDesign {
        layout,
        kernel,
        bases,
    })
}

impl GppDesign {
    /// Replaces the basis of coefficient `d` for a new range.
    pub fn rebuild(&mut self, d: usize, phi: f64) -> Result<()> {
        self.bases[d] = CoefBasis::build(&self.layout, &self.kernel, phi)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpp::kernel::{matern_corr, MaternParams};

    #[test]
    fn signed_zero_ages_share_a_slot() {
        let l = AgeLayout::new(&[-0.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(l.unique_ages.len(), 2);
        assert_eq!(l.age_index, vec![0, 0, 1]);
        assert_eq!(l.counts, vec![2.0, 1.0]);
    }

    #[test]
    fn age_index_maps_to_unique() {
        let layout = AgeLayout::new(&[2.0, 1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(layout.unique_ages, vec![1.0, 2.0]);
        let one_based: Vec<usize> = layout.age_index.iter().map(|k| k + 1).collect();
        assert_eq!(one_based, vec![2, 1, 2]);
        assert_eq!(layout.counts, vec![1.0, 2.0]);
    }

    #[test]
    fn single_knot_projection_is_correlation_column() {
        let ages = [-1.0, 0.0, 0.3, 1.2];
        let design = build_design(&ages, vec![0.1], 2.0, &[0.5]).unwrap();
        let q = design.bases[0].projection(&design.layout, &design.kernel);
        let p = MaternParams { nu: 2.0, phi: 0.5 };
        for (k, &u) in design.layout.unique_ages.iter().enumerate() {
            let expect = matern_corr(u, 0.1, &p) / (1.0 + design.bases[0].nugget);
            assert!((q[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_identity_at_knots() {
        let knots = equally_spaced_knots(-3.0, 3.0, 15);
        let design = build_design(&knots, knots.clone(), 2.0, &[0.3]).unwrap();
        let q = design.bases[0].projection(&design.layout, &design.kernel);
        let n = knots.len();
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((q[i * n + j] - e).abs() < 1e-8, "{i},{j}: {}", q[i * n + j]);
            }
        }
    }

    #[test]
    fn projection_reproduces_cross_correlation() {
        let ages: Vec<f64> = (0..200).map(|i| -3.0 + 0.03 * i as f64).collect();
        let knots = equally_spaced_knots(-3.0, 2.97, 20);
        let design = build_design(&ages, knots.clone(), 2.0, &[0.4]).unwrap();
        let basis = &design.bases[0];
        let q = basis.projection(&design.layout, &design.kernel);
        let kt = knots.len();
        let r = knot_correlation(&design.kernel, &knots, 0.4, basis.nugget);
        let mut rc = Vec::new();
        cross_correlation(&design.kernel, &design.layout.unique_ages, &knots, 0.4, basis.nugget, &mut rc);
        let mut qr = vec![0.0; rc.len()];
        linalg::gemm(ages.len(), kt, kt, 1.0, &q, false, &r, false, 0.0, &mut qr);
        for (a, b) in qr.iter().zip(&rc) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn centred_curve_sums_to_zero() {
        let ages: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 * 0.05 - 2.5).collect();
        let design = build_design(&ages, equally_spaced_knots(-2.5, 2.5, 30), 2.0, &[0.2]).unwrap();
        let basis = &design.bases[0];
        let z: Vec<f64> = (0..30).map(|j| (j as f64 * 0.7).sin() * 3.0).collect();
        let mut curve = vec![0.0; design.layout.n_unique()];
        basis.curve_at_unique(&z, &mut curve);
        let total: f64 = design.layout.age_index.iter().map(|&k| curve[k]).sum();
        assert!(total.abs() < 1e-10);
        // grid evaluation agrees with the basis at the unique ages
        let grid = basis.curve_at(&design.layout, &design.kernel, &design.layout.unique_ages, &z);
        for (a, b) in grid.iter().zip(&curve) {
            assert!((a - b).abs() < 1e-8);
        }
        let beta = basis.color(&z);
        let back = basis.whiten(&beta);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
