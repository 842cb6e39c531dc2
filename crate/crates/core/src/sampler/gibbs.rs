use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::conjugate::{assay_posterior, sigma2_posterior, tau_posterior, theta_posterior};
use super::ssvs::{self, BlockStats, SsvsWork};
use crate::error::{Error, Result};
use crate::gpp::{build_design, cross_correlation, equally_spaced_knots, factor_knots, CoefBasis, GppDesign};
use crate::linalg;
use crate::model::{assay_counts, ChainState, Dataset, Inclusion, PriorConfig};
use crate::pg::sample_pg;

/// Counts of proposed and accepted range moves for one coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhiMoves {
    pub proposed: u64,
    pub accepted: u64,
}

impl PhiMoves {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One chain's Gibbs machinery: the projection design, caches and
/// scratch buffers. The chain state itself is passed in so it can be
/// inspected or replaced between sweeps; call [`Sampler::sync`] after
/// modifying it by hand.
pub struct Sampler<'a> {
    data: &'a Dataset,
    priors: PriorConfig,
    design: GppDesign,
    /// Column `d` of the design, with the intercept column first.
    cols: Vec<Vec<f64>>,
    pool_off: Vec<usize>,
    pool_flat: Vec<usize>,
    /// Current number of truly positive members per pool.
    pool_pos: Vec<u32>,
    clinic_members: Vec<Vec<usize>>,
    /// `psi_d` at the unique ages.
    psi: Vec<Vec<f64>>,
    stats: BlockStats,
    work: SsvsWork,
    varying_ready: bool,
    cross: Vec<f64>,
    psi_new: Vec<f64>,
    phi_moves: Vec<PhiMoves>,
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn kappa(y: bool) -> f64 {
    if y {
        0.5
    } else {
        -0.5
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters are positive")
        .sample(rng)
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    Beta::new(a, b).expect("beta parameters are positive").sample(rng)
}

impl<'a> Sampler<'a> {
    /// Builds the design for `state`'s ranges and synchronises caches
    /// (including `state.eta`) with `state`.
    pub fn new(data: &'a Dataset, priors: &PriorConfig, state: &mut ChainState) -> Result<Self> {
        priors.validate()?;
        let lo = data.ages.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.ages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let knots = equally_spaced_knots(lo, hi, priors.n_knots);
        let phis: Vec<f64> = state.coefs.iter().map(|c| c.phi).collect();
        let design = build_design(&data.ages, knots, priors.nu, &phis)?;
        Self::with_design(data, priors, design, state)
    }

    /// As [`Sampler::new`] with a caller-supplied design (one basis per
    /// coefficient).
    pub fn with_design(
        data: &'a Dataset,
        priors: &PriorConfig,
        design: GppDesign,
        state: &mut ChainState,
    ) -> Result<Self> {
        let n = data.n();
        let p = data.p();
        if state.coefs.len() != p + 1 || design.bases.len() != p + 1 {
            return Err(Error::Invalid(format!(
                "expected {} coefficients, state has {} and design {}",
                p + 1,
                state.coefs.len(),
                design.bases.len()
            )));
        }
        if state.se.len() != data.n_assays || state.gamma.len() != data.n_clinics {
            return Err(Error::Invalid("state does not match dataset dimensions".into()));
        }
        let mut cols = vec![vec![1.0; n]];
        for d in 0..p {
            cols.push((0..n).map(|i| data.x(i, d)).collect());
        }
        let (pool_off, pool_flat) = data.pools_by_individual();
        let mut clinic_members = vec![Vec::new(); data.n_clinics];
        for (i, &c) in data.clinic.iter().enumerate() {
            clinic_members[c].push(i);
        }
        let k = design.layout.n_unique();
        let mut sampler = Sampler {
            data,
            priors: priors.clone(),
            design,
            cols,
            pool_off,
            pool_flat,
            pool_pos: vec![0; data.pools.len()],
            clinic_members,
            psi: vec![vec![0.0; k]; p + 1],
            stats: BlockStats {
                w: vec![0.0; k],
                t: vec![0.0; k],
            },
            work: SsvsWork::default(),
            varying_ready: false,
            cross: Vec::new(),
            psi_new: vec![0.0; k],
            phi_moves: vec![PhiMoves::default(); p + 1],
        };
        sampler.sync(state)?;
        Ok(sampler)
    }

    pub fn design(&self) -> &GppDesign {
        &self.design
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn n_coef(&self) -> usize {
        self.cols.len()
    }

    pub fn phi_moves(&self) -> &[PhiMoves] {
        &self.phi_moves
    }

    /// Rebuilds every cache from `state`: bases for changed ranges, knot
    /// values from the whitened coordinates, pool tallies, `psi`, `eta`
    /// and `h`.
    pub fn sync(&mut self, state: &mut ChainState) -> Result<()> {
        for d in 0..self.n_coef() {
            if self.design.bases[d].phi != state.coefs[d].phi {
                self.design.rebuild(d, state.coefs[d].phi)?;
            }
            let basis = &self.design.bases[d];
            if state.coefs[d].z.len() != basis.n_knots() {
                return Err(Error::Invalid("knot count differs from configuration".into()));
            }
            state.coefs[d].beta_knots = basis.color(&state.coefs[d].z);
        }
        for (j, pool) in self.data.pools.iter().enumerate() {
            self.pool_pos[j] = pool.members.iter().filter(|&&i| state.y_tilde[i]).count() as u32;
        }
        for d in 0..self.n_coef() {
            self.psi[d] = self.fresh_psi(state, d);
        }
        state.eta = self.fresh_eta(state);
        state.refresh_h();
        Ok(())
    }

    fn fresh_psi(&self, state: &ChainState, d: usize) -> Vec<f64> {
        let c = &state.coefs[d];
        let k = self.design.layout.n_unique();
        match c.inclusion {
            Inclusion::Excluded => vec![0.0; k],
            Inclusion::Constant => vec![c.alpha; k],
            Inclusion::Varying => {
                let mut out = vec![0.0; k];
                self.design.bases[d].curve_at_unique(&c.z, &mut out);
                out.iter_mut().for_each(|v| *v += c.alpha);
                out
            }
        }
    }

    fn fresh_eta(&self, state: &ChainState) -> Vec<f64> {
        let idx = &self.design.layout.age_index;
        (0..self.data.n())
            .map(|i| {
                let mut e = state.gamma[self.data.clinic[i]];
                for d in 0..self.n_coef() {
                    e += self.cols[d][i] * self.psi[d][idx[i]];
                }
                e
            })
            .collect()
    }

    /// Linear predictor recomputed from the parameters, ignoring caches.
    pub fn recompute_eta(&self, state: &ChainState) -> Vec<f64> {
        let idx = &self.design.layout.age_index;
        let psi: Vec<Vec<f64>> = (0..self.n_coef()).map(|d| self.fresh_psi(state, d)).collect();
        (0..self.data.n())
            .map(|i| {
                let mut e = state.gamma[self.data.clinic[i]];
                for (col, ps) in self.cols.iter().zip(&psi) {
                    e += col[i] * ps[idx[i]];
                }
                e
            })
            .collect()
    }

    /// Largest gap between the cached and recomputed linear predictor.
    pub fn eta_drift(&self, state: &ChainState) -> f64 {
        self.recompute_eta(state)
            .iter()
            .zip(&state.eta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `sum_i beta_d(u_i)` for every coefficient, from the current basis.
    pub fn curve_sums(&self, state: &ChainState) -> Vec<f64> {
        let layout = &self.design.layout;
        let mut curve = vec![0.0; layout.n_unique()];
        (0..self.n_coef())
            .map(|d| {
                self.design.bases[d].curve_at_unique(&state.coefs[d].z, &mut curve);
                layout.age_index.iter().map(|&k| curve[k]).sum()
            })
            .collect()
    }

    /// `psi_d` on arbitrary ages for the current state.
    pub fn psi_on(&self, state: &ChainState, d: usize, ages: &[f64]) -> Vec<f64> {
        let c = &state.coefs[d];
        match c.inclusion {
            Inclusion::Excluded => vec![0.0; ages.len()],
            Inclusion::Constant => vec![c.alpha; ages.len()],
            Inclusion::Varying => {
                let basis = &self.design.bases[d];
                let mut v = basis.curve_at(&self.design.layout, &self.design.kernel, ages, &c.z);
                v.iter_mut().for_each(|x| *x += c.alpha);
                v
            }
        }
    }

    /// One full iteration in the order 1a, 1b, (2a, 2b, 3a, 3b, 3c) for
    /// each coefficient, 4, 5.
    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        self.step1a_update_y_tilde(state, rng);
        self.step1b_update_omega(state, rng);
        for d in 0..self.n_coef() {
            self.fill_block_stats(state, d);
            self.step2a_update_inclusion(state, d, rng)?;
            if d > 0 {
                self.step2b_update_theta(state, d, rng);
            }
            self.step3a_update_coefficients(state, d, rng)?;
            self.step3b_update_tau(state, d, rng);
            self.step3c_update_phi(state, d, rng)?;
        }
        self.step4_update_random_effects(state, rng);
        self.step5_update_assays(state, rng);
        Ok(())
    }

    /// Systematic scan over individuals, each drawn from its full
    /// conditional given everyone else's current status.
    pub fn step1a_update_y_tilde<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) {
        let pools = &self.data.pools;
        for i in 0..self.data.n() {
            let y = state.y_tilde[i];
            let g = logistic(state.eta[i]);
            let mut p1 = g;
            let mut p0 = 1.0 - g;
            let mine = &self.pool_flat[self.pool_off[i]..self.pool_off[i + 1]];
            for &j in mine {
                let pool = &pools[j];
                let se = state.se[pool.assay];
                let sp = state.sp[pool.assay];
                let others = self.pool_pos[j] - y as u32;
                let f1 = if pool.outcome { se } else { 1.0 - se };
                let f0 = if others > 0 {
                    f1
                } else if pool.outcome {
                    1.0 - sp
                } else {
                    sp
                };
                p1 *= f1;
                p0 *= f0;
            }
            let total = p1 + p0;
            let u: f64 = rng.random();
            if !(total > 0.0) || !total.is_finite() {
                continue;
            }
            let new = u * total < p1;
            if new != y {
                state.y_tilde[i] = new;
                for &j in mine {
                    if new {
                        self.pool_pos[j] += 1;
                    } else {
                        self.pool_pos[j] -= 1;
                    }
                }
            }
        }
    }

    pub fn step1b_update_omega<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) {
        for i in 0..self.data.n() {
            let w = sample_pg(state.eta[i], rng);
            state.omega[i] = w;
            state.h[i] = kappa(state.y_tilde[i]) / w;
        }
    }

    /// Tallies `w_k`, `t_k` for coefficient `d` from the current state.
    pub fn fill_block_stats(&mut self, state: &ChainState, d: usize) {
        let idx = &self.design.layout.age_index;
        let col = &self.cols[d];
        let psi = &self.psi[d];
        let w = &mut self.stats.w;
        let t = &mut self.stats.t;
        w.iter_mut().for_each(|v| *v = 0.0);
        t.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.data.n() {
            let x = col[i];
            if x == 0.0 {
                continue;
            }
            let k = idx[i];
            let om = state.omega[i];
            let r = state.h[i] - state.eta[i] + x * psi[k];
            w[k] += om * x * x;
            t[k] += om * x * r;
        }
        self.varying_ready = false;
    }

    pub fn block_stats(&self) -> &BlockStats {
        &self.stats
    }

    /// Collapsed draw of the inclusion state. The intercept is pinned.
    pub fn step2a_update_inclusion<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        d: usize,
        rng: &mut R,
    ) -> Result<Inclusion> {
        let tau = state.coefs[d].tau;
        let basis = &self.design.bases[d];
        let kt = basis.n_knots();
        let xi = self.priors.xi_alpha;
        let inc = if d == 0 {
            let pinned = if self.priors.force_vary_intercept {
                Inclusion::Varying
            } else {
                Inclusion::Constant
            };
            if pinned == Inclusion::Varying {
                ssvs::varying_log_marginal(&self.stats, &basis.h_centered, kt, tau, xi, &mut self.work)?;
                self.varying_ready = true;
            }
            pinned
        } else {
            let probs = ssvs::inclusion_probabilities(
                &self.stats,
                &basis.h_centered,
                kt,
                tau,
                xi,
                state.theta1[d - 1],
                state.theta2[d - 1],
                &mut self.work,
            )?;
            self.varying_ready = true;
            ssvs::pick(&probs, rng.random())
        };
        state.coefs[d].inclusion = inc;
        Ok(inc)
    }

    /// Probabilities the collapsed draw would use for coefficient `d`.
    pub fn inclusion_probabilities(&mut self, state: &ChainState, d: usize) -> Result<[f64; 3]> {
        let basis = &self.design.bases[d];
        let kt = basis.n_knots();
        let (t1, t2) = if d == 0 {
            (1.0, 1.0)
        } else {
            (state.theta1[d - 1], state.theta2[d - 1])
        };
        let out = ssvs::inclusion_probabilities(
            &self.stats,
            &basis.h_centered,
            kt,
            state.coefs[d].tau,
            self.priors.xi_alpha,
            t1,
            t2,
            &mut self.work,
        );
        self.varying_ready = false;
        out
    }

    pub fn step2b_update_theta<R: Rng + ?Sized>(&mut self, state: &mut ChainState, d: usize, rng: &mut R) {
        let ((a1, b1), (a2, b2)) = theta_posterior(&self.priors, state.coefs[d].inclusion);
        state.theta1[d - 1] = beta_draw(a1, b1, rng);
        state.theta2[d - 1] = beta_draw(a2, b2, rng);
    }

    /// Draws `(alpha, beta~)` given the inclusion state and refreshes
    /// `psi_d` and `eta`. Knot values of an inactive curve are drawn from
    /// their prior so `tau` and `phi` keep mixing.
    pub fn step3a_update_coefficients<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        d: usize,
        rng: &mut R,
    ) -> Result<()> {
        let inc = state.coefs[d].inclusion;
        let tau = state.coefs[d].tau;
        let kt = self.design.bases[d].n_knots();
        let xi = self.priors.xi_alpha;
        match inc {
            Inclusion::Excluded | Inclusion::Constant => {
                let sd = tau.sqrt().recip();
                let coef = &mut state.coefs[d];
                for z in coef.z.iter_mut() {
                    let e: f64 = StandardNormal.sample(rng);
                    *z = sd * e;
                }
                coef.alpha = if inc == Inclusion::Constant {
                    let prec = self.stats.s_xx() + 1.0 / xi;
                    let e: f64 = StandardNormal.sample(rng);
                    self.stats.s_xr() / prec + e / prec.sqrt()
                } else {
                    0.0
                };
                let a = coef.alpha;
                self.psi_new.iter_mut().for_each(|v| *v = a);
            }
            Inclusion::Varying => {
                if !self.varying_ready {
                    let basis = &self.design.bases[d];
                    ssvs::varying_log_marginal(&self.stats, &basis.h_centered, kt, tau, xi, &mut self.work)?;
                }
                let v = &self.work.varying;
                let m = v.dim;
                let mut lam: Vec<f64> = v
                    .y
                    .iter()
                    .map(|&y| {
                        let e: f64 = StandardNormal.sample(rng);
                        y + e
                    })
                    .collect();
                linalg::solve_lower_transpose(&v.chol, m, &mut lam);
                let coef = &mut state.coefs[d];
                coef.alpha = lam[0];
                coef.z.copy_from_slice(&lam[1..]);
                self.design.bases[d].curve_at_unique(&coef.z, &mut self.psi_new);
                let a = coef.alpha;
                self.psi_new.iter_mut().for_each(|v| *v += a);
            }
        }
        self.varying_ready = false;
        let basis = &self.design.bases[d];
        state.coefs[d].beta_knots = basis.color(&state.coefs[d].z);
        self.commit_psi(state, d);
        Ok(())
    }

    /// Replaces `psi_d` by `psi_new` and shifts `eta` accordingly.
    fn commit_psi(&mut self, state: &mut ChainState, d: usize) {
        let idx = &self.design.layout.age_index;
        let col = &self.cols[d];
        let old = &mut self.psi[d];
        for (o, n) in old.iter_mut().zip(self.psi_new.iter()) {
            // keep the difference in `o` temporarily
            *o = n - *o;
        }
        for i in 0..self.data.n() {
            let delta = old[idx[i]];
            if delta != 0.0 {
                state.eta[i] += col[i] * delta;
            }
        }
        old.copy_from_slice(&self.psi_new);
    }

    pub fn step3b_update_tau<R: Rng + ?Sized>(&mut self, state: &mut ChainState, d: usize, rng: &mut R) {
        let coef = &mut state.coefs[d];
        let q = linalg::dot(&coef.z, &coef.z);
        let (shape, rate) = tau_posterior(&self.priors, coef.z.len(), q);
        coef.tau = gamma_draw(shape, rate, rng);
    }

    /// Random-walk Metropolis-Hastings on `logit((phi - a) / (b - a))`.
    /// For a varying coefficient the target includes the augmented
    /// likelihood, because the projected curve moves with `phi`.
    pub fn step3c_update_phi<R: Rng + ?Sized>(
        &mut self,
        state: &mut ChainState,
        d: usize,
        rng: &mut R,
    ) -> Result<()> {
        let (a, b) = (self.priors.a_phi, self.priors.b_phi);
        let phi = state.coefs[d].phi;
        let step: f64 = StandardNormal.sample(rng);
        let u: f64 = rng.random();
        let phi_new = propose_phi(phi, a, b, self.priors.phi_step * step);
        self.phi_moves[d].proposed += 1;
        if !(phi_new > a && phi_new < b) {
            return Ok(());
        }
        let layout = &self.design.layout;
        let kernel = &self.design.kernel;
        let kt = layout.n_knots();
        let (chol_new, nugget_new) = factor_knots(kernel, &layout.knots, phi_new)?;
        let log_det_new = linalg::chol_log_det(&chol_new, kt);
        let coef = &state.coefs[d];
        let mut z_new = coef.beta_knots.clone();
        linalg::solve_lower(&chol_new, kt, &mut z_new);
        let basis = &self.design.bases[d];
        let tau = coef.tau;
        let mut log_r = -0.5 * (log_det_new - basis.log_det)
            - 0.5 * tau * (linalg::dot(&z_new, &z_new) - linalg::dot(&coef.z, &coef.z))
            + ((b - phi_new) * (phi_new - a)).ln()
            - ((b - phi) * (phi - a)).ln();

        let varying = coef.inclusion == Inclusion::Varying;
        if varying {
            cross_correlation(kernel, &layout.unique_ages, &layout.knots, phi_new, nugget_new, &mut self.cross);
            let mut v = z_new.clone();
            linalg::solve_lower_transpose(&chol_new, kt, &mut v);
            let raw = &mut self.psi_new;
            linalg::mat_vec(&self.cross, layout.n_unique(), kt, &v, raw);
            let n_total: f64 = layout.counts.iter().sum();
            let m = linalg::dot(&layout.counts, raw) / n_total;
            let alpha = coef.alpha;
            let old = &self.psi[d];
            let mut ll = 0.0;
            for k in 0..raw.len() {
                let new = alpha + raw[k] - m;
                let (w, t) = (self.stats.w[k], self.stats.t[k]);
                ll += t * (new - old[k]) - 0.5 * w * (new * new - old[k] * old[k]);
            }
            log_r += ll;
        }
        if u.ln() < log_r {
            self.phi_moves[d].accepted += 1;
            if !varying {
                cross_correlation(kernel, &layout.unique_ages, &layout.knots, phi_new, nugget_new, &mut self.cross);
            }
            let cross = std::mem::take(&mut self.cross);
            let basis = CoefBasis::from_factor(layout, phi_new, chol_new, nugget_new, cross);
            let coef = &mut state.coefs[d];
            coef.phi = phi_new;
            coef.z = z_new;
            if varying {
                basis.curve_at_unique(&coef.z, &mut self.psi_new);
                let a = coef.alpha;
                self.psi_new.iter_mut().for_each(|v| *v += a);
                self.design.bases[d] = basis;
                self.commit_psi(state, d);
            } else {
                self.design.bases[d] = basis;
            }
        }
        Ok(())
    }

    pub fn step4_update_random_effects<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) {
        if !self.priors.random_effects {
            return;
        }
        let inv_s2 = 1.0 / state.sigma2;
        for (l, members) in self.clinic_members.iter().enumerate() {
            let g_old = state.gamma[l];
            let mut prec = inv_s2;
            let mut num = 0.0;
            for &i in members {
                let w = state.omega[i];
                prec += w;
                num += w * (state.h[i] - state.eta[i] + g_old);
            }
            let e: f64 = StandardNormal.sample(rng);
            let g_new = num / prec + e / prec.sqrt();
            state.gamma[l] = g_new;
            let delta = g_new - g_old;
            for &i in members {
                state.eta[i] += delta;
            }
        }
        let (shape, scale) = sigma2_posterior(&self.priors, &state.gamma);
        state.sigma2 = 1.0 / gamma_draw(shape, scale, rng);
    }

    pub fn step5_update_assays<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) {
        if self.priors.assays_known() {
            return;
        }
        let counts = assay_counts(self.data, &state.y_tilde);
        for (m, c) in counts.iter().enumerate() {
            let ((a_se, b_se), (a_sp, b_sp)) = assay_posterior(&self.priors, c);
            state.se[m] = beta_draw(a_se, b_se, rng);
            state.sp[m] = beta_draw(a_sp, b_sp, rng);
        }
    }

    /// Current per-pool positive counts.
    pub fn pool_positive_counts(&self) -> &[u32] {
        &self.pool_pos
    }
}

/// Logit-scale random-walk proposal on `(a, b)`.
pub fn propose_phi(phi: f64, a: f64, b: f64, step: f64) -> f64 {
    let x = ((phi - a) / (b - phi)).ln() + step;
    // (b e^x + a) / (1 + e^x), written to avoid overflow
    if x > 0.0 {
        let e = (-x).exp();
        (b + a * e) / (1.0 + e)
    } else {
        let e = x.exp();
        (b * e + a) / (1.0 + e)
    }
}

/// Log acceptance ratio of a range move for an inactive curve: Gaussian
/// density of the knot values under both ranges plus the Jacobian of the
/// logit map.
pub fn phi_log_ratio_prior_only(
    beta_knots: &[f64],
    tau: f64,
    chol_cur: &[f64],
    chol_new: &[f64],
    phi: f64,
    phi_new: f64,
    a: f64,
    b: f64,
) -> f64 {
    let kt = beta_knots.len();
    let mut z = beta_knots.to_vec();
    let mut z_new = beta_knots.to_vec();
    linalg::solve_lower(chol_cur, kt, &mut z);
    linalg::solve_lower(chol_new, kt, &mut z_new);
    -0.5 * (linalg::chol_log_det(chol_new, kt) - linalg::chol_log_det(chol_cur, kt))
        - 0.5 * tau * (linalg::dot(&z_new, &z_new) - linalg::dot(&z, &z))
        + ((b - phi_new) * (phi_new - a)).ln()
        - ((b - phi) * (phi - a)).ln()
}
