//! Matérn correlation.

use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::bessel::{bessel_k, bessel_k_pair};

/// Smoothness and range of a Matérn correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub nu: f64,
    pub phi: f64,
}

/// `rho(u1, u2)` for the Matérn family, evaluated through the Bessel
/// function (no tabulation).
pub fn matern_corr(u1: f64, u2: f64, params: &MaternParams) -> f64 {
    let d = (u1 - u2).abs();
    if d == 0.0 {
        return 1.0;
    }
    matern_scaled(d / params.phi, params.nu, ln_norm_const(params.nu))
}

/// `log(2^{1-nu} / Gamma(nu))`
fn ln_norm_const(nu: f64) -> f64 {
    (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu)
}

/// `c x^nu K_nu(x)` with `c = exp(ln_c)`.
fn matern_scaled(x: f64, nu: f64, ln_c: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if nu > 1.0 && x < 1e-8 {
        // x^nu K_nu(x) overflows in the recurrence; two-term expansion
        return 1.0 - x * x / (4.0 * (nu - 1.0));
    }
    if x >= ASYMPTOTIC_X {
        return matern_asymptotic(x, nu, ln_c);
    }
    let k = bessel_k(nu, x);
    if k == 0.0 {
        return 0.0;
    }
    (ln_c + nu * x.ln() + k.ln()).exp().min(1.0)
}

const ASYMPTOTIC_X: f64 = 40.0;

/// Large-argument expansion of `c x^nu K_nu(x)`; the value is below
/// `1e-15` here, so only relative accuracy matters.
fn matern_asymptotic(x: f64, nu: f64, ln_c: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    let ln_k = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
    (ln_c + nu * x.ln() + ln_k).exp() * sum
}

/// Matérn correlation as a function of scaled distance `x = d / phi`.
///
/// For `nu >= 1` evaluation goes through a cubic Hermite table from
/// zero to the point where the correlation drops below `TAIL_CUTOFF`;
/// beyond it the correlation is taken as zero. The table is built once per
/// `nu` and shared. For `nu < 2` the derivatives near zero are singular
/// enough to spoil the interpolation, so distances below `TABLE_XMIN` are
/// evaluated exactly.
#[derive(Debug, Clone)]
pub struct Matern {
    nu: f64,
    ln_c: f64,
    table: Option<Arc<HermiteTable>>,
}

const TABLE_STEPS_PER_UNIT: f64 = 1024.0;
const TABLE_XMIN: f64 = 0.125;
const TABLE_XMAX: f64 = 256.0;
const TAIL_CUTOFF: f64 = 1e-17;

#[derive(Debug)]
struct HermiteTable {
    // interleaved (f, h * f') at each node
    nodes: Vec<f64>,
    /// End of the tabulated range.
    end: f64,
    /// Whether the correlation is below `TAIL_CUTOFF` from `end` on.
    zero_tail: bool,
    /// Start of the range served by the table.
    start: f64,
}

impl Matern {
    pub fn new(nu: f64) -> Self {
        assert!(nu > 0.0 && nu.is_finite(), "Matérn smoothness must be positive");
        let ln_c = ln_norm_const(nu);
        let table = if nu >= 1.0 {
            Some(shared_table(nu, ln_c))
        } else {
            None
        };
        Matern { nu, ln_c, table }
    }

    /// Exact evaluation, bypassing the table.
    pub fn exact(nu: f64) -> Self {
        Matern {
            nu,
            ln_c: ln_norm_const(nu),
            table: None,
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    #[inline]
    pub fn corr_scaled(&self, x: f64) -> f64 {
        match &self.table {
            Some(t) if x >= t.start => {
                if x < t.end {
                    t.eval(x)
                } else if t.zero_tail {
                    0.0
                } else {
                    matern_scaled(x, self.nu, self.ln_c)
                }
            }
            _ => matern_scaled(x, self.nu, self.ln_c),
        }
    }

    /// Correlations at the scaled distances `xs`. Same values as
    /// `corr_scaled`, but the table path is branch-free so the loop
    /// vectorises.
    pub fn corr_scaled_into(&self, xs: &[f64], out: &mut [f64]) {
        assert_eq!(xs.len(), out.len());
        let t = match &self.table {
            Some(t) if t.zero_tail => t,
            _ => {
                for (o, &x) in out.iter_mut().zip(xs) {
                    *o = self.corr_scaled(x);
                }
                return;
            }
        };
        let last = t.end - 1.0 / TABLE_STEPS_PER_UNIT;
        let nodes = &t.nodes[..];
        let max_k = nodes.len() / 2 - 2;
        let mut near = false;
        for (o, &x) in out.iter_mut().zip(xs) {
            near |= x < t.start;
            let s = x.clamp(0.0, last) * TABLE_STEPS_PER_UNIT;
            let k = (s as usize).min(max_k);
            let u = s - k as f64;
            // SAFETY: k <= max_k, so 2k + 3 < nodes.len()
            let p = unsafe {
                [
                    *nodes.get_unchecked(2 * k),
                    *nodes.get_unchecked(2 * k + 1),
                    *nodes.get_unchecked(2 * k + 2),
                    *nodes.get_unchecked(2 * k + 3),
                ]
            };
            let f = hermite(u, p);
            *o = if x < t.end { f } else { 0.0 };
        }
        if near {
            for (o, &x) in out.iter_mut().zip(xs) {
                if x < t.start {
                    *o = matern_scaled(x, self.nu, self.ln_c);
                }
            }
        }
    }

    #[inline]
    pub fn corr(&self, d: f64, phi: f64) -> f64 {
        if d == 0.0 {
            1.0
        } else {
            self.corr_scaled(d.abs() * phi.recip())
        }
    }
}

impl HermiteTable {
    fn build(nu: f64, ln_c: f64) -> Self {
        // first whole x past which the correlation is negligible
        let mut end = 1.0;
        while end < TABLE_XMAX && matern_scaled(end, nu, ln_c) >= TAIL_CUTOFF {
            end += 1.0;
        }
        let zero_tail = matern_scaled(end, nu, ln_c) < TAIL_CUTOFF;
        let n = (end * TABLE_STEPS_PER_UNIT) as usize + 2;
        let h = 1.0 / TABLE_STEPS_PER_UNIT;
        let mut nodes = Vec::with_capacity(2 * n);
        for k in 0..n {
            let x = k as f64 * h;
            let (f, df) = if k == 0 {
                (1.0, 0.0)
            } else {
                // d/dx [x^nu K_nu(x)] = -x^nu K_{nu-1}(x)
                let (km1, _) = bessel_k_pair(nu - 1.0, x);
                let scale = (ln_c + nu * x.ln()).exp();
                (matern_scaled(x, nu, ln_c), -scale * km1)
            };
            nodes.push(f);
            nodes.push(h * df);
        }
        let start = if nu >= 2.0 { 0.0 } else { TABLE_XMIN };
        HermiteTable {
            nodes,
            end,
            zero_tail,
            start,
        }
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let s = x * TABLE_STEPS_PER_UNIT;
        let k = s as usize;
        let t = s - k as f64;
        hermite(t, [self.nodes[2 * k], self.nodes[2 * k + 1], self.nodes[2 * k + 2], self.nodes[2 * k + 3]])
    }
}

#[inline(always)]
fn hermite(t: f64, p: [f64; 4]) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * p[0] + h10 * p[1] + h01 * p[2] + h11 * p[3]
}

fn shared_table(nu: f64, ln_c: f64) -> Arc<HermiteTable> {
    static TABLES: OnceLock<Mutex<Vec<(u64, Arc<HermiteTable>)>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = tables.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, t)) = guard.iter().find(|(bits, _)| *bits == nu.to_bits()) {
        return Arc::clone(t);
    }
    let t = Arc::new(HermiteTable::build(nu, ln_c));
    guard.push((nu.to_bits(), Arc::clone(&t)));
    t
}
