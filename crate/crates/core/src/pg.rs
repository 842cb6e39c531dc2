//! Exact sampling from the Pólya-Gamma distribution `PG(1, z)`.
//!
//! Devroye's alternating-series rejection sampler with truncation point
//! `t = 0.64`. Work is done on the `J*(1, z/2)` scale and divided by four at
//! the end. The series coefficients are evaluated as ratios to the leading
//! term, so nothing underflows for large tilts.

use std::f64::consts::{FRAC_2_PI, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

const TRUNC: f64 = 0.64;
const PI2_8: f64 = PI * PI / 8.0;

/// Draws one value from `PG(1, z)`.
pub fn sample_pg<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let z = 0.5 * z.abs();
    let fz = PI2_8 + 0.5 * z * z;
    let mass_texp = texp_mass(z, fz);

    loop {
        let x = if rng.random::<f64>() < mass_texp {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / fz
        } else {
            truncated_inv_gauss(z, rng)
        };

        // Alternating series, normalised by the n = 0 term.
        let c = if x > TRUNC { 0.5 * PI * PI * x } else { 2.0 / x };
        let u: f64 = rng.random();
        let mut s = 1.0;
        let mut n = 1u32;
        loop {
            let nf = n as f64;
            let ratio = (2.0 * nf + 1.0) * (-(nf * (nf + 1.0)) * c).exp();
            if n % 2 == 1 {
                s -= ratio;
                if u <= s {
                    return 0.25 * x;
                }
            } else {
                s += ratio;
                if u > s {
                    break;
                }
            }
            n += 1;
        }
    }
}

/// Analytic mean of `PG(1, z)`.
pub fn pg_mean(z: f64) -> f64 {
    let z = z.abs();
    if z < 1e-4 {
        0.25 - z * z / 48.0
    } else {
        (0.5 * z).tanh() / (2.0 * z)
    }
}

/// Analytic variance of `PG(1, z)`.
pub fn pg_variance(z: f64) -> f64 {
    let z = z.abs();
    if z < 1e-2 {
        // series: 1/24 - z^2/120 + 17 z^4/13440 + O(z^6)
        1.0 / 24.0 - z * z / 120.0 + 17.0 * z.powi(4) / 13440.0
    } else {
        let ch = (0.5 * z).cosh();
        (z.sinh() - z) / (4.0 * z.powi(3) * ch * ch)
    }
}

/// Probability of proposing from the exponential tail piece.
fn texp_mass(z: f64, fz: f64) -> f64 {
    let x0 = fz.ln() + fz * TRUNC;
    let rt = (1.0 / TRUNC).sqrt();
    let xb = x0 - z + ln_norm_cdf(rt * (TRUNC * z - 1.0));
    let xa = x0 + z + ln_norm_cdf(-rt * (TRUNC * z + 1.0));
    let qdivp = 2.0 * FRAC_2_PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + qdivp)
}

fn ln_norm_cdf(x: f64) -> f64 {
    (0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)).ln()
}

/// Inverse Gaussian with mean `1/z`, shape 1, truncated to `(0, TRUNC)`.
fn truncated_inv_gauss<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    if z < 1.0 / TRUNC {
        // mean beyond the truncation point: chi-square style proposal
        loop {
            let x = loop {
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                if e1 * e1 <= 2.0 * e2 / TRUNC {
                    let d = 1.0 + TRUNC * e1;
                    break TRUNC / (d * d);
                }
            };
            if z == 0.0 || rng.random::<f64>() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    }
    let mu = 1.0 / z;
    loop {
        let y: f64 = StandardNormal.sample(rng);
        let y = y * y;
        let half_mu = 0.5 * mu;
        let mu_y = mu * y;
        let x = mu + half_mu * mu_y - half_mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
        let x = if rng.random::<f64>() > mu / (mu + x) {
            mu * mu / x
        } else {
            x
        };
        if x < TRUNC && x > 0.0 {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(z: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..n).map(|_| sample_pg(z, &mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (m, v)
    }

    #[test]
    fn analytic_moments_limits() {
        assert!((pg_mean(0.0) - 0.25).abs() < 1e-15);
        assert!((pg_variance(0.0) - 1.0 / 24.0).abs() < 1e-15);
        assert!((pg_mean(2.0) - 1f64.tanh() / 4.0).abs() < 1e-15);
        // both branches of the variance agree near the switch
        let z: f64 = 0.01;
        let ch = (0.5 * z).cosh();
        let exact = (z.sinh() - z) / (4.0 * z.powi(3) * ch * ch);
        assert!((pg_variance(0.00999999) - exact).abs() < 1e-9);
    }

    #[test]
    fn mean_at_zero_and_two() {
        for (z, seed) in [(0.0, 1), (2.0, 2)] {
            let (m, _) = moments(z, 100_000, seed);
            let se = (pg_variance(z) / 1e5).sqrt();
            assert!((m - pg_mean(z)).abs() < 3.0 * se, "z={z} mean {m}");
        }
    }

    #[test]
    fn symmetric_in_sign() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            assert_eq!(sample_pg(3.0, &mut a), sample_pg(-3.0, &mut b));
        }
    }

    #[test]
    fn large_tilts_stay_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for z in [1e4, 1e5, 1e6] {
            let mut sum = 0.0;
            for _ in 0..2000 {
                let w = sample_pg(z, &mut rng);
                assert!(w > 0.0 && w.is_finite());
                sum += w;
            }
            let m = sum / 2000.0;
            assert!((m / pg_mean(z) - 1.0).abs() < 0.05, "z={z}: {m}");
        }
    }

    #[test]
    fn mixture_mass_is_probability() {
        for z in [0.0, 0.3, 1.0, 1.5625, 2.0, 10.0, 1e3, 5e5] {
            let fz = PI2_8 + 0.5 * z * z;
            let p = texp_mass(z, fz);
            assert!((0.0..=1.0).contains(&p), "z={z} p={p}");
        }
    }
}
