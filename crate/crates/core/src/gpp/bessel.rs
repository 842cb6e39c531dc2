//! Modified Bessel function of the second kind, `K_v(x)`, for real order
//! `v >= 0` and `x > 0`.
//!
//! Temme's series for `x < 1`, Steed's continued fraction (CF2) above
//! that, followed by forward recurrence in the order.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

const MAX_ITER: usize = 10_000;
const EULER: f64 = 0.577_215_664_901_532_9;

/// `K_v(x)`. Returns `+inf` at `x = 0` and `NaN` for negative `x`.
pub fn bessel_k(v: f64, x: f64) -> f64 {
    bessel_k_pair(v, x).0
}

/// `(K_v(x), K_{v+1}(x))`.
pub fn bessel_k_pair(v: f64, x: f64) -> (f64, f64) {
    if x.is_nan() || x < 0.0 {
        return (f64::NAN, f64::NAN);
    }
    if x == 0.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let v = v.abs();
    let n = v.round();
    let u = v - n;
    let (mut prev, mut cur) = if x < 1.0 {
        temme_series(u, x)
    } else {
        cf2(u, x)
    };
    for k in 1..=(n as usize) {
        let next = 2.0 * (u + k as f64) * cur / x + prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// `K_u(x)` and `K_{u+1}(x)` for `|u| <= 1/2`, `x < 1`. Rounding error
/// grows with `x`, hence the early switch to CF2.
#[allow(clippy::many_single_char_names)]
fn temme_series(v: f64, x: f64) -> (f64, f64) {
    let gp = gamma(v + 1.0) - 1.0;
    let gm = gamma(1.0 - v) - 1.0;

    let a = (0.5 * x).ln();
    let b = (v * a).exp();
    let sigma = -a * v;
    let c = if v.abs() < 2.0 * f64::EPSILON {
        1.0
    } else {
        (PI * v).sin() / (PI * v)
    };
    let d = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let gamma1 = if v.abs() < f64::EPSILON {
        -EULER
    } else {
        (0.5 / v) * (gp - gm) * c
    };
    let gamma2 = (2.0 + gp + gm) * c / 2.0;

    let mut p = (gp + 1.0) / (2.0 * b);
    let mut q = (gm + 1.0) * b / 2.0;
    let mut f = (sigma.cosh() * gamma1 + d * (-a) * gamma2) / c;
    let mut h = p;
    let mut coef = 1.0;
    let mut sum = coef * f;
    let mut sum1 = coef * h;

    for k in 1..MAX_ITER {
        let kf = k as f64;
        f = (kf * f + p + q) / (kf * kf - v * v);
        p /= kf - v;
        q /= kf + v;
        h = p - kf * f;
        coef *= x * x / (4.0 * kf);
        sum += coef * f;
        sum1 += coef * h;
        if (coef * f).abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    (sum, 2.0 * sum1 / x)
}

/// Steed's algorithm for `K_u(x)` and `K_{u+1}(x)`, `x >= 1`.
#[allow(clippy::many_single_char_names)]
fn cf2(v: f64, x: f64) -> (f64, f64) {
    let mut a = v * v - 0.25;
    let mut b = 2.0 * (x + 1.0);
    let mut d = 1.0 / b;

    let mut delta = d;
    let mut f = d;
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut q = -a;
    let mut c = -a;
    let mut s = 1.0 + q * delta;

    for k in 2..MAX_ITER {
        let kf = k as f64;
        a -= 2.0 * (kf - 1.0);
        b += 2.0;
        d = 1.0 / (b + a * d);
        delta *= b * d - 1.0;
        f += delta;

        let t = (prev - (b - 2.0) * cur) / a;
        prev = cur;
        cur = t;
        c *= -a / kf;
        q += c * t;
        s += q * delta;

        if (q * delta).abs() < s.abs() * f64::EPSILON / 2.0 {
            break;
        }
    }
    let kv = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let kv1 = kv * (0.5 + v + x + (v * v - 0.25) * f) / x;
    (kv, kv1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) {
        assert!(((a - b) / b).abs() < rel, "{a} vs {b}");
    }

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.8 / mpmath
        close(bessel_k(0.0, 1.0), 0.421_024_438_240_708_3, 1e-14);
        close(bessel_k(1.0, 1.0), 0.601_907_230_197_234_6, 1e-14);
        close(bessel_k(2.0, 0.5), 7.550_183_551_240_869, 1e-14);
        close(bessel_k(2.0, 3.0), 0.061_510_458_471_742_04, 1e-13);
        close(bessel_k(1.0, 10.0), 1.864_877_345_382_558_5e-5, 1e-13);
        close(bessel_k(2.5, 1.7), 0.667_781_999_611_739_8, 1e-13);
    }

    #[test]
    fn half_order_closed_form() {
        for &x in &[1e-6, 0.01, 0.3, 1.0, 2.0, 2.0001, 5.0, 30.0, 200.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x).exp();
            close(bessel_k(0.5, x), exact, 1e-14);
            close(bessel_k(1.5, x), exact * (1.0 + 1.0 / x), 1e-14);
        }
    }

    #[test]
    fn edge_inputs() {
        assert!(bessel_k(1.0, 0.0).is_infinite());
        assert!(bessel_k(1.0, -1.0).is_nan());
        assert_eq!(bessel_k(2.0, 800.0), 0.0);
    }
}
