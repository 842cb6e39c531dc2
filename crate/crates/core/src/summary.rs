//! Posterior summaries: quantiles, HPD intervals, curve bands and
//! inclusion probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Inclusion;

/// Type-7 empirical quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(samples);
    (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Median, standard deviation and equal-tailed 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn scalar_summary(samples: &[f64]) -> Result<ScalarSummary> {
    if samples.len() < 2 {
        return Err(Error::Invalid("at least two draws are needed".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ScalarSummary {
        mean: mean(samples),
        median: quantile_sorted(&s, 0.5),
        sd: sd(samples),
        lo: quantile_sorted(&s, 0.025),
        hi: quantile_sorted(&s, 0.975),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub grid: Vec<f64>,
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
}

/// Pointwise summaries of curve draws, `draws[s][g]`.
pub fn curve_summary(grid: &[f64], draws: &[Vec<f64>]) -> Result<CurveSummary> {
    if draws.len() < 2 {
        return Err(Error::Invalid("curve summary needs at least two draws".into()));
    }
    if draws.iter().any(|d| d.len() != grid.len()) {
        return Err(Error::Invalid("curve draws do not match the grid".into()));
    }
    let mut out = CurveSummary {
        grid: grid.to_vec(),
        median: Vec::with_capacity(grid.len()),
        mean: Vec::with_capacity(grid.len()),
        band_lo: Vec::with_capacity(grid.len()),
        band_hi: Vec::with_capacity(grid.len()),
    };
    let mut column = Vec::with_capacity(draws.len());
    for g in 0..grid.len() {
        column.clear();
        column.extend(draws.iter().map(|d| d[g]));
        out.mean.push(mean(&column));
        column.sort_by(f64::total_cmp);
        out.median.push(quantile_sorted(&column, 0.5));
        out.band_lo.push(quantile_sorted(&column, 0.025));
        out.band_hi.push(quantile_sorted(&column, 0.975));
    }
    Ok(out)
}

/// Shortest interval containing `ceil(level * n)` of the sorted samples.
pub fn hpd_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::Invalid(format!("HPD interval needs at least 20 draws, got {n}")));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Invalid(format!("HPD level must lie in (0, 1], got {level}")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = ((level * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut best_w) = (0, f64::INFINITY);
    for i in 0..=n - m {
        let w = s[i + m - 1] - s[i];
        if w < best_w {
            best_w = w;
            best = i;
        }
    }
    Ok((s[best], s[best + m - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionSummary {
    pub ip: f64,
    pub ipf: f64,
    pub ipv: f64,
}

pub fn inclusion_summary(draws: &[Inclusion]) -> InclusionSummary {
    let n = draws.len() as f64;
    let included = draws.iter().filter(|d| d.delta1()).count();
    let varying = draws.iter().filter(|d| d.delta2()).count();
    let constant = included - varying;
    let out = InclusionSummary {
        ip: included as f64 / n,
        ipf: constant as f64 / n,
        ipv: varying as f64 / n,
    };
    debug_assert!((out.ip - out.ipf - out.ipv).abs() < 1e-12);
    out
}

/// Effective sample size from the initial positive sequence of
/// autocorrelations.
pub fn effective_sample_size(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(samples);
    let c0: f64 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        samples[..n - lag]
            .iter()
            .zip(&samples[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    n as f64 / (1.0 + 2.0 * sum)
}
