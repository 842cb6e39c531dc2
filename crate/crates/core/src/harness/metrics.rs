use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::RepResult;
use crate::error::{Error, Result};
use crate::summary::{mean, sd};

pub const METRICS_COLUMNS: [&str; 10] = [
    "parameter", "bias", "ssd", "ese", "cp95", "ip", "ipf", "ipv", "avg_tests", "savings",
];

/// One line of the replication table. Cells that do not apply are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub parameter: String,
    pub bias: Option<f64>,
    pub ssd: Option<f64>,
    pub ese: Option<f64>,
    pub cp95: Option<f64>,
    pub ip: Option<f64>,
    pub ipf: Option<f64>,
    pub ipv: Option<f64>,
    pub avg_tests: Option<f64>,
    pub savings: Option<f64>,
}

impl MetricsRow {
    fn cells(&self) -> [Option<f64>; 9] {
        [
            self.bias,
            self.ssd,
            self.ese,
            self.cp95,
            self.ip,
            self.ipf,
            self.ipv,
            self.avg_tests,
            self.savings,
        ]
    }
}

/// Aggregated replication metrics over the completed replications.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub rows: Vec<MetricsRow>,
    pub n_completed: usize,
}

impl ReplicationMetrics {
    pub fn row(&self, parameter: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }
}

/// Bias, SSD, ESE and CP95 per estimand, mean inclusion probabilities per
/// covariate, and the test budget. `n` is the number of individuals.
pub fn aggregate(results: &[RepResult], n: usize) -> ReplicationMetrics {
    let mut rows = Vec::new();
    let Some(first) = results.first() else {
        return ReplicationMetrics::default();
    };
    let r = results.len() as f64;
    for (k, est) in first.estimands.iter().enumerate() {
        let pick = |f: &dyn Fn(&super::EstimandResult) -> f64| -> Vec<f64> {
            results.iter().map(|res| f(&res.estimands[k])).collect()
        };
        let point = pick(&|e| e.estimate);
        let covered = pick(&|e| (e.lo <= e.truth && e.truth <= e.hi) as u8 as f64);
        rows.push(MetricsRow {
            parameter: est.name.clone(),
            bias: Some(mean(&point) - est.truth),
            ssd: (results.len() >= 2).then(|| sd(&point)),
            ese: Some(mean(&pick(&|e| e.sd))),
            cp95: Some(covered.iter().sum::<f64>() / r),
            ..Default::default()
        });
    }
    for (k, (name, _)) in first.inclusion.iter().enumerate() {
        let avg = |f: &dyn Fn(&crate::summary::InclusionSummary) -> f64| {
            results.iter().map(|res| f(&res.inclusion[k].1)).sum::<f64>() / r
        };
        rows.push(MetricsRow {
            parameter: format!("psi_{name}"),
            ip: Some(avg(&|s| s.ip)),
            ipf: Some(avg(&|s| s.ipf)),
            ipv: Some(avg(&|s| s.ipv)),
            ..Default::default()
        });
    }
    let avg_tests = results.iter().map(|res| res.tests_used as f64).sum::<f64>() / r;
    rows.push(MetricsRow {
        parameter: "tests".into(),
        avg_tests: Some(avg_tests),
        savings: Some(100.0 * (1.0 - avg_tests / n as f64)),
        ..Default::default()
    });
    ReplicationMetrics {
        rows,
        n_completed: results.len(),
    }
}

/// Writes the table as CSV in row order. Absent cells are left empty.
pub fn metrics_report(m: &ReplicationMetrics) -> String {
    let mut s = METRICS_COLUMNS.join(",");
    s.push('\n');
    for row in &m.rows {
        s.push_str(&row.parameter);
        for c in row.cells() {
            s.push(',');
            if let Some(v) = c {
                let _ = write!(s, "{v}");
            }
        }
        s.push('\n');
    }
    s
}

/// Parses a table written by [`metrics_report`].
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    const FILE: &str = "metrics.csv";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(FILE, 1, e.to_string()))?;
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(Error::parse(FILE, 1, format!("columns must be {}", METRICS_COLUMNS.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(FILE, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut cells = [None; 9];
        for (k, cell) in cells.iter_mut().enumerate() {
            let raw = &rec[k + 1];
            if !raw.is_empty() {
                *cell = Some(
                    raw.parse::<f64>()
                        .map_err(|_| Error::parse(FILE, line, format!("invalid {} '{raw}'", METRICS_COLUMNS[k + 1])))?,
                );
            }
        }
        let [bias, ssd, ese, cp95, ip, ipf, ipv, avg_tests, savings] = cells;
        rows.push(MetricsRow {
            parameter: rec[0].to_string(),
            bias,
            ssd,
            ese,
            cp95,
            ip,
            ipf,
            ipv,
            avg_tests,
            savings,
        });
    }
    Ok(rows)
}
