use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocols::Pool;

/// Affine map applied to raw ages before fitting: `(age - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeTransform {
    pub center: f64,
    pub scale: f64,
}

impl AgeTransform {
    pub fn forward(&self, age: f64) -> f64 {
        (age - self.center) / self.scale
    }

    pub fn inverse(&self, u: f64) -> f64 {
        u * self.scale + self.center
    }
}

/// Individuals and the pools they were tested in. All indices are 0-based
/// in memory; files use 1-based ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// External individual ids, in row order.
    pub ids: Vec<u64>,
    pub ages: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// `N x p`, row-major.
    pub covariates: Vec<f64>,
    pub clinic: Vec<usize>,
    pub n_clinics: usize,
    pub pools: Vec<Pool>,
    pub n_assays: usize,
    pub age_transform: Option<AgeTransform>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.ages.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    #[inline]
    pub fn x(&self, i: usize, d: usize) -> f64 {
        self.covariates[i * self.p() + d]
    }

    /// Copy with ages mapped through `t`.
    pub fn standardized(&self, t: AgeTransform) -> Dataset {
        let mut out = self.clone();
        out.ages = self.ages.iter().map(|&a| t.forward(a)).collect();
        out.age_transform = Some(t);
        out
    }

    /// Pools touching each individual, as offsets into a flat list.
    pub fn pools_by_individual(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.n();
        let mut counts = vec![0usize; n + 1];
        for pool in &self.pools {
            for &i in &pool.members {
                counts[i + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut flat = vec![0usize; counts[n]];
        for (j, pool) in self.pools.iter().enumerate() {
            for &i in &pool.members {
                flat[fill[i]] = j;
                fill[i] += 1;
            }
        }
        (counts, flat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Shape,
    NonFinite,
    ClinicOutOfRange,
    EmptyPool,
    MemberOutOfRange,
    DuplicateMember,
    AssayOutOfRange,
    Uncovered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// Violations found by [`validate`]; at most `MAX_REPORTED` are kept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub total: usize,
}

const MAX_REPORTED: usize = 20;

impl ValidationReport {
    fn push(&mut self, kind: ViolationKind, message: String) {
        self.total += 1;
        if self.violations.len() < MAX_REPORTED {
            self.violations.push(Violation { kind, message });
        }
    }

    pub fn is_ok(&self) -> bool {
        self.total == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}", v.message)?;
        }
        if self.total > self.violations.len() {
            writeln!(f, "  ... and {} more", self.total - self.violations.len())?;
        }
        Ok(())
    }
}

/// Checks every dataset invariant and reports the first violations.
pub fn validate(data: &Dataset) -> Result<(), ValidationReport> {
    let mut rep = ValidationReport::default();
    let n = data.n();
    let p = data.p();
    if data.ids.len() != n || data.clinic.len() != n || data.covariates.len() != n * p {
        rep.push(
            ViolationKind::Shape,
            format!(
                "inconsistent lengths: {} ages, {} ids, {} clinics, {} covariate values for p = {p}",
                n,
                data.ids.len(),
                data.clinic.len(),
                data.covariates.len()
            ),
        );
        return Err(rep);
    }
    for i in 0..n {
        if !data.ages[i].is_finite() {
            rep.push(ViolationKind::NonFinite, format!("individual {}: age is not finite", data.ids[i]));
        }
        for d in 0..p {
            if !data.x(i, d).is_finite() {
                rep.push(
                    ViolationKind::NonFinite,
                    format!("individual {}: covariate {} is not finite", data.ids[i], data.covariate_names[d]),
                );
            }
        }
        if data.clinic[i] >= data.n_clinics {
            rep.push(
                ViolationKind::ClinicOutOfRange,
                format!("individual {}: clinic {} outside 1..{}", data.ids[i], data.clinic[i] + 1, data.n_clinics),
            );
        }
    }
    let mut covered = vec![false; n];
    let mut seen = vec![usize::MAX; n];
    for (j, pool) in data.pools.iter().enumerate() {
        if pool.members.is_empty() {
            rep.push(ViolationKind::EmptyPool, format!("pool {}: no members", j + 1));
        }
        if pool.assay >= data.n_assays {
            rep.push(
                ViolationKind::AssayOutOfRange,
                format!("pool {}: assay {} outside 1..{}", j + 1, pool.assay + 1, data.n_assays),
            );
        }
        for &i in &pool.members {
            if i >= n {
                rep.push(
                    ViolationKind::MemberOutOfRange,
                    format!("pool {}: member out of range (index {} > N = {n})", j + 1, i + 1),
                );
                continue;
            }
            if seen[i] == j {
                rep.push(
                    ViolationKind::DuplicateMember,
                    format!("pool {}: individual {} listed twice", j + 1, data.ids[i]),
                );
            }
            seen[i] = j;
            covered[i] = true;
        }
    }
    for (i, c) in covered.iter().enumerate() {
        if !c {
            rep.push(
                ViolationKind::Uncovered,
                format!("uncovered individual {} (in no pool)", data.ids[i]),
            );
        }
    }
    if rep.is_ok() {
        Ok(())
    } else {
        Err(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> Dataset {
        Dataset {
            ids: vec![1, 2, 3],
            ages: vec![0.1, -0.2, 0.3],
            covariate_names: vec!["x1".into()],
            covariates: vec![1.0, 0.0, 2.0],
            clinic: vec![0, 1, 0],
            n_clinics: 2,
            pools: vec![
                Pool { members: vec![0, 1, 2], outcome: true, assay: 0 },
                Pool { members: vec![0], outcome: true, assay: 1 },
            ],
            n_assays: 2,
            age_transform: None,
        }
    }

    #[test]
    fn well_formed_passes() {
        assert!(validate(&toy()).is_ok());
    }

    #[test]
    fn member_out_of_range() {
        let mut d = toy();
        d.pools[1].members = vec![3];
        let rep = validate(&d).unwrap_err();
        assert!(rep.violations.iter().any(|v| v.kind == ViolationKind::MemberOutOfRange
            && v.message.contains("member out of range")));
    }

    #[test]
    fn uncovered_individual() {
        let mut d = toy();
        d.pools.remove(0);
        let rep = validate(&d).unwrap_err();
        assert_eq!(rep.total, 2);
        assert!(rep.violations.iter().all(|v| v.kind == ViolationKind::Uncovered));
        assert!(rep.to_string().contains("uncovered individual 2"));
    }

    #[test]
    fn report_is_truncated() {
        let mut d = toy();
        d.pools = (0..30)
            .map(|_| Pool { members: vec![9], outcome: false, assay: 5 })
            .collect();
        let rep = validate(&d).unwrap_err();
        assert_eq!(rep.violations.len(), 20);
        assert!(rep.total > 20);
    }

    #[test]
    fn pool_lookup() {
        let (off, flat) = toy().pools_by_individual();
        assert_eq!(off, vec![0, 2, 3, 4]);
        assert_eq!(&flat[off[0]..off[1]], &[0, 1]);
    }
}
