//! Group-testing protocol simulators: individual testing (IT), Dorfman
//! two-stage testing (DT) and square array testing (AT).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A tested pool. Member indices and the assay id are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub members: Vec<usize>,
    pub outcome: bool,
    pub assay: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssaySpec {
    pub se: f64,
    pub sp: f64,
}

impl AssaySpec {
    pub const PERFECT: AssaySpec = AssaySpec { se: 1.0, sp: 1.0 };

    pub fn is_valid(&self) -> bool {
        self.se > 0.0 && self.se <= 1.0 && self.sp > 0.0 && self.sp <= 1.0
    }

    /// `P(Z = 1 | true status)`
    pub fn positive_prob(&self, truly_positive: bool) -> f64 {
        if truly_positive {
            self.se
        } else {
            1.0 - self.sp
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    It,
    Dt,
    At,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::It => "IT",
            Protocol::Dt => "DT",
            Protocol::At => "AT",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "IT" => Ok(Protocol::It),
            "DT" => Ok(Protocol::Dt),
            "AT" => Ok(Protocol::At),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

/// Assay ids used by the simulators.
pub const MASTER_ASSAY: usize = 0;
pub const INDIVIDUAL_ASSAY: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TestingRecord {
    /// First-stage pools, then retests.
    pub pools: Vec<Pool>,
    pub tests_used: usize,
}

/// First-stage layout. Arrays store their `c x c` members row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Group {
    Pool(Vec<usize>),
    Array { c: usize, members: Vec<usize> },
}

impl Group {
    fn first_stage(&self) -> Vec<Vec<usize>> {
        match self {
            Group::Pool(m) => vec![m.clone()],
            Group::Array { c, members } => {
                let c = *c;
                let rows = (0..c).map(|r| members[r * c..(r + 1) * c].to_vec());
                let cols = (0..c).map(|col| (0..c).map(|r| members[r * c + col]).collect());
                rows.chain(cols).collect()
            }
        }
    }
}

fn check_pool_size(protocol: Protocol, c: usize) {
    if protocol != Protocol::It {
        assert!(c >= 2, "pool size must be at least 2 for {protocol}");
    }
}

fn layout<R: Rng + ?Sized>(protocol: Protocol, n: usize, c: usize, rng: &mut R) -> Vec<Group> {
    check_pool_size(protocol, c);
    let mut order: Vec<usize> = (0..n).collect();
    if protocol != Protocol::It {
        order.shuffle(rng);
    }
    match protocol {
        Protocol::It => order.into_iter().map(|i| Group::Pool(vec![i])).collect(),
        Protocol::Dt => order.chunks(c).map(|ch| Group::Pool(ch.to_vec())).collect(),
        Protocol::At => {
            let full = n / (c * c);
            let mut groups: Vec<Group> = order[..full * c * c]
                .chunks(c * c)
                .map(|ch| Group::Array {
                    c,
                    members: ch.to_vec(),
                })
                .collect();
            groups.extend(order[full * c * c..].chunks(c).map(|ch| Group::Pool(ch.to_vec())));
            groups
        }
    }
}

/// First-stage member sets for `n` individuals.
pub fn assign_pools<R: Rng + ?Sized>(
    protocol: Protocol,
    n: usize,
    c: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    layout(protocol, n, c, rng)
        .iter()
        .flat_map(Group::first_stage)
        .collect()
}

/// Runs the protocol on true statuses `truth` with error-prone assays.
pub fn simulate_testing<R: Rng + ?Sized>(
    truth: &[bool],
    protocol: Protocol,
    c: usize,
    master: AssaySpec,
    individual: AssaySpec,
    rng: &mut R,
) -> TestingRecord {
    let groups = layout(protocol, truth.len(), c, rng);
    let mut first = Vec::new();
    let mut retests = Vec::new();

    let test = |members: Vec<usize>, rng: &mut R| -> Pool {
        let positive = members.iter().any(|&i| truth[i]);
        let (assay, spec) = if members.len() > 1 {
            (MASTER_ASSAY, master)
        } else {
            (INDIVIDUAL_ASSAY, individual)
        };
        let outcome = rng.random::<f64>() < spec.positive_prob(positive);
        Pool {
            members,
            outcome,
            assay,
        }
    };

    for group in &groups {
        match group {
            Group::Pool(members) => {
                let pool = test(members.clone(), rng);
                let retest = pool.outcome && members.len() > 1;
                first.push(pool);
                if retest {
                    retests.extend(members.iter().map(|&i| vec![i]));
                }
            }
            Group::Array { c, members } => {
                let c = *c;
                let stage: Vec<Pool> = group
                    .first_stage()
                    .into_iter()
                    .map(|m| test(m, rng))
                    .collect();
                let outcomes: Vec<bool> = stage.iter().map(|p| p.outcome).collect();
                first.extend(stage);
                retests.extend(array_retests(c, members, &outcomes).into_iter().map(|i| vec![i]));
            }
        }
    }

    let mut pools = first;
    for members in retests {
        let p = test(members, rng);
        pools.push(p);
    }
    TestingRecord {
        tests_used: pools.len(),
        pools,
    }
}

/// Individuals retested after an array's row and column pools. `outcomes`
/// holds the `c` row results followed by the `c` column results.
fn array_retests(c: usize, members: &[usize], outcomes: &[bool]) -> Vec<usize> {
    let pos_rows: Vec<usize> = (0..c).filter(|&r| outcomes[r]).collect();
    let pos_cols: Vec<usize> = (0..c).filter(|&k| outcomes[c + k]).collect();
    let mut out = Vec::new();
    match (pos_rows.is_empty(), pos_cols.is_empty()) {
        (false, false) => {
            for &r in &pos_rows {
                out.extend(pos_cols.iter().map(|&k| members[r * c + k]));
            }
        }
        (false, true) => {
            for &r in &pos_rows {
                out.extend((0..c).map(|k| members[r * c + k]));
            }
        }
        (true, false) => {
            for &k in &pos_cols {
                out.extend((0..c).map(|r| members[r * c + k]));
            }
        }
        (true, true) => {}
    }
    out
}

/// Expected number of DT tests when every individual is positive with
/// probability `p` and `n` is a multiple of `c`.
pub fn expected_tests_dorfman(p: f64, c: usize, n: usize, master: AssaySpec) -> f64 {
    let q = (1.0 - p).powi(c as i32);
    let p_pos = master.se * (1.0 - q) + (1.0 - master.sp) * q;
    (n as f64 / c as f64) * (1.0 + c as f64 * p_pos)
}
