//! File formats: dataset CSVs, the flat TOML configuration files, and the
//! draw/summary tables written by a fit. Parsers take `&str` so they can be
//! exercised without touching the filesystem.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, FitConfig, Inclusion};
use crate::protocols::Pool;
use crate::sampler::{ChainMeta, ChainOutput};
use crate::summary::{curve_summary, hpd_interval, inclusion_summary, scalar_summary};

pub const INDIVIDUALS_FILE: &str = "individuals.csv";
pub const POOLS_FILE: &str = "pools.csv";

/// Individual-level columns of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Individuals {
    pub ids: Vec<u64>,
    pub ages: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub covariates: Vec<f64>,
    /// 0-based clinic index.
    pub clinic: Vec<usize>,
    pub n_clinics: usize,
}

/// A pools.csv row before member ids are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPool {
    pub pool_id: u64,
    /// 1-based.
    pub assay_id: usize,
    pub outcome: bool,
    pub members: Vec<u64>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(file, line, e.to_string())
}

fn field<T: std::str::FromStr>(file: &str, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::parse(file, line, format!("invalid {name} '{raw}'")))
}

fn finite(file: &str, line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = field(file, line, name, raw)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(file, line, format!("{name} must be finite, got '{raw}'")))
    }
}

/// Parses `id,age,x1..xp,clinic`.
pub fn parse_individuals(text: &str) -> Result<Individuals> {
    const FILE: &str = INDIVIDUALS_FILE;
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| csv_err(FILE, e))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "age" || cols[cols.len() - 1] != "clinic" {
        return Err(Error::parse(FILE, 1, "header must be id,age,<covariates...>,clinic"));
    }
    let covariate_names: Vec<String> = cols[2..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let p = covariate_names.len();
    let mut out = Individuals {
        ids: Vec::new(),
        ages: Vec::new(),
        covariate_names,
        covariates: Vec::new(),
        clinic: Vec::new(),
        n_clinics: 0,
    };
    let mut seen = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(FILE, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id: u64 = field(FILE, line, "id", &rec[0])?;
        if seen.insert(id, line).is_some() {
            return Err(Error::parse(FILE, line, format!("duplicate id {id}")));
        }
        out.ids.push(id);
        out.ages.push(finite(FILE, line, "age", &rec[1])?);
        for d in 0..p {
            out.covariates.push(finite(FILE, line, &out.covariate_names[d], &rec[2 + d])?);
        }
        let clinic: usize = field(FILE, line, "clinic", &rec[p + 2])?;
        if clinic == 0 {
            return Err(Error::parse(FILE, line, "clinic ids start at 1"));
        }
        out.n_clinics = out.n_clinics.max(clinic);
        out.clinic.push(clinic - 1);
    }
    if out.ids.is_empty() {
        return Err(Error::parse(FILE, 2, "no individuals"));
    }
    Ok(out)
}

/// Parses `pool_id,assay_id,outcome,members` with `;`-separated member ids.
pub fn parse_pools(text: &str) -> Result<Vec<RawPool>> {
    const FILE: &str = POOLS_FILE;
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| csv_err(FILE, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["pool_id", "assay_id", "outcome", "members"] {
        return Err(Error::parse(FILE, 1, "header must be pool_id,assay_id,outcome,members"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(FILE, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let pool_id: u64 = field(FILE, line, "pool_id", &rec[0])?;
        let assay_id: usize = field(FILE, line, "assay_id", &rec[1])?;
        if assay_id == 0 {
            return Err(Error::parse(FILE, line, "assay ids start at 1"));
        }
        let outcome = match &rec[2] {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(FILE, line, format!("outcome must be 0 or 1, got '{other}'"))),
        };
        let members = rec[3]
            .split(';')
            .map(|m| field::<u64>(FILE, line, "member id", m.trim()))
            .collect::<Result<Vec<_>>>()?;
        out.push(RawPool {
            pool_id,
            assay_id,
            outcome,
            members,
        });
    }
    Ok(out)
}

/// Combines parsed files into a dataset. Unknown member ids map past the
/// last individual so validation reports them.
pub fn assemble_dataset(ind: Individuals, raw: Vec<RawPool>) -> Dataset {
    let index: HashMap<u64, usize> = ind.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ind.ids.len();
    let n_assays = raw.iter().map(|p| p.assay_id).max().unwrap_or(1);
    let pools = raw
        .into_iter()
        .map(|p| Pool {
            members: p.members.iter().map(|id| *index.get(id).unwrap_or(&n)).collect(),
            outcome: p.outcome,
            assay: p.assay_id - 1,
        })
        .collect();
    Dataset {
        ids: ind.ids,
        ages: ind.ages,
        covariate_names: ind.covariate_names,
        covariates: ind.covariates,
        clinic: ind.clinic,
        n_clinics: ind.n_clinics,
        pools,
        n_assays,
        age_transform: None,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads `individuals.csv` and `pools.csv` from `dir` (not validated).
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let ind = parse_individuals(&read(&dir.join(INDIVIDUALS_FILE))?)?;
    let pools = parse_pools(&read(&dir.join(POOLS_FILE))?)?;
    Ok(assemble_dataset(ind, pools))
}

pub fn individuals_csv(data: &Dataset) -> String {
    let mut s = String::from("id,age");
    for name in &data.covariate_names {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",clinic\n");
    let ages = data.age_transform.map_or_else(
        || data.ages.clone(),
        |t| data.ages.iter().map(|&u| t.inverse(u)).collect(),
    );
    for i in 0..data.n() {
        let _ = write!(s, "{},{}", data.ids[i], ages[i]);
        for d in 0..data.p() {
            let _ = write!(s, ",{}", data.x(i, d));
        }
        let _ = writeln!(s, ",{}", data.clinic[i] + 1);
    }
    s
}

pub fn pools_csv(data: &Dataset) -> String {
    let mut s = String::from("pool_id,assay_id,outcome,members\n");
    for (j, pool) in data.pools.iter().enumerate() {
        let members: Vec<String> = pool.members.iter().map(|&i| data.ids[i].to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            j + 1,
            pool.assay + 1,
            pool.outcome as u8,
            members.join(";")
        );
    }
    s
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(INDIVIDUALS_FILE), individuals_csv(data).as_bytes())?;
    write_file(&dir.join(POOLS_FILE), pools_csv(data).as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Parses a fit configuration; unknown keys are rejected.
pub fn parse_fit_config(text: &str) -> Result<FitConfig> {
    let cfg: FitConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_fit_config(path: &Path) -> Result<FitConfig> {
    parse_fit_config(&read(path)?)
}

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Parses a rectangular all-numeric CSV table.
pub fn parse_table(name: &str, text: &str) -> Result<Table> {
    let mut rdr = reader(text);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(name, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::parse(name, 1, "empty header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(name, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .map(|v| field::<f64>(name, line, "value", v))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn table_csv(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn inclusion_code(inc: Inclusion) -> f64 {
    match inc {
        Inclusion::Excluded => 0.0,
        Inclusion::Constant => 1.0,
        Inclusion::Varying => 2.0,
    }
}

fn inclusion_from_code(name: &str, line: usize, v: f64) -> Result<Inclusion> {
    match v {
        x if x == 0.0 => Ok(Inclusion::Excluded),
        x if x == 1.0 => Ok(Inclusion::Constant),
        x if x == 2.0 => Ok(Inclusion::Varying),
        _ => Err(Error::parse(name, line, format!("inclusion code must be 0, 1 or 2, got {v}"))),
    }
}

const DRAWS_DIR: &str = "draws";

fn scalar_names(n_assays: usize) -> Vec<String> {
    let mut names = vec!["sigma".to_string()];
    names.extend((1..=n_assays).map(|m| format!("se{m}")));
    names.extend((1..=n_assays).map(|m| format!("sp{m}")));
    names
}

/// Writes retained draws as one wide CSV per monitored quantity.
pub fn write_draws(dir: &Path, out: &ChainOutput) -> Result<()> {
    let dd = dir.join(DRAWS_DIR);
    fs::create_dir_all(&dd).map_err(|e| Error::io(&dd, e))?;
    let nc = out.n_coef();
    let grid_header: Vec<String> = out.grid.iter().map(|g| g.to_string()).collect();
    for d in 0..nc {
        let ng = out.grid.len();
        let rows = (0..out.n_draws).map(|s| out.curves[(s * nc + d) * ng..(s * nc + d + 1) * ng].to_vec());
        let path = dd.join(format!("psi_{}.csv", out.coef_names[d]));
        write_file(&path, table_csv(&grid_header, rows).as_bytes())?;
    }
    fn per_coef(values: &[f64], nc: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        values.chunks_exact(nc).map(<[f64]>::to_vec)
    }
    write_file(&dd.join("alpha.csv"), table_csv(&out.coef_names, per_coef(&out.alpha, nc)).as_bytes())?;
    write_file(&dd.join("tau.csv"), table_csv(&out.coef_names, per_coef(&out.tau, nc)).as_bytes())?;
    write_file(&dd.join("phi.csv"), table_csv(&out.coef_names, per_coef(&out.phi, nc)).as_bytes())?;
    let codes: Vec<f64> = out.inclusion.iter().map(|&i| inclusion_code(i)).collect();
    write_file(&dd.join("inclusion.csv"), table_csv(&out.coef_names, per_coef(&codes, nc)).as_bytes())?;
    let m = out.n_assays;
    let scalars = (0..out.n_draws).map(|s| {
        let mut row = vec![out.sigma[s]];
        row.extend_from_slice(&out.se[s * m..(s + 1) * m]);
        row.extend_from_slice(&out.sp[s * m..(s + 1) * m]);
        row
    });
    write_file(&dd.join("scalars.csv"), table_csv(&scalar_names(m), scalars).as_bytes())
}

/// Reads draws written by [`write_draws`]. Run metadata is not restored.
pub fn read_draws(dir: &Path) -> Result<ChainOutput> {
    let dd = dir.join(DRAWS_DIR);
    let load = |name: &str| -> Result<Table> { parse_table(name, &read(&dd.join(name))?) };
    let alpha = load("alpha.csv")?;
    let coef_names = alpha.header.clone();
    let nc = coef_names.len();
    let n_draws = alpha.rows.len();
    let tau = load("tau.csv")?;
    let phi = load("phi.csv")?;
    let inc = load("inclusion.csv")?;
    let scalars = load("scalars.csv")?;
    for t in [&tau, &phi, &inc] {
        if t.header != coef_names || t.rows.len() != n_draws {
            return Err(Error::Invalid("draw tables disagree in shape".into()));
        }
    }
    let m = (scalars.header.len().saturating_sub(1)) / 2;
    if scalars.header != scalar_names(m) || scalars.rows.len() != n_draws {
        return Err(Error::Invalid("scalars.csv has an unexpected layout".into()));
    }
    let mut grid = Vec::new();
    let mut curves_by_coef = Vec::new();
    for name in &coef_names {
        let fname = format!("psi_{name}.csv");
        let t = load(&fname)?;
        let g: Vec<f64> = t
            .header
            .iter()
            .map(|h| field::<f64>(&fname, 1, "grid age", h))
            .collect::<Result<_>>()?;
        if grid.is_empty() {
            grid = g;
        } else if g != grid {
            return Err(Error::Invalid(format!("{fname}: grid differs from other curves")));
        }
        if t.rows.len() != n_draws {
            return Err(Error::Invalid(format!("{fname}: expected {n_draws} draws")));
        }
        curves_by_coef.push(t.rows);
    }
    let mut curves = Vec::with_capacity(n_draws * nc * grid.len());
    for s in 0..n_draws {
        for c in &curves_by_coef {
            curves.extend_from_slice(&c[s]);
        }
    }
    let inclusion = inc
        .rows
        .iter()
        .enumerate()
        .flat_map(|(s, r)| r.iter().map(move |&v| (s, v)))
        .map(|(s, v)| inclusion_from_code("inclusion.csv", s + 2, v))
        .collect::<Result<Vec<_>>>()?;
    let flat = |t: &Table| t.rows.concat();
    let mut sigma = Vec::new();
    let mut se = Vec::new();
    let mut sp = Vec::new();
    for r in &scalars.rows {
        sigma.push(r[0]);
        se.extend_from_slice(&r[1..1 + m]);
        sp.extend_from_slice(&r[1 + m..1 + 2 * m]);
    }
    Ok(ChainOutput {
        grid,
        coef_names,
        n_assays: m,
        n_draws,
        curves,
        alpha: flat(&alpha),
        inclusion,
        tau: flat(&tau),
        phi: flat(&phi),
        sigma,
        se,
        sp,
        meta: ChainMeta {
            sweeps_completed: 0,
            interrupted: false,
            phi_acceptance: Vec::new(),
            seconds: 0.0,
        },
    })
}

/// Writes `curves.csv`, `inclusion.csv` and `scalars.csv` summaries.
/// `age_map` converts grid ages back to the data scale.
pub fn write_summaries(dir: &Path, out: &ChainOutput, age_map: &dyn Fn(f64) -> f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let nc = out.n_coef();
    let ng = out.grid.len();
    let mut curves = String::from("quantity,age,median,lo,hi\n");
    if out.n_draws >= 2 {
        for d in 0..nc {
            let draws: Vec<Vec<f64>> = (0..out.n_draws)
                .map(|s| out.curves[(s * nc + d) * ng..(s * nc + d + 1) * ng].to_vec())
                .collect();
            let cs = curve_summary(&out.grid, &draws)?;
            for g in 0..ng {
                let _ = writeln!(
                    curves,
                    "psi_{},{},{},{},{}",
                    out.coef_names[d],
                    age_map(out.grid[g]),
                    cs.median[g],
                    cs.band_lo[g],
                    cs.band_hi[g]
                );
            }
        }
    }
    write_file(&dir.join("curves.csv"), curves.as_bytes())?;

    let mut inc = String::from("covariate,IP,IPF,IPV\n");
    if out.n_draws > 0 {
        for d in 1..nc {
            let s = inclusion_summary(&out.inclusion_draws(d));
            let _ = writeln!(inc, "{},{},{},{}", out.coef_names[d], s.ip, s.ipf, s.ipv);
        }
    }
    write_file(&dir.join("inclusion.csv"), inc.as_bytes())?;

    let mut sc = String::from("parameter,mean,median,sd,lo,hi,hpd_lo,hpd_hi\n");
    if out.n_draws >= 2 {
        let mut series: Vec<(String, Vec<f64>)> = vec![("sigma".into(), out.sigma.clone())];
        for m in 0..out.n_assays {
            series.push((format!("se{}", m + 1), out.assay_series(&out.se, m)));
            series.push((format!("sp{}", m + 1), out.assay_series(&out.sp, m)));
        }
        for d in 0..nc {
            series.push((format!("alpha_{}", out.coef_names[d]), out.effective_alpha(d)));
        }
        for (name, s) in series {
            let q = scalar_summary(&s)?;
            let (hl, hh) = if s.len() >= 20 {
                hpd_interval(&s, 0.95)?
            } else {
                (f64::NAN, f64::NAN)
            };
            let _ = writeln!(
                sc,
                "{name},{},{},{},{},{},{},{}",
                q.mean, q.median, q.sd, q.lo, q.hi, hl, hh
            );
        }
    }
    write_file(&dir.join("scalars.csv"), sc.as_bytes())
}
