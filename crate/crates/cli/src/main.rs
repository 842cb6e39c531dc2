//! `poolvcm`: simulate group-testing data, fit the model, run replication
//! studies and summarise saved draws.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use poolvcm::harness::{
    aggregate, metrics_report, parse_scenario, run_replications, simulate_rep, truth_csv, RepResult, ScenarioSpec,
};
use poolvcm::io::{self, write_atomic, write_file};
use poolvcm::model::{validate, AgeTransform, FitConfig};
use poolvcm::rng::{stream, Purpose};
use poolvcm::sampler::{run_chain, ChainOutput};
use poolvcm::Error;

use manifest::{Manifest, Status};

#[derive(Parser, Debug)]
#[command(name = "poolvcm", version, about = "Varying-coefficient models for group-testing data")]
struct Cli {
    /// Seed; overrides the seed in the scenario or config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fit configuration (TOML). Defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for replications.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one replication of a scenario: individuals.csv, pools.csv
    /// and truth.csv.
    Simulate {
        scenario: PathBuf,
        /// Replication index to simulate.
        #[arg(long, default_value_t = 0)]
        rep: usize,
    },
    /// Fit the model to a dataset directory.
    Fit { data: PathBuf },
    /// Run a replication study and write metrics.csv.
    Replicate { scenario: PathBuf },
    /// Recompute summaries from a fit's saved draws, or metrics from a
    /// replication directory.
    Summarize { run: PathBuf },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_INTERRUPTED: u8 = 130;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Parse { .. } | Error::Validation(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let c = Arc::clone(&cancel);
        // a second interrupt falls through to the default handler's effect
        let _ = ctrlc::set_handler(move || {
            if c.swap(true, Ordering::SeqCst) {
                std::process::exit(EXIT_INTERRUPTED as i32);
            }
        });
    }
    let result = match &cli.command {
        Command::Simulate { scenario, rep } => cmd_simulate(&cli, scenario, *rep),
        Command::Fit { data } => cmd_fit(&cli, data, &cancel),
        Command::Replicate { scenario } => cmd_replicate(&cli, scenario, &cancel),
        Command::Summarize { run } => cmd_summarize(&cli, run),
    };
    match result {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Incomplete) => {
            eprintln!("interrupted; partial results written to {}", cli.out.display());
            ExitCode::from(EXIT_INTERRUPTED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read_text(path: &Path) -> poolvcm::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> poolvcm::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// The fit configuration and the bytes it was read from (empty for defaults).
fn load_config(cli: &Cli) -> poolvcm::Result<(FitConfig, String)> {
    match &cli.config {
        Some(path) => {
            let text = read_text(path)?;
            Ok((io::parse_fit_config(&text)?, text))
        }
        None => Ok((FitConfig::default(), String::new())),
    }
}

fn load_scenario(cli: &Cli, path: &Path) -> poolvcm::Result<(ScenarioSpec, String)> {
    let text = read_text(path)?;
    let mut spec = parse_scenario(&text)?;
    if let Some(s) = cli.seed {
        spec.base_seed = s;
    }
    Ok((spec, text))
}

fn to_toml<T: serde::Serialize>(v: &T) -> poolvcm::Result<String> {
    toml::to_string(v).map_err(|e| Error::Invalid(format!("serialising configuration: {e}")))
}

fn cmd_simulate(cli: &Cli, scenario: &Path, rep: usize) -> poolvcm::Result<Status> {
    let start = Instant::now();
    let (spec, text) = load_scenario(cli, scenario)?;
    if rep >= spec.reps {
        return Err(Error::Config(format!("rep {rep} is outside 0..{}", spec.reps)));
    }
    create_dir(&cli.out)?;
    let mut m = Manifest::begin("simulate", &text, spec.base_seed);
    m.write(&cli.out)?;
    let sim = simulate_rep(&spec, rep);
    io::write_dataset(&cli.out, &sim.dataset)?;
    write_file(&cli.out.join("truth.csv"), truth_csv(&sim.truth).as_bytes())?;
    write_file(&cli.out.join("scenario.toml"), to_toml(&spec)?.as_bytes())?;
    m.extra.insert("rep".into(), rep.into());
    m.extra.insert("tests_used".into(), sim.tests_used.into());
    m.finish(Status::Complete, start);
    m.write(&cli.out)?;
    Ok(Status::Complete)
}

fn cmd_fit(cli: &Cli, data_dir: &Path, cancel: &AtomicBool) -> poolvcm::Result<Status> {
    let start = Instant::now();
    let (mut cfg, text) = load_config(cli)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    let seed = cfg.seed.unwrap_or(0);
    // only the observed files are read; truth.csv never enters a fit
    let mut data = io::read_dataset(data_dir)?;
    validate(&data).map_err(Error::Validation)?;
    let transform = match (cfg.age_center, cfg.age_scale) {
        (Some(center), Some(scale)) => Some(AgeTransform { center, scale }),
        _ => None,
    };
    if let Some(t) = transform {
        data = data.standardized(t);
    }
    create_dir(&cli.out)?;
    let mut m = Manifest::begin("fit", &text, seed);
    m.extra.insert("data".into(), data_dir.display().to_string().into());
    m.write(&cli.out)?;
    write_file(&cli.out.join("config.toml"), to_toml(&cfg)?.as_bytes())?;

    let mut rng = stream(seed, 0, Purpose::Chain);
    let out = run_chain(&data, &cfg.priors(), &cfg.mcmc(), &mut rng, Some(cancel))?;
    io::write_draws(&cli.out, &out)?;
    write_fit_summaries(&cli.out, &out, transform)?;

    let status = if out.meta.interrupted {
        Status::Incomplete
    } else {
        Status::Complete
    };
    m.timings.insert("chain_seconds".into(), out.meta.seconds);
    m.acceptance = vec![acceptance_entry(&out)];
    m.extra.insert("sweeps_completed".into(), out.meta.sweeps_completed.into());
    m.finish(status, start);
    m.write(&cli.out)?;
    Ok(status)
}

fn acceptance_entry(out: &ChainOutput) -> serde_json::Value {
    out.coef_names
        .iter()
        .zip(&out.meta.phi_acceptance)
        .map(|(n, r)| (format!("phi_{n}"), serde_json::Value::from(*r)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn write_fit_summaries(dir: &Path, out: &ChainOutput, t: Option<AgeTransform>) -> poolvcm::Result<()> {
    match t {
        Some(t) => io::write_summaries(dir, out, &|u| t.inverse(u)),
        None => io::write_summaries(dir, out, &|u| u),
    }
}

fn rep_dir(out: &Path, rep: usize) -> PathBuf {
    out.join(format!("rep_{rep:03}"))
}

fn estimands_csv(r: &RepResult) -> String {
    let mut s = String::from("name,truth,estimate,sd,lo,hi\n");
    for e in &r.estimands {
        s.push_str(&format!("{},{},{},{},{},{}\n", e.name, e.truth, e.estimate, e.sd, e.lo, e.hi));
    }
    s
}

fn cmd_replicate(cli: &Cli, scenario: &Path, cancel: &AtomicBool) -> poolvcm::Result<Status> {
    let start = Instant::now();
    let (spec, scenario_text) = load_scenario(cli, scenario)?;
    let (cfg, config_text) = load_config(cli)?;
    create_dir(&cli.out)?;
    let mut m = Manifest::begin("replicate", &format!("{scenario_text}\n{config_text}"), spec.base_seed);
    m.write(&cli.out)?;
    write_file(&cli.out.join("scenario.toml"), to_toml(&spec)?.as_bytes())?;
    write_file(&cli.out.join("config.toml"), to_toml(&cfg)?.as_bytes())?;

    let out_dir = cli.out.clone();
    let sink = move |art: &poolvcm::harness::RepArtifacts| -> poolvcm::Result<()> {
        let dir = rep_dir(&out_dir, art.rep);
        create_dir(&dir)?;
        io::write_summaries(&dir, art.chain, &|u| u)?;
        write_file(&dir.join("estimands.csv"), estimands_csv(art.result).as_bytes())?;
        let json = serde_json::to_string_pretty(art.result)
            .map_err(|e| Error::Invalid(format!("serialising result: {e}")))?;
        write_file(&dir.join("result.json"), json.as_bytes())
    };
    let run = run_replications(&spec, &cfg.priors(), &cfg.mcmc(), cli.jobs, Some(cancel), &sink)?;
    write_atomic(&cli.out.join("metrics.csv"), metrics_report(&run.metrics).as_bytes())?;

    for (rep, msg) in &run.failures {
        eprintln!("rep {rep} failed: {msg}");
    }
    let status = if run.interrupted.is_empty() {
        Status::Complete
    } else {
        Status::Incomplete
    };
    m.failures = run.failures.len();
    m.acceptance = run
        .results
        .iter()
        .map(|r| serde_json::json!({ "rep": r.rep, "phi": r.phi_acceptance }))
        .collect();
    m.extra.insert("completed".into(), run.results.len().into());
    m.extra.insert("interrupted".into(), run.interrupted.clone().into());
    m.extra.insert(
        "failed".into(),
        run.failures
            .iter()
            .map(|(r, msg)| serde_json::json!({ "rep": r, "error": msg }))
            .collect::<Vec<_>>()
            .into(),
    );
    m.extra.insert("jobs".into(), cli.jobs.into());
    m.finish(status, start);
    m.write(&cli.out)?;
    Ok(status)
}

/// Fit directories are recognised by `draws/`, replication directories by
/// `scenario.toml` plus `rep_*` folders.
fn cmd_summarize(cli: &Cli, run: &Path) -> poolvcm::Result<Status> {
    let start = Instant::now();
    create_dir(&cli.out)?;
    let mut m = Manifest::begin("summarize", "", 0);
    m.extra.insert("run".into(), run.display().to_string().into());
    m.write_as(&cli.out, "summarize-manifest.json")?;
    if run.join("draws").is_dir() {
        let out = io::read_draws(run)?;
        let cfg_path = run.join("config.toml");
        let transform = if cfg_path.is_file() {
            let cfg = io::parse_fit_config(&read_text(&cfg_path)?)?;
            match (cfg.age_center, cfg.age_scale) {
                (Some(center), Some(scale)) => Some(AgeTransform { center, scale }),
                _ => None,
            }
        } else {
            None
        };
        write_fit_summaries(&cli.out, &out, transform)?;
    } else if run.join("scenario.toml").is_file() {
        let spec = parse_scenario(&read_text(&run.join("scenario.toml"))?)?;
        let mut results = Vec::new();
        for rep in 0..spec.reps {
            let path = rep_dir(run, rep).join("result.json");
            if !path.is_file() {
                continue;
            }
            let text = read_text(&path)?;
            let r: RepResult = serde_json::from_str(&text)
                .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))?;
            results.push(r);
        }
        m.extra.insert("completed".into(), results.len().into());
        let metrics = aggregate(&results, spec.n);
        write_atomic(&cli.out.join("metrics.csv"), metrics_report(&metrics).as_bytes())?;
    } else {
        return Err(Error::io(
            run,
            std::io::Error::new(std::io::ErrorKind::NotFound, "neither draws/ nor scenario.toml found"),
        ));
    }
    m.finish(Status::Complete, start);
    // the run directory may be the output directory; keep its manifest
    m.write_as(&cli.out, "summarize-manifest.json")?;
    Ok(Status::Complete)
}
