//! Short replication study for eyeballing the metrics.
//! Usage: scenario_check <DT|AT> <pool size> <reps> <n_iter> <burn_in>

use poolvcm::harness::{metrics_report, run_replications, ModelSet, ScenarioSpec};
use poolvcm::model::{McmcConfig, PriorConfig};

fn main() {
    let a: Vec<String> = std::env::args().skip(1).collect();
    let protocol = a.first().map_or("DT", |s| s.as_str()).parse().unwrap();
    let c = a.get(1).map_or(5, |s| s.parse().unwrap());
    let mut spec = ScenarioSpec::new(ModelSet::M1, 3000, protocol, c);
    spec.reps = a.get(2).map_or(4, |s| s.parse().unwrap());
    let mcmc = McmcConfig {
        n_iter: a.get(3).map_or(4000, |s| s.parse().unwrap()),
        burn_in: a.get(4).map_or(1000, |s| s.parse().unwrap()),
        ..McmcConfig::default()
    };
    let t = std::time::Instant::now();
    let run = run_replications(&spec, &PriorConfig::default(), &mcmc, 1, None, &|art| {
        eprintln!("rep {} done: tests {} {:?}", art.rep, art.result.tests_used, art.result.estimands);
        Ok(())
    })
    .unwrap();
    print!("{}", metrics_report(&run.metrics));
    println!("failures {:?} elapsed {:.0}s", run.failures, t.elapsed().as_secs_f64());
}
