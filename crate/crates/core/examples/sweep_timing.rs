//! Times Gibbs sweeps on one simulated Dorfman replication.
//!
//! cargo run --release -p poolvcm --example sweep_timing -- [n] [sweeps]

use std::time::Instant;

use poolvcm::harness::{simulate_rep, ModelSet, ScenarioSpec};
use poolvcm::model::{init_state, PriorConfig};
use poolvcm::protocols::Protocol;
use poolvcm::rng::{stream, Purpose};
use poolvcm::sampler::Sampler;

fn main() -> poolvcm::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(3000);
    let sweeps = args.get(1).copied().unwrap_or(200);
    let spec = ScenarioSpec::new(ModelSet::M1, n, Protocol::Dt, 5);
    let sim = simulate_rep(&spec, 0);
    let priors = spec.fit_priors(&PriorConfig::default());
    let mut rng = stream(0, 0, Purpose::Chain);
    let mut state = init_state(&sim.dataset, &priors, &mut rng);
    let mut sampler = Sampler::new(&sim.dataset, &priors, &mut state)?;
    let mut acc = [0.0f64; 8];
    let t = Instant::now();
    for _ in 0..sweeps {
        let mut lap = Instant::now();
        let mut tick = |k: usize, lap: &mut Instant| {
            acc[k] += lap.elapsed().as_secs_f64();
            *lap = Instant::now();
        };
        sampler.step1a_update_y_tilde(&mut state, &mut rng);
        tick(0, &mut lap);
        sampler.step1b_update_omega(&mut state, &mut rng);
        tick(1, &mut lap);
        for d in 0..sampler.n_coef() {
            sampler.fill_block_stats(&state, d);
            tick(2, &mut lap);
            sampler.step2a_update_inclusion(&mut state, d, &mut rng)?;
            if d > 0 {
                sampler.step2b_update_theta(&mut state, d, &mut rng);
            }
            tick(3, &mut lap);
            sampler.step3a_update_coefficients(&mut state, d, &mut rng)?;
            sampler.step3b_update_tau(&mut state, d, &mut rng);
            tick(4, &mut lap);
            sampler.step3c_update_phi(&mut state, d, &mut rng)?;
            tick(5, &mut lap);
        }
        sampler.step4_update_random_effects(&mut state, &mut rng);
        sampler.step5_update_assays(&mut state, &mut rng);
        tick(6, &mut lap);
    }
    let per = t.elapsed().as_secs_f64() / sweeps as f64;
    let names = ["y_tilde", "omega", "stats", "inclusion", "coefficients", "phi", "re+assay"];
    for (name, a) in names.iter().zip(acc) {
        println!("  {name:>12} {:.3} ms", a / sweeps as f64 * 1e3);
    }
    println!("n={n} sweeps={sweeps} {:.3} ms/sweep", per * 1e3);
    let inc: Vec<String> = state.coefs.iter().map(|c| format!("{:?}", c.inclusion)).collect();
    println!("inclusion {}", inc.join(" "));
    println!("phi acceptance {:?}", sampler.phi_moves().iter().map(|m| m.rate()).collect::<Vec<_>>());
    Ok(())
}
