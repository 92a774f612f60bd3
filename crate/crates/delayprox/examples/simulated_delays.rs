//! Delay robustness: iterations-to-stop as the simulated delay grows.
//!
//! Runs DSPL and DSGD on a corrupted instance under Poisson delays of
//! increasing mean and prints the iteration counts at which each run first
//! satisfies the stopping rule `f <= 1.5 f(truth)`.
//!
//! ```bash
//! cargo run --release --example simulated_delays
//! ```

use delayprox::algo::{AlgoConfig, AlgoVariant, StepsizeSchedule};
use delayprox::delay::{run_simulated, DelayModel, RunOptions};
use delayprox::problem::generate_phase_retrieval;

fn main() {
    let (m, n) = (300, 100);
    // Heavy corruption: 30% of the measurements carry N(0, 25^2) noise.
    let instance = generate_phase_retrieval(m, n, 10.0, 0.3, 25.0, 21).expect("valid parameters");
    let epochs = 4000;
    let seeds = [1u64, 2, 3];
    let options = RunOptions {
        stop_check_stride: 50,
        stride: Some(50 * m),
        ..RunOptions::default()
    };

    println!("stop rule: objective <= 1.5 f(truth) = {:.3}", 1.5 * instance.full_objective(instance.truth()));
    println!(
        "\n  algo   delay mean   iterations to stop, mean of {} seeds (censored at {})",
        seeds.len(),
        epochs * m
    );
    for variant in [AlgoVariant::Dspl, AlgoVariant::Dsgd] {
        for mean in [0.0, 5.0, 10.0, 20.0] {
            let config = AlgoConfig::new(
                variant,
                StepsizeSchedule::Experiment { alpha: 5.0 },
                0.0,
                epochs * m,
                1.0,
            )
            .unwrap();
            let delay = DelayModel::poisson_from_mean(mean).unwrap();
            let mut total = 0usize;
            let mut censored = 0usize;
            for &seed in &seeds {
                let record = run_simulated(&instance, &config, &delay, seed, &options).expect("run");
                total += record.summary.iterations_used;
                censored += usize::from(!record.summary.stopped_early);
            }
            println!(
                "  {:>5}   {:10}   {:9.0}{}",
                variant.as_str(),
                mean,
                total as f64 / seeds.len() as f64,
                if censored > 0 {
                    format!("  ({censored} run(s) never stopped)")
                } else {
                    String::new()
                }
            );
        }
    }
    println!("\nhitting times are noisy, but delays keep the prox-linear method within");
    println!("the same order of magnitude while the subgradient method stops reaching");
    println!("the criterion at all once its information grows stale.");
}
