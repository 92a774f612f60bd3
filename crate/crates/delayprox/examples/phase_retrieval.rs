//! Robust phase retrieval with the prox-linear and subgradient steppers.
//!
//! Generates a synthetic instance, runs DSPL and DSGD without delays and
//! prints how fast each recovers the planted signal.
//!
//! ```bash
//! cargo run --release --example phase_retrieval
//! ```

use delayprox::algo::{AlgoConfig, AlgoVariant, StepsizeSchedule};
use delayprox::delay::{run_simulated, DelayModel, RunOptions};
use delayprox::problem::generate_phase_retrieval;

fn main() {
    let (m, n) = (300, 100);
    let instance = generate_phase_retrieval(m, n, 1.0, 0.0, 5.0, 7).expect("valid parameters");
    println!("instance: m={m}, n={n}, kappa=1, no corruption, radius {}", instance.radius());

    let epochs = 50;
    let options = RunOptions {
        stop_factor: None,
        ..RunOptions::default()
    };
    for variant in [AlgoVariant::Dspl, AlgoVariant::Dsgd] {
        let config = AlgoConfig::new(
            variant,
            StepsizeSchedule::Experiment { alpha: 1.0 },
            0.0,
            epochs * m,
            1.0,
        )
        .unwrap();
        let record = run_simulated(&instance, &config, &DelayModel::constant(0), 1, &options)
            .expect("run completes");
        println!("\n{} (gamma = {:.1}):", variant.as_str(), config.stepsize(1));
        println!("  epoch    objective       recovery");
        for row in record.rows.iter().filter(|r| r.k % (10 * m) == 0 || r.k == 1) {
            println!(
                "  {:5}    {:.5e}    {:.5e}",
                row.k.div_ceil(m),
                row.objective,
                row.recovery
            );
        }
    }
    println!("\nthe prox-linear stepper reaches machine precision; the subgradient");
    println!("stepper stalls at the scale of its own step noise.");
}
