//! Tracking near-stationarity along a run through the Moreau envelope.
//!
//! The squared envelope gradient `rho^2 ||x - prox(x)||^2` is a standard
//! stationarity measure for weakly convex objectives; here it is estimated
//! at snapshots of a DSPL run by solving the proximal subproblem with
//! deterministic full-batch prox-linear iterations.
//!
//! ```bash
//! cargo run --release --example moreau_stationarity
//! ```

use delayprox::algo::{AlgoConfig, AlgoVariant, StepsizeSchedule};
use delayprox::delay::{run_simulated, DelayModel, RunOptions};
use delayprox::metrics::moreau_stationarity;
use delayprox::problem::generate_phase_retrieval;

fn main() {
    let (m, n) = (150, 50);
    let instance = generate_phase_retrieval(m, n, 1.0, 0.0, 5.0, 13).expect("valid parameters");
    let lambda_hat = instance.weak_convexity_modulus();
    let rho = 2.0 * lambda_hat + 1.0;
    println!("weak-convexity estimate {lambda_hat:.1}, envelope parameter rho = {rho:.1}");

    let epochs = [1usize, 5, 20, 80, 320];
    let config = AlgoConfig::new(
        AlgoVariant::Dspl,
        StepsizeSchedule::Experiment { alpha: 1.0 },
        0.0,
        320 * m,
        rho,
    )
    .unwrap();
    let options = RunOptions {
        stop_factor: None,
        snapshot_epochs: epochs.to_vec(),
        ..RunOptions::default()
    };
    let record = run_simulated(&instance, &config, &DelayModel::poisson_from_mean(2.0).unwrap(), 1, &options)
        .expect("run");

    println!("\n  epoch    ||grad envelope||^2    inner movement    inner iters");
    for (epoch, snapshot) in &record.snapshots {
        let est = moreau_stationarity(&instance, snapshot, rho, 200, 1e-9);
        println!(
            "  {:5}    {:.6e}          {:.2e}          {}",
            epoch, est.grad_norm_sq, est.last_movement, est.iterations
        );
    }
}
