//! The real asynchronous runtime: worker threads compute linearized models
//! at parameter snapshots while the master applies them as they arrive.
//!
//! Prints throughput for several worker counts (with an artificial
//! per-gradient cost emulating compute/communication latency) and verifies
//! that replaying the applied-message log through the sequential stepper
//! reproduces the asynchronous trajectory bit for bit.
//!
//! ```bash
//! cargo run --release --example async_master_worker
//! ```

use delayprox::algo::{AlgoConfig, AlgoVariant, StepsizeSchedule};
use delayprox::problem::generate_phase_retrieval;
use delayprox::runtime::{replay_log, run_async, RuntimeConfig};
use std::time::Duration;

fn main() {
    let instance = generate_phase_retrieval(300, 100, 1.0, 0.0, 5.0, 5).expect("valid parameters");
    let updates = 3000;

    println!("workers   wall [s]   updates/s   mean observed delay");
    for workers in [1, 2, 4, 8] {
        let algo = AlgoConfig::new(
            AlgoVariant::Dspl,
            StepsizeSchedule::Experiment { alpha: 0.5 },
            0.0,
            updates,
            1.0,
        )
        .unwrap();
        let config = RuntimeConfig::new(workers, 2 * workers, algo)
            .unwrap()
            .with_busy_work(Duration::from_micros(300));
        let out = run_async(&instance, &config, 1).expect("async run");
        println!(
            "{:7}   {:8.3}   {:9.0}   {:.2}",
            workers,
            out.timing.wall_seconds,
            out.timing.updates_per_second,
            out.record.observed_mean_delay()
        );
    }

    // Replay check: the master's trajectory is a pure function of the
    // applied-message log.
    let algo = AlgoConfig::new(
        AlgoVariant::Dspl,
        StepsizeSchedule::Experiment { alpha: 0.5 },
        0.0,
        updates,
        1.0,
    )
    .unwrap();
    let mut config = RuntimeConfig::new(4, 8, algo.clone()).unwrap();
    config.record_trajectory = true;
    let out = run_async(&instance, &config, 2).expect("async run");
    let replayed = replay_log(&algo, &out.initial_point, &out.log, &instance.ball()).expect("replay");
    assert_eq!(out.trajectory.as_ref().unwrap(), &replayed);
    println!(
        "\nreplayed {} applied messages: trajectories identical, final recovery {:.3e}",
        out.log.len(),
        out.record.final_recovery().unwrap()
    );
    println!(
        "message conservation: produced {} = applied {} + drained {}",
        out.messages_produced,
        out.record.summary.iterations_used,
        out.messages_drained
    );
}
