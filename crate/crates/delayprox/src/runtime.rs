//! In-process asynchronous master-worker execution.
//!
//! Worker threads repeatedly pull the latest parameter snapshot, compute the
//! model information (linearized model or subgradient) at it for a random
//! sample, and send it to the master over a bounded queue. The master is the
//! single writer of the algorithm state: it applies one update per received
//! message, so delays arise naturally from scheduling instead of being
//! simulated. Every applied message is logged, which makes the run exactly
//! replayable through the sequential stepper.

use crate::algo::{step, AlgoConfig, AlgoState};
use crate::error::{Error, Result};
use crate::metrics::recovery_distance;
use crate::problem::{initial_point, DelayedInfo, ProblemInstance};
use crate::prox::BallSpec;
use crate::record::{IterationRow, RunRecord, RunSummary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc::sync_channel;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Configuration of the asynchronous runtime. Workers always pull the
/// latest published parameters before each computation.
#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub n_workers: usize,
    /// Bounded queue capacity, counting the master handoff slot: capacity 1
    /// is a rendezvous queue. Sends block when full (backpressure), messages
    /// are never dropped.
    pub queue_capacity: usize,
    /// Artificial per-gradient cost, emulating the compute/communication
    /// balance of a real deployment.
    pub busy_work: Option<Duration>,
    pub algo: AlgoConfig,
    /// Treat the blind-deconvolution pair as one jointly constrained vector.
    pub joint_ball: bool,
    /// Keep the full iterate trajectory for replay checks.
    pub record_trajectory: bool,
    /// Metrics recording stride in iterations; `None` means once per epoch.
    pub stride: Option<usize>,
}

impl RuntimeConfig {
    pub fn new(n_workers: usize, queue_capacity: usize, algo: AlgoConfig) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::invalid("need at least one worker".to_string()));
        }
        if queue_capacity < n_workers {
            return Err(Error::invalid(format!(
                "queue capacity {queue_capacity} must be at least the worker count {n_workers}"
            )));
        }
        Ok(RuntimeConfig {
            n_workers,
            queue_capacity,
            busy_work: None,
            algo,
            joint_ball: false,
            record_trajectory: false,
            stride: None,
        })
    }

    pub fn with_busy_work(mut self, cost: Duration) -> Self {
        self.busy_work = Some(cost);
        self
    }
}

/// Throughput figures of one asynchronous run.
#[derive(Debug, Clone, Copy)]
pub struct AsyncTiming {
    pub n_workers: usize,
    pub wall_seconds: f64,
    pub updates_per_second: f64,
}

/// Everything produced by an asynchronous run: the usual metrics record,
/// the applied-message log (in application order), and accounting that
/// makes message conservation checkable.
#[derive(Debug)]
pub struct AsyncRunOutput {
    pub record: RunRecord,
    /// Messages in the exact order the master applied them.
    pub log: Vec<DelayedInfo>,
    pub initial_point: Vec<f64>,
    pub final_point: Vec<f64>,
    pub timing: AsyncTiming,
    /// Messages successfully sent by workers.
    pub messages_produced: usize,
    /// Messages left in flight and drained at shutdown.
    pub messages_drained: usize,
    /// Iterates after each applied update, when requested.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

/// Runs `algo.horizon` asynchronous updates and returns the run output.
///
/// The master increments the iteration count once per applied message; each
/// message carries the iteration at which its parameters were fetched, so
/// the observed delay `k - issued_at` is recorded exactly.
pub fn run_async(instance: &ProblemInstance, config: &RuntimeConfig, seed: u64) -> Result<AsyncRunOutput> {
    let algo = &config.algo;
    let m = instance.num_measurements();
    let horizon = algo.horizon;
    let ball = if config.joint_ball {
        instance.joint_ball()
    } else {
        instance.ball()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1 = initial_point(instance, &mut rng);

    let snapshot = Mutex::new((x1.clone(), 1usize));
    let stop = AtomicBool::new(false);
    let produced = AtomicUsize::new(0);
    // Capacity counts the handoff slot, so 1 maps to a rendezvous channel.
    let (tx, rx) = sync_channel::<DelayedInfo>(config.queue_capacity - 1);

    let mut state = AlgoState::new(x1.clone());
    let stride = config.stride.unwrap_or(m).max(1);
    let mut record = RunRecord::default();
    let mut summary = RunSummary::default();
    let mut log: Vec<DelayedInfo> = Vec::with_capacity(horizon);
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut drained = 0usize;
    let mut wall_seconds = 0.0;

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::with_capacity(config.n_workers);
        for worker_id in 0..config.n_workers {
            let tx = tx.clone();
            let snapshot = &snapshot;
            let stop = &stop;
            let produced = &produced;
            let uses_prox_linear = algo.variant.uses_prox_linear();
            let busy = config.busy_work;
            let handle = scope.spawn(move || -> Result<()> {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (worker_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1));
                loop {
                    if stop.load(Ordering::Acquire) {
                        return Ok(());
                    }
                    let (params, issued_at) = {
                        let guard = snapshot.lock().expect("snapshot lock");
                        (guard.0.clone(), guard.1)
                    };
                    let sample = rng.random_range(0..m);
                    let info = if uses_prox_linear {
                        DelayedInfo::prox_linear(instance, &params, sample, issued_at)?
                    } else {
                        DelayedInfo::subgradient(instance, &params, sample, issued_at)?
                    };
                    if let Some(cost) = busy {
                        std::thread::sleep(cost);
                    }
                    if stop.load(Ordering::Acquire) {
                        return Ok(());
                    }
                    if tx.send(info).is_err() {
                        return Ok(());
                    }
                    produced.fetch_add(1, Ordering::AcqRel);
                }
            });
            handles.push(handle);
        }
        drop(tx);

        let start = Instant::now();
        for applied in 1..=horizon {
            let info = rx
                .recv()
                .map_err(|_| Error::WorkerFailure("all workers exited before the horizon".to_string()))?;
            let observed_delay = (state.k - info.issued_at) as u64;
            let outcome = step(algo, &mut state, &info, &ball)?;
            log.push(info);
            if let Some(traj) = trajectory.as_mut() {
                traj.push(state.x.clone());
            }
            {
                let mut guard = snapshot.lock().expect("snapshot lock");
                guard.0.clone_from(&state.x);
                guard.1 = state.k;
            }
            if record.delay_counts.len() <= observed_delay as usize {
                record.delay_counts.resize(observed_delay as usize + 1, 0);
            }
            record.delay_counts[observed_delay as usize] += 1;
            summary.boundary_hits += u64::from(outcome.boundary_hit);
            summary.iterations_used = applied;
            if applied % stride == 0 || applied == 1 || applied == horizon {
                record.rows.push(IterationRow {
                    k: applied,
                    objective: instance.full_objective(&state.x),
                    recovery: recovery_distance(instance, &state.x),
                    delay: observed_delay,
                    step_norm: outcome.step_norm,
                });
            }
        }
        wall_seconds = start.elapsed().as_secs_f64();

        // Shutdown: let blocked senders finish, count what was in flight.
        stop.store(true, Ordering::Release);
        while let Ok(_extra) = rx.recv() {
            drained += 1;
        }
        for handle in handles {
            match handle.join() {
                Ok(result) => result?,
                Err(panic) => {
                    return Err(Error::WorkerFailure(format!("worker panicked: {panic:?}")))
                }
            }
        }
        Ok(())
    })?;

    summary.wall_seconds = wall_seconds;
    record.summary = summary;
    record.final_point = state.x.clone();
    let updates_per_second = if wall_seconds > 0.0 {
        horizon as f64 / wall_seconds
    } else {
        f64::INFINITY
    };
    Ok(AsyncRunOutput {
        record,
        log,
        initial_point: x1,
        final_point: state.x,
        timing: AsyncTiming {
            n_workers: config.n_workers,
            wall_seconds,
            updates_per_second,
        },
        messages_produced: produced.load(Ordering::Acquire),
        messages_drained: drained,
        trajectory,
    })
}

/// Replays an applied-message log through the sequential stepper from the
/// recorded starting point, returning the iterate after every update.
pub fn replay_log(
    algo: &AlgoConfig,
    initial: &[f64],
    log: &[DelayedInfo],
    ball: &BallSpec,
) -> Result<Vec<Vec<f64>>> {
    let mut state = AlgoState::new(initial.to_vec());
    let mut trajectory = Vec::with_capacity(log.len());
    for info in log {
        step(algo, &mut state, info, ball)?;
        trajectory.push(state.x.clone());
    }
    Ok(trajectory)
}
