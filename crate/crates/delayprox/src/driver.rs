//! Experiment driver: materializing instances, single runs (simulated or
//! asynchronous), delay/stepsize sweeps, async throughput benchmarks and
//! sweep-report aggregation.
//!
//! The CLI binary is a thin argument parser over the functions here, so
//! everything a subcommand does is available programmatically as well.

use crate::algo::{AlgoConfig, AlgoVariant, StepsizeSchedule};
use crate::delay::{run_simulated, DelayModel, RunOptions};
use crate::error::{Error, Result};
use crate::instance_io::{load_instance, load_signal, save_instance};
use crate::problem::{
    generate_blind_deconvolution, generate_hadamard_instance, generate_phase_retrieval,
    ProblemInstance, DEFAULT_NOISE_SD,
};
use crate::record::{summarize_cell, write_csv, write_summary_csv, RunRecord, SummaryCell};
use crate::runtime::{run_async, AsyncTiming, RuntimeConfig};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Where a run's instance comes from: an instance file, or inline
/// generation with the given parameters.
#[derive(Debug, Clone)]
pub enum ProblemSource {
    File(PathBuf),
    Generate {
        problem: String,
        m: usize,
        n: usize,
        kappa: f64,
        p_fail: f64,
        noise_sd: f64,
        seed: u64,
        signal: Option<PathBuf>,
    },
}

impl Default for ProblemSource {
    fn default() -> Self {
        ProblemSource::Generate {
            problem: "pr".to_string(),
            m: 300,
            n: 100,
            kappa: 1.0,
            p_fail: 0.2,
            noise_sd: DEFAULT_NOISE_SD,
            seed: 0,
            signal: None,
        }
    }
}

pub fn materialize_problem(source: &ProblemSource) -> Result<ProblemInstance> {
    match source {
        ProblemSource::File(path) => load_instance(path),
        ProblemSource::Generate {
            problem,
            m,
            n,
            kappa,
            p_fail,
            noise_sd,
            seed,
            signal,
        } => match problem.as_str() {
            "pr" => generate_phase_retrieval(*m, *n, *kappa, *p_fail, *noise_sd, *seed),
            "bd" => generate_blind_deconvolution(*m, *n, *kappa, *p_fail, *seed),
            "hadamard" => {
                let path = signal.as_ref().ok_or_else(|| {
                    Error::invalid("--problem hadamard requires --signal <file>".to_string())
                })?;
                generate_hadamard_instance(&load_signal(path)?, *p_fail, *seed)
            }
            other => Err(Error::invalid(format!(
                "unknown problem '{other}' (expected pr|bd|hadamard)"
            ))),
        },
    }
}

/// Which stepsize schedule a run uses. The theory schedule derives its
/// weak-convexity modulus from the instance rows unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Experiment,
    Theory { lambda: Option<f64> },
}

/// Builds the algorithm configuration for an instance, defaulting the
/// envelope parameter to `2 lambda_hat + 1`.
pub fn algo_config_for(
    instance: &ProblemInstance,
    variant: AlgoVariant,
    schedule: ScheduleKind,
    alpha: f64,
    beta: f64,
    horizon: usize,
) -> Result<AlgoConfig> {
    let lambda_hat = instance.weak_convexity_modulus();
    let schedule = match schedule {
        ScheduleKind::Experiment => StepsizeSchedule::Experiment { alpha },
        ScheduleKind::Theory { lambda } => StepsizeSchedule::Theory {
            lambda: lambda.unwrap_or(lambda_hat),
            kappa: 0.0,
            alpha,
        },
    };
    AlgoConfig::new(variant, schedule, beta, horizon, 2.0 * lambda_hat + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Sim,
    Async,
}

/// Fully resolved parameters of one `run` invocation.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub source: ProblemSource,
    pub algo: AlgoVariant,
    pub schedule: ScheduleKind,
    pub alpha: f64,
    pub beta: f64,
    pub delay: DelayModel,
    pub seed: u64,
    /// Horizon in epochs (iterations = epochs * m) unless `iters` overrides.
    pub epochs: usize,
    pub iters: Option<usize>,
    pub mode: RunMode,
    pub workers: usize,
    pub queue_capacity: Option<usize>,
    pub busy_work_us: Option<u64>,
    pub stop_factor: Option<f64>,
    pub stride: Option<usize>,
    pub stationarity: bool,
    pub joint_ball: bool,
    pub fresh_sample: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            source: ProblemSource::default(),
            algo: AlgoVariant::Dspl,
            schedule: ScheduleKind::Experiment,
            alpha: 1.0,
            beta: 0.0,
            delay: DelayModel::constant(0),
            seed: 1,
            epochs: 400,
            iters: None,
            mode: RunMode::Sim,
            workers: 4,
            queue_capacity: None,
            busy_work_us: None,
            stop_factor: Some(1.5),
            stride: None,
            stationarity: false,
            joint_ball: false,
            fresh_sample: false,
        }
    }
}

impl RunSpec {
    pub fn horizon(&self, m: usize) -> usize {
        self.iters.unwrap_or(self.epochs * m)
    }
}

/// Executes one configuration and returns its record (plus async timing in
/// async mode).
pub fn run_one(spec: &RunSpec) -> Result<(RunRecord, Option<AsyncTiming>)> {
    let instance = materialize_problem(&spec.source)?;
    let horizon = spec.horizon(instance.num_measurements());
    let algo = algo_config_for(&instance, spec.algo, spec.schedule, spec.alpha, spec.beta, horizon)?;
    match spec.mode {
        RunMode::Sim => {
            let options = RunOptions {
                stop_factor: spec.stop_factor,
                stride: spec.stride,
                fresh_sample: spec.fresh_sample,
                final_stationarity: spec.stationarity,
                joint_ball: spec.joint_ball,
                ..RunOptions::default()
            };
            let record = run_simulated(&instance, &algo, &spec.delay, spec.seed, &options)?;
            Ok((record, None))
        }
        RunMode::Async => {
            let mut config = RuntimeConfig::new(
                spec.workers,
                spec.queue_capacity.unwrap_or(2 * spec.workers),
                algo,
            )?;
            config.joint_ball = spec.joint_ball;
            config.stride = spec.stride;
            if let Some(us) = spec.busy_work_us {
                config.busy_work = Some(Duration::from_micros(us));
            }
            let out = run_async(&instance, &config, spec.seed)?;
            Ok((out.record, Some(out.timing)))
        }
    }
}

/// Cartesian sweep over algorithms, delay means, stepsizes, momenta and
/// seeds, as in the delay-robustness figures.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub source: ProblemSource,
    pub algos: Vec<AlgoVariant>,
    /// Delay family of the sweep (`const`, `geom` or `poisson`).
    pub delay_family: String,
    pub delay_means: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds: u64,
    pub epochs: usize,
    pub iters: Option<usize>,
    pub stop_factor: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            source: ProblemSource::default(),
            algos: vec![AlgoVariant::Dspl, AlgoVariant::Dsgd],
            delay_family: "poisson".to_string(),
            delay_means: vec![0.0, 5.0, 10.0],
            alphas: vec![1.0],
            betas: vec![0.0],
            seeds: 20,
            epochs: 400,
            iters: None,
            stop_factor: Some(1.5),
        }
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: Vec<SummaryCell>,
    pub total_runs: usize,
    pub diverged_runs: usize,
}

impl SweepOutcome {
    pub fn diverged_fraction(&self) -> f64 {
        if self.total_runs == 0 {
            0.0
        } else {
            self.diverged_runs as f64 / self.total_runs as f64
        }
    }
}

fn delay_for(family: &str, mean: f64) -> Result<DelayModel> {
    DelayModel::parse_flag(&format!("{family}:{mean}"))
}

fn run_file_name(algo: AlgoVariant, family: &str, mean: f64, alpha: f64, beta: f64, seed: u64) -> String {
    format!("{}_{}{}_a{}_b{}_s{}.csv", algo.as_str(), family, mean, alpha, beta, seed)
}

/// Sweep cell key `(algo, tau_mean, alpha, beta)`, stringly keyed so cells
/// group stably across float formatting.
type CellKey = (String, String, String, String);
type CellRuns = BTreeMap<CellKey, Vec<(usize, bool)>>;

/// Runs the sweep, writing one CSV per run into `out_dir` plus a
/// `summary.csv`, and returns the aggregated cells. Configurations run in
/// parallel; each one is independent with its own seed and output file.
pub fn cmd_sweep(spec: &SweepSpec, out_dir: &Path) -> Result<SweepOutcome> {
    if spec.algos.is_empty()
        || spec.delay_means.is_empty()
        || spec.alphas.is_empty()
        || spec.betas.is_empty()
        || spec.seeds == 0
    {
        return Err(Error::invalid("sweep grid is empty".to_string()));
    }
    std::fs::create_dir_all(out_dir)?;
    let instance = materialize_problem(&spec.source)?;
    let m = instance.num_measurements();
    let horizon = spec.iters.unwrap_or(spec.epochs * m);

    let mut grid = Vec::new();
    for &algo in &spec.algos {
        for &mean in &spec.delay_means {
            for &alpha in &spec.alphas {
                for &beta in &spec.betas {
                    for seed in 1..=spec.seeds {
                        grid.push((algo, mean, alpha, beta, seed));
                    }
                }
            }
        }
    }

    let results: Result<Vec<_>> = grid
        .par_iter()
        .map(|&(algo, mean, alpha, beta, seed)| {
            let delay = delay_for(&spec.delay_family, mean)?;
            let effective_beta = if algo.uses_momentum() { beta } else { 0.0 };
            let config =
                algo_config_for(&instance, algo, ScheduleKind::Experiment, alpha, effective_beta, horizon)?;
            let options = RunOptions {
                stop_factor: spec.stop_factor,
                ..RunOptions::default()
            };
            let record = run_simulated(&instance, &config, &delay, seed, &options)?;
            let name = run_file_name(algo, &spec.delay_family, mean, alpha, beta, seed);
            write_csv(&record, &out_dir.join(name))?;
            Ok((
                (algo.as_str().to_string(), mean, alpha, beta),
                record.summary.iterations_used,
                record.summary.diverged,
            ))
        })
        .collect();
    let results = results?;

    let mut by_cell: CellRuns = BTreeMap::new();
    for ((algo, mean, alpha, beta), iters, diverged) in &results {
        by_cell
            .entry((
                algo.clone(),
                mean.to_string(),
                alpha.to_string(),
                beta.to_string(),
            ))
            .or_default()
            .push((*iters, *diverged));
    }
    let cells: Vec<SummaryCell> = by_cell
        .iter()
        .map(|((algo, mean, alpha, beta), runs)| {
            summarize_cell(
                algo,
                mean.parse().unwrap(),
                alpha.parse().unwrap(),
                beta.parse().unwrap(),
                runs,
            )
        })
        .collect();
    write_summary_csv(&cells, &out_dir.join("summary.csv"))?;

    let diverged_runs = results.iter().filter(|(_, _, d)| *d).count();
    Ok(SweepOutcome {
        cells,
        total_runs: results.len(),
        diverged_runs,
    })
}

/// Re-aggregates a sweep directory from its raw per-run CSVs.
pub fn cmd_report(dir: &Path) -> Result<Vec<SummaryCell>> {
    let mut by_cell: CellRuns = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|e| e == "csv").unwrap_or(false)
                && p.file_name().map(|f| f != "summary.csv").unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::invalid(format!("no run CSVs found in {}", dir.display())));
    }
    for path in entries {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::MalformedRecord("bad file name".to_string()))?
            .to_string();
        // {algo}_{family}{mean}_a{alpha}_b{beta}_s{seed}
        let parts: Vec<&str> = stem.split('_').collect();
        if parts.len() != 5 {
            continue; // foreign file, skip
        }
        let algo = parts[0].to_string();
        let mean = parts[1].trim_start_matches(|c: char| c.is_ascii_alphabetic());
        let alpha = parts[2].trim_start_matches('a');
        let beta = parts[3].trim_start_matches('b');
        let parsed = crate::record::read_csv(&path)?;
        let iters = parsed.iterations_used.ok_or_else(|| {
            Error::MalformedRecord(format!("{}: missing summary line", path.display()))
        })?;
        by_cell
            .entry((algo, mean.to_string(), alpha.to_string(), beta.to_string()))
            .or_default()
            .push((iters, parsed.diverged));
    }
    Ok(by_cell
        .iter()
        .map(|((algo, mean, alpha, beta), runs)| {
            summarize_cell(
                algo,
                mean.parse().unwrap_or(f64::NAN),
                alpha.parse().unwrap_or(f64::NAN),
                beta.parse().unwrap_or(f64::NAN),
                runs,
            )
        })
        .collect())
}

/// One row of the async benchmark sidecar.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n_workers: usize,
    pub wall_seconds: f64,
    pub updates_per_second: f64,
}

/// Measures update throughput for each worker count, with the same
/// artificial per-gradient cost.
#[allow(clippy::too_many_arguments)]
pub fn cmd_bench_async(
    source: &ProblemSource,
    algo: AlgoVariant,
    alpha: f64,
    beta: f64,
    iters: usize,
    workers_list: &[usize],
    busy_work_us: u64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let instance = materialize_problem(source)?;
    let mut rows = Vec::new();
    for &workers in workers_list {
        let config = algo_config_for(&instance, algo, ScheduleKind::Experiment, alpha, beta, iters)?;
        let runtime = RuntimeConfig::new(workers, 2 * workers, config)?
            .with_busy_work(Duration::from_micros(busy_work_us));
        let out = run_async(&instance, &runtime, seed)?;
        rows.push(BenchRow {
            n_workers: workers,
            wall_seconds: out.timing.wall_seconds,
            updates_per_second: out.timing.updates_per_second,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut out = String::from("n_workers,wall_seconds,updates_per_second\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.n_workers, r.wall_seconds, r.updates_per_second));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes an instance produced by the `generate` subcommand.
pub fn cmd_generate(source: &ProblemSource, out: &Path) -> Result<()> {
    let instance = materialize_problem(source)?;
    save_instance(&instance, out)
}

/// Structured config file: every key mirrors a CLI flag of the same name;
/// explicit flags take precedence over file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub run: Option<RunFileConfig>,
    pub sweep: Option<SweepFileConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFileConfig {
    pub instance: Option<PathBuf>,
    pub problem: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub pfail: Option<f64>,
    pub noise_sd: Option<f64>,
    pub instance_seed: Option<u64>,
    pub signal: Option<PathBuf>,
    pub algo: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delay: Option<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub iters: Option<usize>,
    pub mode: Option<String>,
    pub workers: Option<usize>,
    pub queue_capacity: Option<usize>,
    pub busy_work_us: Option<u64>,
    pub stop_factor: Option<f64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub instance: Option<PathBuf>,
    pub problem: Option<String>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub pfail: Option<f64>,
    pub noise_sd: Option<f64>,
    pub instance_seed: Option<u64>,
    pub signal: Option<PathBuf>,
    pub algos: Option<Vec<String>>,
    pub delay_family: Option<String>,
    pub delay_means: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub seeds: Option<u64>,
    pub epochs: Option<usize>,
    pub iters: Option<usize>,
    pub stop_factor: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let content = std::fs::read_to_string(path)?;
    toml::from_str(&content).map_err(|e| Error::invalid(format!("bad config file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_source() -> ProblemSource {
        ProblemSource::Generate {
            problem: "pr".to_string(),
            m: 20,
            n: 5,
            kappa: 1.0,
            p_fail: 0.2,
            noise_sd: 5.0,
            seed: 3,
            signal: None,
        }
    }

    #[test]
    fn run_one_smoke_sim_and_async() {
        let mut spec = RunSpec {
            source: tiny_source(),
            iters: Some(200),
            delay: DelayModel::poisson_from_mean(3.0).unwrap(),
            ..RunSpec::default()
        };
        let (record, timing) = run_one(&spec).unwrap();
        assert!(record.summary.iterations_used <= 200);
        assert!(timing.is_none());

        spec.mode = RunMode::Async;
        spec.workers = 2;
        let (record, timing) = run_one(&spec).unwrap();
        assert_eq!(record.summary.iterations_used, 200);
        assert!(timing.is_some());
    }

    #[test]
    fn sweep_writes_runs_and_summary() {
        let dir = tempdir().unwrap();
        let spec = SweepSpec {
            source: tiny_source(),
            algos: vec![AlgoVariant::Dspl, AlgoVariant::Dsgd],
            delay_means: vec![0.0, 2.0, 4.0],
            alphas: vec![1.0],
            betas: vec![0.0],
            seeds: 2,
            iters: Some(300),
            ..SweepSpec::default()
        };
        let outcome = cmd_sweep(&spec, dir.path()).unwrap();
        assert_eq!(outcome.total_runs, 12);
        assert_eq!(outcome.cells.len(), 6);
        assert!(dir.path().join("summary.csv").exists());

        // Report recomputes the same cells from the raw CSVs.
        let reported = cmd_report(dir.path()).unwrap();
        assert_eq!(reported.len(), outcome.cells.len());
        for (a, b) in outcome.cells.iter().zip(&reported) {
            assert_eq!(a.algo, b.algo);
            assert_eq!(a.mean_iters, b.mean_iters);
            assert_eq!(a.diverged_count, b.diverged_count);
        }
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        let dir = tempdir().unwrap();
        let spec = SweepSpec {
            algos: vec![],
            ..SweepSpec::default()
        };
        assert!(cmd_sweep(&spec, dir.path()).is_err());
    }

    #[test]
    fn generate_then_load_round_trip() {
        let dir = tempdir().unwrap();
        let out = dir.path().join("inst.txt");
        cmd_generate(&tiny_source(), &out).unwrap();
        let inst = load_instance(&out).unwrap();
        assert_eq!(inst.num_measurements(), 20);
        assert_eq!(inst.corrupted_count(), 4);
    }

    #[test]
    fn config_file_parses_and_rejects_unknown_keys() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[run]\nalgo = \"dsepl\"\nbeta = 0.3\ndelay = \"geom:5\"\n",
        )
        .unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.run.as_ref().unwrap().algo.as_deref(), Some("dsepl"));
        std::fs::write(&path, "[run]\nnot_a_flag = 1\n").unwrap();
        assert!(load_config(&path).is_err());
    }
}
