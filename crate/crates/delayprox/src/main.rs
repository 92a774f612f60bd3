//! Command-line experiment driver.
//!
//! Thin argument layer over `delayprox::driver`; see the README for the
//! flag-by-flag documentation and the config-file schema.

use clap::{Args, Parser, Subcommand};
use delayprox::algo::AlgoVariant;
use delayprox::delay::DelayModel;
use delayprox::driver::{
    self, load_config, FileConfig, ProblemSource, RunMode, RunSpec, ScheduleKind, SweepSpec,
};
use delayprox::error::{Error, Result};
use delayprox::record::write_csv;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "delayprox", version, about = "Delayed stochastic prox-linear and subgradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance file.
    Generate(GenerateArgs),
    /// Run one configuration and write its metrics CSV.
    Run(RunArgs),
    /// Cartesian sweep over algorithms, delays, stepsizes, momenta, seeds.
    Sweep(SweepArgs),
    /// Measure async update throughput across worker counts.
    BenchAsync(BenchArgs),
    /// Re-aggregate a sweep directory from its raw per-run CSVs.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Instance file to load (overrides the generation flags).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Problem family: pr | bd | hadamard.
    #[arg(long)]
    problem: Option<String>,
    /// Number of measurements.
    #[arg(long)]
    m: Option<usize>,
    /// Signal dimension (per block for bd).
    #[arg(long)]
    n: Option<usize>,
    /// Conditioning of the sensing matrix (>= 1).
    #[arg(long)]
    kappa: Option<f64>,
    /// Fraction of corrupted measurements in [0, 1].
    #[arg(long)]
    pfail: Option<f64>,
    /// Corruption noise standard deviation (pr/bd).
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Seed of the instance generator.
    #[arg(long)]
    instance_seed: Option<u64>,
    /// Signal file for hadamard instances (one real per line).
    #[arg(long)]
    signal: Option<PathBuf>,
}

impl ProblemArgs {
    fn resolve(
        &self,
        file_instance: Option<PathBuf>,
        file: &ProblemArgsDefaults,
    ) -> ProblemSource {
        if let Some(path) = self.instance.clone().or(file_instance) {
            return ProblemSource::File(path);
        }
        let defaults = ProblemSource::default();
        let (d_problem, d_m, d_n, d_kappa, d_pfail, d_sd, d_seed) = match &defaults {
            ProblemSource::Generate {
                problem,
                m,
                n,
                kappa,
                p_fail,
                noise_sd,
                seed,
                ..
            } => (problem.clone(), *m, *n, *kappa, *p_fail, *noise_sd, *seed),
            ProblemSource::File(_) => unreachable!(),
        };
        ProblemSource::Generate {
            problem: self.problem.clone().or(file.problem.clone()).unwrap_or(d_problem),
            m: self.m.or(file.m).unwrap_or(d_m),
            n: self.n.or(file.n).unwrap_or(d_n),
            kappa: self.kappa.or(file.kappa).unwrap_or(d_kappa),
            p_fail: self.pfail.or(file.pfail).unwrap_or(d_pfail),
            noise_sd: self.noise_sd.or(file.noise_sd).unwrap_or(d_sd),
            seed: self.instance_seed.or(file.instance_seed).unwrap_or(d_seed),
            signal: self.signal.clone().or(file.signal.clone()),
        }
    }
}

/// Problem-related keys of a config file, flattened for merging.
#[derive(Default, Clone)]
struct ProblemArgsDefaults {
    problem: Option<String>,
    m: Option<usize>,
    n: Option<usize>,
    kappa: Option<f64>,
    pfail: Option<f64>,
    noise_sd: Option<f64>,
    instance_seed: Option<u64>,
    signal: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output instance file.
    #[arg(long, short = 'o')]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Algorithm: dspl | dsepl | dsgd | dsegd.
    #[arg(long)]
    algo: Option<String>,
    /// Stepsize tuning parameter (gamma = sqrt(K / alpha)).
    #[arg(long)]
    alpha: Option<f64>,
    /// Momentum in [0, 1); only the extrapolated variants accept beta > 0.
    #[arg(long)]
    beta: Option<f64>,
    /// Theory-schedule stepsize gamma = 2 lambda + kappa + sqrt(K)/alpha.
    #[arg(long)]
    theory_schedule: bool,
    /// Override the weak-convexity modulus of the theory schedule.
    #[arg(long)]
    lambda: Option<f64>,
    /// Delay model, family:mean (const:0 | geom:5 | poisson:10).
    #[arg(long)]
    delay: Option<String>,
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon in epochs (K = epochs * m).
    #[arg(long)]
    epochs: Option<usize>,
    /// Exact iteration horizon K (overrides --epochs).
    #[arg(long)]
    iters: Option<usize>,
    /// Execution mode: sim | async.
    #[arg(long)]
    mode: Option<String>,
    /// Worker threads (async mode).
    #[arg(long)]
    workers: Option<usize>,
    /// Message queue capacity (async mode; counts the handoff slot).
    #[arg(long)]
    queue_capacity: Option<usize>,
    /// Artificial per-gradient cost in microseconds (async mode).
    #[arg(long)]
    busy_work_us: Option<u64>,
    /// Early-stop factor on f(x*); see also --no-stop.
    #[arg(long)]
    stop_factor: Option<f64>,
    /// Disable early stopping.
    #[arg(long)]
    no_stop: bool,
    /// Metrics recording stride in iterations (default: once per epoch).
    #[arg(long)]
    stride: Option<usize>,
    /// Estimate the Moreau stationarity of the final iterate.
    #[arg(long)]
    stationarity: bool,
    /// Constrain the blind-deconvolution pair jointly instead of per block.
    #[arg(long)]
    joint_ball: bool,
    /// Ablation: draw a fresh sample at the stale iterate.
    #[arg(long)]
    fresh_sample: bool,
    /// Output CSV path.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<String>>,
    /// Delay family of the sweep: const | geom | poisson.
    #[arg(long)]
    delay_family: Option<String>,
    /// Comma-separated delay means.
    #[arg(long, value_delimiter = ',')]
    delay_means: Option<Vec<f64>>,
    /// Comma-separated stepsize parameters.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Comma-separated momentum values.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    /// Number of seeds (1..=seeds).
    #[arg(long)]
    seeds: Option<u64>,
    /// Horizon in epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Exact iteration horizon K (overrides --epochs).
    #[arg(long)]
    iters: Option<usize>,
    /// Early-stop factor on f(x*).
    #[arg(long)]
    stop_factor: Option<f64>,
    /// Output directory for per-run CSVs and summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated worker counts to benchmark.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers_list: Vec<usize>,
    /// Algorithm to run.
    #[arg(long, default_value = "dspl")]
    algo: String,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Updates applied per worker count.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Artificial per-gradient cost in microseconds.
    #[arg(long, default_value_t = 500)]
    busy_work_us: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Timing sidecar CSV (n_workers, wall_seconds, updates_per_second).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep directory holding raw per-run CSVs.
    #[arg(long)]
    dir: PathBuf,
    /// Where to write the recomputed summary CSV (default: stdout only).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn run_command(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate(args) => {
            let source = args.problem.resolve(None, &ProblemArgsDefaults::default());
            driver::cmd_generate(&source, &args.out)?;
            println!("wrote {}", args.out.display());
            Ok(0)
        }
        Command::Run(args) => {
            let file = match &args.config {
                Some(path) => load_config(path)?,
                None => FileConfig::default(),
            };
            let fr = file.run.unwrap_or_default();
            let problem_defaults = ProblemArgsDefaults {
                problem: fr.problem.clone(),
                m: fr.m,
                n: fr.n,
                kappa: fr.kappa,
                pfail: fr.pfail,
                noise_sd: fr.noise_sd,
                instance_seed: fr.instance_seed,
                signal: fr.signal.clone(),
            };
            let defaults = RunSpec::default();
            let algo = AlgoVariant::parse(
                &args.algo.or(fr.algo).unwrap_or_else(|| defaults.algo.as_str().to_string()),
            )?;
            let mode = match args
                .mode
                .or(fr.mode)
                .unwrap_or_else(|| "sim".to_string())
                .as_str()
            {
                "sim" => RunMode::Sim,
                "async" => RunMode::Async,
                other => return Err(Error::invalid(format!("unknown mode '{other}' (sim|async)"))),
            };
            let stop_factor = if args.no_stop {
                None
            } else {
                Some(args.stop_factor.or(fr.stop_factor).unwrap_or(1.5))
            };
            let spec = RunSpec {
                source: args.problem.resolve(fr.instance.clone(), &problem_defaults),
                algo,
                schedule: if args.theory_schedule {
                    ScheduleKind::Theory { lambda: args.lambda }
                } else {
                    ScheduleKind::Experiment
                },
                alpha: args.alpha.or(fr.alpha).unwrap_or(defaults.alpha),
                beta: args.beta.or(fr.beta).unwrap_or(defaults.beta),
                delay: DelayModel::parse_flag(
                    &args.delay.or(fr.delay).unwrap_or_else(|| "const:0".to_string()),
                )?,
                seed: args.seed.or(fr.seed).unwrap_or(defaults.seed),
                epochs: args.epochs.or(fr.epochs).unwrap_or(defaults.epochs),
                iters: args.iters.or(fr.iters),
                mode,
                workers: args.workers.or(fr.workers).unwrap_or(defaults.workers),
                queue_capacity: args.queue_capacity.or(fr.queue_capacity),
                busy_work_us: args.busy_work_us.or(fr.busy_work_us),
                stop_factor,
                stride: args.stride.or(fr.stride),
                stationarity: args.stationarity,
                joint_ball: args.joint_ball,
                fresh_sample: args.fresh_sample,
            };
            let (record, timing) = driver::run_one(&spec)?;
            let s = &record.summary;
            if s.boundary_hits > 0 {
                eprintln!(
                    "WARNING: {} boundary hits; the ball constraint became active, \
                     closed-form prox exactness is not guaranteed for those steps",
                    s.boundary_hits
                );
            }
            println!(
                "iterations={} stopped_early={} diverged={} objective={:?} recovery={:?}",
                s.iterations_used,
                s.stopped_early,
                s.diverged,
                record.final_objective(),
                record.final_recovery()
            );
            if let Some(v) = s.final_stationarity {
                println!("final_stationarity={v}");
            }
            if let Some(t) = timing {
                println!(
                    "workers={} wall_seconds={:.3} updates_per_second={:.1}",
                    t.n_workers, t.wall_seconds, t.updates_per_second
                );
            }
            if let Some(out) = args.out {
                write_csv(&record, &out)?;
                println!("wrote {}", out.display());
            }
            Ok(0)
        }
        Command::Sweep(args) => {
            let file = match &args.config {
                Some(path) => load_config(path)?,
                None => FileConfig::default(),
            };
            let fs = file.sweep.unwrap_or_default();
            let problem_defaults = ProblemArgsDefaults {
                problem: fs.problem.clone(),
                m: fs.m,
                n: fs.n,
                kappa: fs.kappa,
                pfail: fs.pfail,
                noise_sd: fs.noise_sd,
                instance_seed: fs.instance_seed,
                signal: fs.signal.clone(),
            };
            let defaults = SweepSpec::default();
            let algos = args
                .algos
                .or(fs.algos)
                .map(|names| names.iter().map(|s| AlgoVariant::parse(s)).collect::<Result<Vec<_>>>())
                .transpose()?
                .unwrap_or(defaults.algos);
            let spec = SweepSpec {
                source: args.problem.resolve(fs.instance.clone(), &problem_defaults),
                algos,
                delay_family: args
                    .delay_family
                    .or(fs.delay_family)
                    .unwrap_or(defaults.delay_family),
                delay_means: args.delay_means.or(fs.delay_means).unwrap_or(defaults.delay_means),
                alphas: args.alphas.or(fs.alphas).unwrap_or(defaults.alphas),
                betas: args.betas.or(fs.betas).unwrap_or(defaults.betas),
                seeds: args.seeds.or(fs.seeds).unwrap_or(defaults.seeds),
                epochs: args.epochs.or(fs.epochs).unwrap_or(defaults.epochs),
                iters: args.iters.or(fs.iters),
                stop_factor: Some(args.stop_factor.or(fs.stop_factor).unwrap_or(1.5)),
            };
            let outcome = driver::cmd_sweep(&spec, &args.out_dir)?;
            println!(
                "{} runs, {} diverged; summary at {}",
                outcome.total_runs,
                outcome.diverged_runs,
                args.out_dir.join("summary.csv").display()
            );
            for cell in &outcome.cells {
                println!(
                    "{} tau={} alpha={} beta={}: mean_iters={} diverged={}",
                    cell.algo, cell.tau_mean, cell.alpha, cell.beta, cell.mean_iters, cell.diverged_count
                );
            }
            if outcome.diverged_fraction() > 0.5 {
                eprintln!("more than half of the sweep diverged");
                return Ok(2);
            }
            Ok(0)
        }
        Command::BenchAsync(args) => {
            let source = args.problem.resolve(None, &ProblemArgsDefaults::default());
            let rows = driver::cmd_bench_async(
                &source,
                AlgoVariant::parse(&args.algo)?,
                args.alpha,
                args.beta,
                args.iters,
                &args.workers_list,
                args.busy_work_us,
                args.seed,
            )?;
            println!("n_workers,wall_seconds,updates_per_second");
            for r in &rows {
                println!("{},{:.4},{:.1}", r.n_workers, r.wall_seconds, r.updates_per_second);
            }
            if let Some(out) = args.out {
                driver::write_bench_csv(&rows, &out)?;
                println!("wrote {}", out.display());
            }
            Ok(0)
        }
        Command::Report(args) => {
            let cells = driver::cmd_report(&args.dir)?;
            println!("{}", delayprox::record::SUMMARY_HEADER);
            for c in &cells {
                println!(
                    "{},{},{},{},{},{}",
                    c.algo, c.tau_mean, c.alpha, c.beta, c.mean_iters, c.diverged_count
                );
            }
            if let Some(out) = args.out {
                delayprox::record::write_summary_csv(&cells, &out)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // Exit codes: 0 success, 1 config/usage error, 2 divergence-dominated
    // sweep. Clap's default usage exit code (2) would collide with the last.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run_command(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
