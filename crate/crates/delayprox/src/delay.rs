//! Delay distributions, the iterate history buffer, and the sequential
//! runner with simulated delays.
//!
//! The runner executes the algorithm sequentially, but the model information
//! applied at iteration `k` is computed from the iterate and sample recorded
//! `tau_k` iterations ago, where `tau_k` is drawn from a configurable
//! distribution and truncated at twice its mean.

use crate::algo::{step, AlgoConfig, AlgoState};
use crate::error::{Error, Result};
use crate::metrics::{moreau_stationarity, recovery_distance};
use crate::problem::{initial_point, DelayedInfo, ProblemInstance};
use crate::record::{IterationRow, RunRecord, RunSummary};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use std::time::Instant;

/// Delay distribution family. Geometric is supported on `{0, 1, 2, ...}`
/// (delay 0 means fresh information) with mean `(1 - p) / p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayFamily {
    Constant(u64),
    Geometric { p: f64 },
    Poisson { mean: f64 },
}

/// A delay distribution plus its truncation bound: samples are clamped to
/// twice the (pre-truncation) mean, keeping both moments finite. Constant
/// delays need no truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub family: DelayFamily,
    pub truncation: u64,
}

/// Ceiling with a tiny snap so that float noise in `2 * mean` does not
/// inflate integer-valued truncation bounds.
fn ceil_snapped(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 {
        r as u64
    } else {
        x.ceil() as u64
    }
}

impl DelayModel {
    pub fn new(family: DelayFamily) -> Result<Self> {
        let truncation = match family {
            DelayFamily::Constant(tau) => tau,
            DelayFamily::Geometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::invalid(format!(
                        "geometric parameter must lie in (0, 1], got {p}"
                    )));
                }
                ceil_snapped(2.0 * (1.0 - p) / p)
            }
            DelayFamily::Poisson { mean } => {
                if mean.is_nan() || mean <= 0.0 {
                    return Err(Error::invalid(format!("poisson mean must be positive, got {mean}")));
                }
                ceil_snapped(2.0 * mean)
            }
        };
        Ok(DelayModel { family, truncation })
    }

    pub fn constant(tau: u64) -> Self {
        DelayModel::new(DelayFamily::Constant(tau)).expect("constant delay is always valid")
    }

    /// Geometric delay with the given mean, via `p = 1 / (mean + 1)`.
    pub fn geometric_from_mean(mean: f64) -> Result<Self> {
        if mean < 0.0 {
            return Err(Error::invalid(format!("geometric mean must be >= 0, got {mean}")));
        }
        DelayModel::new(DelayFamily::Geometric { p: 1.0 / (mean + 1.0) })
    }

    /// Poisson delay with the given mean; mean 0 degenerates to constant 0.
    pub fn poisson_from_mean(mean: f64) -> Result<Self> {
        if mean == 0.0 {
            return Ok(DelayModel::constant(0));
        }
        DelayModel::new(DelayFamily::Poisson { mean })
    }

    /// Parses the CLI grammar `family:mean`, e.g. `const:0`, `geom:5`,
    /// `poisson:10`. Mean 0 always degenerates to a constant 0 delay.
    pub fn parse_flag(s: &str) -> Result<Self> {
        let (family, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("delay flag '{s}' is not of the form family:mean")))?;
        let mean: f64 = value
            .parse()
            .map_err(|_| Error::invalid(format!("bad delay mean '{value}'")))?;
        match family {
            "const" => {
                if mean < 0.0 || mean.fract() != 0.0 {
                    return Err(Error::invalid(format!(
                        "constant delay must be a nonnegative integer, got {value}"
                    )));
                }
                Ok(DelayModel::constant(mean as u64))
            }
            "geom" => DelayModel::geometric_from_mean(mean),
            "poisson" => DelayModel::poisson_from_mean(mean),
            other => Err(Error::invalid(format!(
                "unknown delay family '{other}' (expected const|geom|poisson)"
            ))),
        }
    }

    /// Pre-truncation mean of the distribution.
    pub fn mean(&self) -> f64 {
        match self.family {
            DelayFamily::Constant(tau) => tau as f64,
            DelayFamily::Geometric { p } => (1.0 - p) / p,
            DelayFamily::Poisson { mean } => mean,
        }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> u64 {
        let raw = match self.family {
            DelayFamily::Constant(tau) => return tau,
            DelayFamily::Geometric { p } => Geometric::new(p).expect("validated parameter").sample(rng),
            DelayFamily::Poisson { mean } => {
                Poisson::new(mean).expect("validated parameter").sample(rng) as u64
            }
        };
        raw.min(self.truncation)
    }
}

/// Ring buffer of the recent `(iterate, sample)` pairs, indexed by the
/// iteration at which they were current. Capacity is `truncation + 1`, so
/// every reachable delayed index stays available.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    slots: Vec<Option<(usize, Vec<f64>, usize)>>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        HistoryBuffer {
            slots: vec![None; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn push(&mut self, k: usize, iterate: Vec<f64>, sample: usize) {
        let idx = k % self.slots.len();
        self.slots[idx] = Some((k, iterate, sample));
    }

    /// The entry recorded at iteration `k`, if it has not been evicted.
    pub fn get(&self, k: usize) -> Option<(&[f64], usize)> {
        match &self.slots[k % self.slots.len()] {
            Some((stored, iterate, sample)) if *stored == k => Some((iterate, *sample)),
            _ => None,
        }
    }
}

/// Options of a simulated run beyond the algorithm configuration.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stop once the objective falls below `stop_factor * f(x*)`; `None`
    /// disables early stopping.
    pub stop_factor: Option<f64>,
    /// Absolute floor added to the stop threshold so uncorrupted instances
    /// (where `f(x*) = 0`) still terminate.
    pub objective_floor: f64,
    /// Metrics recording stride in iterations; `None` means once per epoch.
    pub stride: Option<usize>,
    /// How often the stop rule is evaluated, in iterations. The objective
    /// costs O(m n), so long runs may prefer a coarser check.
    pub stop_check_stride: usize,
    /// Ablation toggle: draw a fresh sample for the stale iterate instead of
    /// replaying the sample recorded with it.
    pub fresh_sample: bool,
    /// Epochs at which to snapshot the iterate.
    pub snapshot_epochs: Vec<usize>,
    /// Estimate the Moreau stationarity of the final iterate.
    pub final_stationarity: bool,
    /// Treat the blind-deconvolution pair as one jointly constrained vector.
    pub joint_ball: bool,
    /// Abort and mark the run diverged once the objective exceeds this
    /// multiple of its initial value.
    pub divergence_factor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            stop_factor: Some(1.5),
            objective_floor: 1e-12,
            stride: None,
            stop_check_stride: 1,
            fresh_sample: false,
            snapshot_epochs: Vec::new(),
            final_stationarity: false,
            joint_ball: false,
            divergence_factor: 1e6,
        }
    }
}

/// Runs one algorithm configuration sequentially with simulated delays.
///
/// Per iteration `k`: record `(x^k, xi^k)` in the history, draw `tau_k`,
/// rebuild the worker message at the historical pair (clamped to the oldest
/// available iterate), apply one step and record metrics. Stops early when
/// the objective falls below `max(stop_factor * f(x*), objective_floor)`.
pub fn run_simulated(
    instance: &ProblemInstance,
    algo: &AlgoConfig,
    delay: &DelayModel,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    let start = Instant::now();
    let m = instance.num_measurements();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x1 = initial_point(instance, &mut rng);
    let ball = if options.joint_ball {
        instance.joint_ball()
    } else {
        instance.ball()
    };
    let f_star = instance.full_objective(instance.truth());
    let stop_threshold = options
        .stop_factor
        .map(|sf| (sf * f_star).max(options.objective_floor));
    let initial_objective = instance.full_objective(&x1);
    let stride = options.stride.unwrap_or(m).max(1);

    let mut state = AlgoState::new(x1);
    let mut history = HistoryBuffer::new(delay.truncation as usize + 1);
    let mut record = RunRecord {
        delay_counts: vec![0; delay.truncation as usize + 1],
        ..RunRecord::default()
    };
    let mut summary = RunSummary::default();
    #[cfg(debug_assertions)]
    let movement_bound = {
        // Per-step movement bound 2 (L_f + L_omega) / gamma with L_f taken
        // over the ball and L_omega = 0 for the indicator.
        let l_f = match instance.kind() {
            crate::problem::ProblemKind::PhaseRetrieval => {
                instance.weak_convexity_modulus() * instance.radius()
            }
            crate::problem::ProblemKind::BlindDeconvolution => {
                2.0 * instance.weak_convexity_modulus() * instance.radius()
            }
        };
        2.0 * l_f / algo.stepsize(1)
    };

    for k in 1..=algo.horizon {
        let sample = rng.random_range(0..m);
        history.push(k, state.x.clone(), sample);
        let tau = delay.sample(&mut rng) as usize;
        let issued_at = k.saturating_sub(tau).max(1);
        let (base, mut replayed_sample) = {
            let (b, s) = history
                .get(issued_at)
                .expect("history retains the whole truncated-delay window");
            (b.to_vec(), s)
        };
        if options.fresh_sample {
            replayed_sample = rng.random_range(0..m);
        }
        let info = if algo.variant.uses_prox_linear() {
            DelayedInfo::prox_linear(instance, &base, replayed_sample, issued_at)?
        } else {
            DelayedInfo::subgradient(instance, &base, replayed_sample, issued_at)?
        };
        let outcome = match step(algo, &mut state, &info, &ball) {
            Ok(outcome) => outcome,
            Err(Error::Diverged { .. }) => {
                summary.diverged = true;
                break;
            }
            Err(other) => return Err(other),
        };
        #[cfg(debug_assertions)]
        debug_assert!(
            outcome.step_norm <= movement_bound + 1e-9,
            "step {k} moved {} > bound {movement_bound}",
            outcome.step_norm
        );
        summary.iterations_used = k;
        summary.boundary_hits += u64::from(outcome.boundary_hit);
        record.delay_counts[k - issued_at] += 1;

        if !options.snapshot_epochs.is_empty() && k % m == 0 {
            let epoch = k / m;
            if options.snapshot_epochs.contains(&epoch) {
                record.snapshots.push((epoch, state.x.clone()));
            }
        }

        let record_row = k % stride == 0 || k == 1 || k == algo.horizon;
        let check_stop = stop_threshold.is_some() && k % options.stop_check_stride.max(1) == 0;
        let need_objective = check_stop || record_row;
        if need_objective {
            let objective = instance.full_objective(&state.x);
            if record_row {
                record.rows.push(IterationRow {
                    k,
                    objective,
                    recovery: recovery_distance(instance, &state.x),
                    delay: (k - issued_at) as u64,
                    step_norm: outcome.step_norm,
                });
            }
            if initial_objective > 0.0 && objective > options.divergence_factor * initial_objective
            {
                summary.diverged = true;
                break;
            }
            if check_stop {
                if let Some(threshold) = stop_threshold {
                    if objective <= threshold {
                        summary.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }

    // Make sure the last executed iteration is visible in the rows.
    if record.rows.last().map(|r| r.k) != Some(summary.iterations_used)
        && summary.iterations_used > 0
    {
        let objective = instance.full_objective(&state.x);
        record.rows.push(IterationRow {
            k: summary.iterations_used,
            objective,
            recovery: recovery_distance(instance, &state.x),
            delay: 0,
            step_norm: 0.0,
        });
    }
    if options.final_stationarity {
        let est = moreau_stationarity(instance, &state.x, algo.rho, 200, 1e-9);
        summary.final_stationarity = Some(est.grad_norm_sq);
    }
    summary.wall_seconds = start.elapsed().as_secs_f64();
    record.summary = summary;
    record.final_point = state.x;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::{AlgoVariant, StepsizeSchedule};
    use crate::problem::generate_phase_retrieval;

    fn cfg(variant: AlgoVariant, beta: f64, horizon: usize, alpha: f64) -> AlgoConfig {
        AlgoConfig::new(
            variant,
            StepsizeSchedule::Experiment { alpha },
            beta,
            horizon,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn delay_model_truncations() {
        assert_eq!(DelayModel::constant(3).truncation, 3);
        assert_eq!(DelayModel::geometric_from_mean(5.0).unwrap().truncation, 10);
        assert_eq!(DelayModel::poisson_from_mean(5.0).unwrap().truncation, 10);
        assert_eq!(DelayModel::geometric_from_mean(0.2).unwrap().truncation, 1);
        assert!(DelayModel::new(DelayFamily::Geometric { p: 0.0 }).is_err());
        assert!(DelayModel::new(DelayFamily::Poisson { mean: -1.0 }).is_err());
    }

    #[test]
    fn delay_flag_grammar() {
        assert_eq!(DelayModel::parse_flag("const:0").unwrap(), DelayModel::constant(0));
        let geom = DelayModel::parse_flag("geom:5").unwrap();
        assert_eq!(geom.family, DelayFamily::Geometric { p: 1.0 / 6.0 });
        let poisson = DelayModel::parse_flag("poisson:10").unwrap();
        assert_eq!(poisson.family, DelayFamily::Poisson { mean: 10.0 });
        // Mean 0 degenerates to a constant 0 delay for every family.
        assert_eq!(DelayModel::parse_flag("poisson:0").unwrap(), DelayModel::constant(0));
        assert!(DelayModel::parse_flag("uniform:3").is_err());
        assert!(DelayModel::parse_flag("geom").is_err());
    }

    #[test]
    fn constant_delay_sampling_is_exact() {
        let model = DelayModel::constant(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(model.sample(&mut rng), 0);
        }
    }

    #[test]
    fn poisson_samples_respect_truncation() {
        let model = DelayModel::poisson_from_mean(5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20_000 {
            assert!(model.sample(&mut rng) <= 10);
        }
    }

    #[test]
    fn history_buffer_window() {
        let mut buf = HistoryBuffer::new(4);
        for k in 1..=10 {
            buf.push(k, vec![k as f64], k);
        }
        assert!(buf.get(10).is_some());
        assert!(buf.get(7).is_some());
        assert!(buf.get(6).is_none(), "evicted entries must not resolve");
        let (x, s) = buf.get(10).unwrap();
        assert_eq!(x, &[10.0]);
        assert_eq!(s, 10);
    }

    #[test]
    fn same_seed_gives_identical_records() {
        let inst = generate_phase_retrieval(30, 10, 1.0, 0.2, 5.0, 3).unwrap();
        let algo = cfg(AlgoVariant::Dspl, 0.0, 500, 1.0);
        let delay = DelayModel::poisson_from_mean(4.0).unwrap();
        let mut a = run_simulated(&inst, &algo, &delay, 7, &RunOptions::default()).unwrap();
        let mut b = run_simulated(&inst, &algo, &delay, 7, &RunOptions::default()).unwrap();
        a.summary.wall_seconds = 0.0;
        b.summary.wall_seconds = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn effective_index_is_clamped_and_delays_counted() {
        let inst = generate_phase_retrieval(10, 4, 1.0, 0.0, 5.0, 4).unwrap();
        let algo = cfg(AlgoVariant::Dsgd, 0.0, 200, 1.0);
        let delay = DelayModel::constant(6);
        let record = run_simulated(&inst, &algo, &delay, 5, &RunOptions::default()).unwrap();
        let total: u64 = record.delay_counts.iter().sum();
        assert_eq!(total as usize, record.summary.iterations_used);
        // With constant delay 6, early iterations clamp to smaller delays.
        let small: u64 = record.delay_counts[..6].iter().sum();
        assert_eq!(small, 6, "k = 1..=6 clamp to delays 0..=5");
    }

    #[test]
    fn uncorrupted_stop_uses_absolute_floor() {
        let inst = generate_phase_retrieval(20, 4, 1.0, 0.0, 5.0, 8).unwrap();
        let algo = cfg(AlgoVariant::Dspl, 0.0, 200_000, 1.0);
        let record = run_simulated(&inst, &algo, &DelayModel::constant(0), 9, &RunOptions::default())
            .unwrap();
        if record.summary.stopped_early {
            assert!(record.final_objective().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn observed_delay_histogram_matches_distribution() {
        // Chi-squared sanity over 1e5 recorded delays against the truncated
        // Poisson(5) pmf; the handful of early clamped iterations is noise
        // at this sample size.
        let inst = generate_phase_retrieval(4, 2, 1.0, 0.0, 5.0, 14).unwrap();
        let draws = 100_000;
        let algo = cfg(AlgoVariant::Dspl, 0.0, draws, 1.0);
        let delay = DelayModel::poisson_from_mean(5.0).unwrap();
        let options = RunOptions {
            stop_factor: None,
            stride: Some(draws),
            ..RunOptions::default()
        };
        let record = run_simulated(&inst, &algo, &delay, 15, &options).unwrap();
        assert_eq!(record.delay_counts.len(), 11);

        let lambda = 5.0f64;
        let mut pmf = Vec::with_capacity(11);
        let mut pj = (-lambda).exp();
        let mut below = 0.0;
        for j in 0..10 {
            pmf.push(pj);
            below += pj;
            pj *= lambda / (j + 1) as f64;
        }
        pmf.push(1.0 - below); // clamped tail mass at the truncation bound
        let chi_sq: f64 = record
            .delay_counts
            .iter()
            .zip(&pmf)
            .map(|(&observed, &p)| {
                let expected = p * draws as f64;
                (observed as f64 - expected).powi(2) / expected
            })
            .sum();
        // 0.999 quantile of chi-squared with 10 degrees of freedom.
        assert!(chi_sq < 29.588, "chi-squared statistic {chi_sq}");
    }

    #[test]
    fn empirical_truncated_geometric_mean_matches_analytic() {
        let model = DelayModel::geometric_from_mean(4.0).unwrap(); // p = 0.2
        assert_eq!(model.truncation, 8);
        let p = 0.2f64;
        // Clamped mean: sum_{j<8} j p (1-p)^j + 8 P(tau >= 8).
        let mut analytic = 0.0;
        for j in 0..8 {
            analytic += j as f64 * p * (1.0 - p).powi(j);
        }
        analytic += 8.0 * (1.0 - p).powi(8);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 1_000_000;
        let sum: u64 = (0..draws).map(|_| model.sample(&mut rng)).sum();
        let empirical = sum as f64 / draws as f64;
        assert!(
            (empirical - analytic).abs() / analytic < 0.01,
            "empirical {empirical} vs analytic {analytic}"
        );
    }
}
