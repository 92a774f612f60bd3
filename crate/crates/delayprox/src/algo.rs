//! The four delayed steppers and their stepsize schedules.
//!
//! Each stepper consumes one worker message and the current state and emits
//! the next iterate:
//!
//! * `Dspl`  — prox step on the delayed one-sample model,
//! * `Dsepl` — the same with Polyak extrapolation of the proximal center,
//! * `Dsgd`  — projected step along a delayed subgradient,
//! * `Dsegd` — the same with extrapolation.

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, all_finite, dist, sub};
use crate::problem::{DelayedInfo, InfoPayload};
use crate::prox::{prox_affine_abs, prox_sgd_step, BallSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoVariant {
    Dspl,
    Dsepl,
    Dsgd,
    Dsegd,
}

impl AlgoVariant {
    /// Whether the stepper consumes linearized models (as opposed to
    /// subgradients).
    pub fn uses_prox_linear(&self) -> bool {
        matches!(self, AlgoVariant::Dspl | AlgoVariant::Dsepl)
    }

    /// Whether the proximal center is extrapolated.
    pub fn uses_momentum(&self) -> bool {
        matches!(self, AlgoVariant::Dsepl | AlgoVariant::Dsegd)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AlgoVariant::Dspl => "dspl",
            AlgoVariant::Dsepl => "dsepl",
            AlgoVariant::Dsgd => "dsgd",
            AlgoVariant::Dsegd => "dsegd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dspl" => Ok(AlgoVariant::Dspl),
            "dsepl" => Ok(AlgoVariant::Dsepl),
            "dsgd" => Ok(AlgoVariant::Dsgd),
            "dsegd" => Ok(AlgoVariant::Dsegd),
            other => Err(Error::invalid(format!(
                "unknown algorithm '{other}' (expected dspl|dsepl|dsgd|dsegd)"
            ))),
        }
    }
}

/// Stepsize schedule. Both produce a constant stepsize over the run:
///
/// * `Theory`: `gamma = 2 lambda + kappa + sqrt(K) / alpha`,
/// * `Experiment`: `gamma = sqrt(K / alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    Theory { lambda: f64, kappa: f64, alpha: f64 },
    Experiment { alpha: f64 },
}

impl StepsizeSchedule {
    pub fn alpha(&self) -> f64 {
        match *self {
            StepsizeSchedule::Theory { alpha, .. } => alpha,
            StepsizeSchedule::Experiment { alpha } => alpha,
        }
    }
}

/// Configuration of one algorithm run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub variant: AlgoVariant,
    pub schedule: StepsizeSchedule,
    /// Momentum in [0, 1); must be 0 for the non-extrapolated variants.
    pub beta: f64,
    /// Iteration horizon K.
    pub horizon: usize,
    /// Envelope parameter used for stationarity reporting.
    pub rho: f64,
}

impl AlgoConfig {
    pub fn new(
        variant: AlgoVariant,
        schedule: StepsizeSchedule,
        beta: f64,
        horizon: usize,
        rho: f64,
    ) -> Result<Self> {
        if schedule.alpha() <= 0.0 {
            return Err(Error::invalid(format!(
                "stepsize tuning alpha must be positive, got {}",
                schedule.alpha()
            )));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::invalid(format!("momentum beta must lie in [0, 1), got {beta}")));
        }
        if beta != 0.0 && !variant.uses_momentum() {
            return Err(Error::invalid(format!(
                "beta = {beta} conflicts with non-extrapolated variant {}",
                variant.as_str()
            )));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon K must be at least 1".to_string()));
        }
        Ok(AlgoConfig {
            variant,
            schedule,
            beta,
            horizon,
            rho,
        })
    }

    /// Stepsize at iteration `k`. Constant in `k` for both schedules.
    pub fn stepsize(&self, _k: usize) -> f64 {
        let k_total = self.horizon as f64;
        match self.schedule {
            StepsizeSchedule::Theory { lambda, kappa, alpha } => {
                2.0 * lambda + kappa + k_total.sqrt() / alpha
            }
            StepsizeSchedule::Experiment { alpha } => (k_total / alpha).sqrt(),
        }
    }
}

/// Mutable per-run state: current and previous iterates plus the counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoState {
    pub x: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub k: usize,
}

impl AlgoState {
    /// Starts at `x1` with `x0 = x1`.
    pub fn new(x1: Vec<f64>) -> Self {
        AlgoState {
            x_prev: x1.clone(),
            x: x1,
            k: 1,
        }
    }
}

/// Extrapolated center `y = x + beta (x - x_prev)`.
pub fn extrapolate(state: &AlgoState, beta: f64) -> Vec<f64> {
    add_scaled(&state.x, beta, &sub(&state.x, &state.x_prev))
}

/// Outcome of one applied update.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub boundary_hit: bool,
    /// `||x_{k+1} - x_k||`.
    pub step_norm: f64,
}

/// Applies one worker message to the state, advancing `k` by one.
///
/// The proximal center is the extrapolated point for the momentum variants
/// and the current iterate otherwise; the payload must match the variant
/// family. A non-finite next iterate aborts with a divergence diagnostic.
pub fn step(
    config: &AlgoConfig,
    state: &mut AlgoState,
    info: &DelayedInfo,
    ball: &BallSpec,
) -> Result<StepOutcome> {
    let gamma = config.stepsize(state.k);
    let center = if config.variant.uses_momentum() {
        extrapolate(state, config.beta)
    } else {
        state.x.clone()
    };
    let prox_step = match (&info.payload, config.variant.uses_prox_linear()) {
        (InfoPayload::ProxLinear(model), true) => {
            prox_affine_abs(&model.gradient, model.value(&center), &center, gamma, ball)
        }
        (InfoPayload::Subgradient(g), false) => prox_sgd_step(g, &center, gamma, ball),
        (InfoPayload::ProxLinear(_), false) => {
            return Err(Error::InfoVariantMismatch(
                "prox-linear message fed to a subgradient stepper",
            ))
        }
        (InfoPayload::Subgradient(_), true) => {
            return Err(Error::InfoVariantMismatch(
                "subgradient message fed to a prox-linear stepper",
            ))
        }
    };
    if !all_finite(&prox_step.point) {
        return Err(Error::Diverged {
            k: state.k,
            context: format!("{} produced a non-finite iterate", config.variant.as_str()),
        });
    }
    let step_norm = dist(&prox_step.point, &state.x);
    state.x_prev = std::mem::replace(&mut state.x, prox_step.point);
    state.k += 1;
    Ok(StepOutcome {
        boundary_hit: prox_step.boundary_hit,
        step_norm,
    })
}
