//! Delayed stochastic prox-linear and subgradient methods for weakly convex
//! composite optimization.
//!
//! The crate implements four steppers for objectives of the form
//! `E_xi |c(x, xi)| + ball indicator` — `DSPL` (delayed stochastic
//! prox-linear), `DSEPL` (its Polyak-extrapolated variant), `DSGD` (delayed
//! proximal subgradient) and `DSEGD` — together with everything needed to
//! study them empirically:
//!
//! * [`problem`] — robust phase retrieval and blind deconvolution instances,
//!   their generators and sampling oracles;
//! * [`prox`] — exact closed-form solvers for every proximal subproblem,
//!   including the piecewise-linear Bregman prox;
//! * [`kernel`] — radial polynomial Bregman kernels built from subgradient
//!   growth bounds;
//! * [`algo`] — the steppers and their stepsize schedules;
//! * [`delay`] — truncated delay distributions and the sequential runner
//!   with simulated delays;
//! * [`runtime`] — a real in-process master-worker asynchronous runtime
//!   whose runs are exactly replayable;
//! * [`metrics`] — Moreau-envelope stationarity and ambiguity-aware
//!   recovery distance;
//! * [`record`] — per-run metric records, CSV schema and sweep aggregation;
//! * [`driver`] — the experiment driver behind the `delayprox` binary.
//!
//! The `examples/` directory holds one runnable example per capability;
//! start with `phase_retrieval`.

pub mod algo;
pub mod delay;
pub mod driver;
pub mod error;
pub mod instance_io;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod record;
pub mod runtime;

pub use algo::{AlgoConfig, AlgoState, AlgoVariant, StepsizeSchedule};
pub use delay::{run_simulated, DelayFamily, DelayModel, HistoryBuffer, RunOptions};
pub use error::{Error, Result};
pub use kernel::PolynomialKernel;
pub use metrics::{moreau_stationarity, recovery_distance, CompositeOracle};
pub use problem::{DelayedInfo, InfoPayload, LinearModel, ProblemInstance, ProblemKind};
pub use prox::BallSpec;
pub use record::RunRecord;
pub use runtime::{replay_log, run_async, RuntimeConfig};
