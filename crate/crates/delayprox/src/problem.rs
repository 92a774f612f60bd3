//! Problem instances and their sampling oracles.
//!
//! Two composite objectives are supported, both of the form
//! `f(x, i) = |c(x, i)|` averaged over `m` measurements plus a ball
//! indicator:
//!
//! * robust phase retrieval: `c(x, i) = <a_i, x>^2 - b_i`,
//! * blind deconvolution: `c((x, y), i) = <u_i, x> <v_i, y> - b_i`,
//!   with the pair stacked into a single `2n` vector.
//!
//! Instances are immutable after construction and safe to share across
//! threads; all oracles are pure functions of `(instance, point, sample)`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::prox::BallSpec;
use rand::seq::index::sample as index_sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    PhaseRetrieval,
    BlindDeconvolution,
}

impl ProblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::PhaseRetrieval => "pr",
            ProblemKind::BlindDeconvolution => "bd",
        }
    }
}

/// How runs choose their starting point for this instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Unit-normalized standard Gaussian (synthetic data).
    UnitGaussian,
    /// Ground truth plus standard Gaussian noise (loaded signals).
    TruthPlusNoise,
}

impl InitPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitPolicy::UnitGaussian => "unit-gaussian",
            InitPolicy::TruthPlusNoise => "truth-noise",
        }
    }
}

/// Generation parameters, recorded so instance files are self-describing.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorInfo {
    pub name: String,
    pub kappa: f64,
    pub p_fail: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// An immutable problem instance: sensing data, measurements, ground truth,
/// corruption bookkeeping and the ball radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    kind: ProblemKind,
    /// `A` for phase retrieval, `U` for blind deconvolution.
    sensing: Matrix,
    /// `V` for blind deconvolution.
    sensing_v: Option<Matrix>,
    measurements: Vec<f64>,
    /// `x*` (length n) or the stacked pair `(x*, y*)` (length 2n).
    truth: Vec<f64>,
    corruption_mask: Vec<bool>,
    radius: f64,
    init: InitPolicy,
    generator: GeneratorInfo,
}

pub const DEFAULT_NOISE_SD: f64 = 5.0;

fn standard_normal_vec(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_normal_vec(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    let v = standard_normal_vec(rng, n);
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// `A = Q D` with standard-normal `Q` and diagonal `D`, `d_j` uniform in
/// `[1/kappa, 1]`. Entries of `Q` are drawn row-major, then the diagonal.
fn conditioned_gaussian_matrix(rng: &mut impl RngCore, m: usize, n: usize, kappa: f64) -> Matrix {
    let mut a = Matrix::zeros(m, n);
    for i in 0..m {
        let row = a.row_mut(i);
        for entry in row.iter_mut() {
            *entry = rng.sample(StandardNormal);
        }
    }
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(1.0 / kappa..=1.0)).collect();
    for i in 0..m {
        let row = a.row_mut(i);
        for (entry, d) in row.iter_mut().zip(&diag) {
            *entry *= d;
        }
    }
    a
}

fn corruption_indices(rng: &mut impl RngCore, m: usize, p_fail: f64) -> Vec<usize> {
    let count = (p_fail * m as f64).floor() as usize;
    let mut idx = index_sample(rng, m, count).into_vec();
    idx.sort_unstable();
    idx
}

fn check_generator_params(m: usize, n: usize, kappa: f64, p_fail: f64) -> Result<()> {
    if m < n || n == 0 {
        return Err(Error::invalid(format!("need m >= n >= 1, got m={m}, n={n}")));
    }
    if kappa.is_nan() || kappa < 1.0 {
        return Err(Error::invalid(format!("conditioning kappa must be >= 1, got {kappa}")));
    }
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::invalid(format!("p_fail must lie in [0, 1], got {p_fail}")));
    }
    Ok(())
}

/// Synthetic robust phase retrieval: `A = QD`, `x*` standard normal,
/// `b_i = <a_i, x*>^2`, then a random floor(p_fail * m)-subset of the
/// measurements gets `N(0, noise_sd^2)` added.
pub fn generate_phase_retrieval(
    m: usize,
    n: usize,
    kappa: f64,
    p_fail: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    check_generator_params(m, n, kappa, p_fail)?;
    if noise_sd < 0.0 {
        return Err(Error::invalid(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = conditioned_gaussian_matrix(&mut rng, m, n, kappa);
    let truth = standard_normal_vec(&mut rng, n);
    let mut b: Vec<f64> = (0..m)
        .map(|i| {
            let ip = dot(a.row(i), &truth);
            ip * ip
        })
        .collect();
    let mut mask = vec![false; m];
    for i in corruption_indices(&mut rng, m, p_fail) {
        b[i] += noise_sd * rng.sample::<f64, _>(StandardNormal);
        mask[i] = true;
    }
    Ok(ProblemInstance {
        kind: ProblemKind::PhaseRetrieval,
        sensing: a,
        sensing_v: None,
        measurements: b,
        truth,
        corruption_mask: mask,
        // Synthetic runs start from a unit-norm point; radius = 1000 ||x0||.
        radius: 1000.0,
        init: InitPolicy::UnitGaussian,
        generator: GeneratorInfo {
            name: "pr-gaussian".to_string(),
            kappa,
            p_fail,
            noise_sd,
            seed,
        },
    })
}

/// Phase retrieval with a normalized-Hadamard sensing matrix for a loaded
/// signal: `A = [H S_1; H S_2; H S_3]` (`m = 3n`) with random sign diagonals
/// `S_j`, `b_i = <a_i, signal>^2`, and a floor(p_fail * m)-subset of the
/// measurements zeroed out.
pub fn generate_hadamard_instance(
    signal: &[f64],
    p_fail: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("signal length must be a power of two, got {n}")));
    }
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::invalid(format!("p_fail must lie in [0, 1], got {p_fail}")));
    }
    if !signal.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("signal must be finite".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 3 * n;
    let root = (n as f64).sqrt();
    let mut a = Matrix::zeros(m, n);
    for block in 0..3 {
        let signs: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        for i in 0..n {
            let row = a.row_mut(block * n + i);
            for (j, entry) in row.iter_mut().enumerate() {
                // Sylvester Hadamard entry (-1)^popcount(i & j), normalized.
                let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                *entry = sign / root * signs[j];
            }
        }
    }
    let mut b: Vec<f64> = (0..m)
        .map(|i| {
            let ip = dot(a.row(i), signal);
            ip * ip
        })
        .collect();
    let mut mask = vec![false; m];
    for i in corruption_indices(&mut rng, m, p_fail) {
        b[i] = 0.0;
        mask[i] = true;
    }
    let radius = 1000.0 * (norm(signal) + root);
    Ok(ProblemInstance {
        kind: ProblemKind::PhaseRetrieval,
        sensing: a,
        sensing_v: None,
        measurements: b,
        truth: signal.to_vec(),
        corruption_mask: mask,
        radius,
        init: InitPolicy::TruthPlusNoise,
        generator: GeneratorInfo {
            name: "pr-hadamard".to_string(),
            kappa: 1.0,
            p_fail,
            noise_sd: 0.0,
            seed,
        },
    })
}

/// Synthetic blind deconvolution: `U = Q_1 D_1`, `V = Q_2 D_2`, unit-norm
/// true signals, `b_i = <u_i, x*> <v_i, y*>`, corruption as in phase
/// retrieval (additive Gaussian noise on a random subset).
pub fn generate_blind_deconvolution(
    m: usize,
    n: usize,
    kappa: f64,
    p_fail: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    check_generator_params(m, n, kappa, p_fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = conditioned_gaussian_matrix(&mut rng, m, n, kappa);
    let v = conditioned_gaussian_matrix(&mut rng, m, n, kappa);
    let mut truth = unit_normal_vec(&mut rng, n);
    truth.extend(unit_normal_vec(&mut rng, n));
    let mut b: Vec<f64> = (0..m)
        .map(|i| dot(u.row(i), &truth[..n]) * dot(v.row(i), &truth[n..]))
        .collect();
    let mut mask = vec![false; m];
    for i in corruption_indices(&mut rng, m, p_fail) {
        b[i] += DEFAULT_NOISE_SD * rng.sample::<f64, _>(StandardNormal);
        mask[i] = true;
    }
    Ok(ProblemInstance {
        kind: ProblemKind::BlindDeconvolution,
        sensing: u,
        sensing_v: Some(v),
        measurements: b,
        truth,
        corruption_mask: mask,
        // Both blocks start unit-norm; radius = 1000 ||(x0, y0)||.
        radius: 1000.0 * 2f64.sqrt(),
        init: InitPolicy::UnitGaussian,
        generator: GeneratorInfo {
            name: "bd-gaussian".to_string(),
            kappa,
            p_fail,
            noise_sd: DEFAULT_NOISE_SD,
            seed,
        },
    })
}

impl ProblemInstance {
    /// Assembles a phase-retrieval instance from raw parts (used by the
    /// file loader and by tests with hand-built data).
    #[allow(clippy::too_many_arguments)]
    pub fn phase_retrieval_from_parts(
        sensing: Matrix,
        measurements: Vec<f64>,
        truth: Vec<f64>,
        corruption_mask: Vec<bool>,
        radius: f64,
        init: InitPolicy,
        generator: GeneratorInfo,
    ) -> Result<Self> {
        if measurements.len() != sensing.rows() || truth.len() != sensing.cols() {
            return Err(Error::invalid("dimension mismatch in instance parts".to_string()));
        }
        if corruption_mask.len() != sensing.rows() || radius <= 0.0 {
            return Err(Error::invalid("bad mask length or nonpositive radius".to_string()));
        }
        Ok(ProblemInstance {
            kind: ProblemKind::PhaseRetrieval,
            sensing,
            sensing_v: None,
            measurements,
            truth,
            corruption_mask,
            radius,
            init,
            generator,
        })
    }

    /// Assembles a blind-deconvolution instance from raw parts.
    #[allow(clippy::too_many_arguments)]
    pub fn blind_deconvolution_from_parts(
        sensing_u: Matrix,
        sensing_v: Matrix,
        measurements: Vec<f64>,
        truth: Vec<f64>,
        corruption_mask: Vec<bool>,
        radius: f64,
        init: InitPolicy,
        generator: GeneratorInfo,
    ) -> Result<Self> {
        let (m, n) = (sensing_u.rows(), sensing_u.cols());
        if sensing_v.rows() != m || sensing_v.cols() != n {
            return Err(Error::invalid("U and V must have identical shape".to_string()));
        }
        if measurements.len() != m || truth.len() != 2 * n || corruption_mask.len() != m {
            return Err(Error::invalid("dimension mismatch in instance parts".to_string()));
        }
        if radius <= 0.0 {
            return Err(Error::invalid("nonpositive radius".to_string()));
        }
        Ok(ProblemInstance {
            kind: ProblemKind::BlindDeconvolution,
            sensing: sensing_u,
            sensing_v: Some(sensing_v),
            measurements,
            truth,
            corruption_mask,
            radius,
            init,
            generator,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Number of measurements.
    pub fn num_measurements(&self) -> usize {
        self.measurements.len()
    }

    /// Signal dimension `n` (per block for blind deconvolution).
    pub fn signal_dim(&self) -> usize {
        self.sensing.cols()
    }

    /// Dimension of the optimization variable (`n`, or `2n` for the pair).
    pub fn dim(&self) -> usize {
        match self.kind {
            ProblemKind::PhaseRetrieval => self.sensing.cols(),
            ProblemKind::BlindDeconvolution => 2 * self.sensing.cols(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn init_policy(&self) -> InitPolicy {
        self.init
    }

    pub fn generator(&self) -> &GeneratorInfo {
        &self.generator
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn measurements(&self) -> &[f64] {
        &self.measurements
    }

    pub fn corruption_mask(&self) -> &[bool] {
        &self.corruption_mask
    }

    pub fn corrupted_count(&self) -> usize {
        self.corruption_mask.iter().filter(|&&c| c).count()
    }

    pub fn sensing(&self) -> &Matrix {
        &self.sensing
    }

    pub fn sensing_v(&self) -> Option<&Matrix> {
        self.sensing_v.as_ref()
    }

    /// Default domain constraint: a joint ball for phase retrieval, a
    /// per-block ball for blind deconvolution.
    pub fn ball(&self) -> BallSpec {
        match self.kind {
            ProblemKind::PhaseRetrieval => BallSpec::Joint { radius: self.radius },
            ProblemKind::BlindDeconvolution => BallSpec::PerBlock {
                radius: self.radius,
                split: self.sensing.cols(),
            },
        }
    }

    /// Ball over the concatenated vector, for callers preferring the joint
    /// convention for blind deconvolution.
    pub fn joint_ball(&self) -> BallSpec {
        BallSpec::Joint { radius: self.radius }
    }

    /// Estimated weak-convexity modulus of the one-sample losses: the outer
    /// absolute value is 1-Lipschitz and the inner curvature is bounded by
    /// `2 ||a_i||^2` (phase retrieval) or `||u_i|| ||v_i||` (bilinear),
    /// maximized over the rows. Callers may override.
    pub fn weak_convexity_modulus(&self) -> f64 {
        let m = self.measurements.len();
        match self.kind {
            ProblemKind::PhaseRetrieval => (0..m)
                .map(|i| {
                    let a = self.sensing.row(i);
                    2.0 * dot(a, a)
                })
                .fold(0.0f64, f64::max),
            ProblemKind::BlindDeconvolution => {
                let v = self.sensing_v.as_ref().unwrap();
                (0..m)
                    .map(|i| norm(self.sensing.row(i)) * norm(v.row(i)))
                    .fold(0.0f64, f64::max)
            }
        }
    }

    fn check_sample(&self, sample: usize) -> Result<()> {
        if sample >= self.measurements.len() {
            return Err(Error::SampleOutOfRange {
                index: sample,
                m: self.measurements.len(),
            });
        }
        Ok(())
    }

    /// Inner function value and gradient `(c(point, i), grad c(point, i))`.
    pub fn inner_eval(&self, point: &[f64], sample: usize) -> Result<(f64, Vec<f64>)> {
        self.check_sample(sample)?;
        match self.kind {
            ProblemKind::PhaseRetrieval => {
                let a = self.sensing.row(sample);
                let ip = dot(a, point);
                let c = ip * ip - self.measurements[sample];
                let grad = a.iter().map(|&ai| 2.0 * ip * ai).collect();
                Ok((c, grad))
            }
            ProblemKind::BlindDeconvolution => {
                let n = self.sensing.cols();
                let u = self.sensing.row(sample);
                let v = self.sensing_v.as_ref().unwrap().row(sample);
                let (x, y) = point.split_at(n);
                let ux = dot(u, x);
                let vy = dot(v, y);
                let c = ux * vy - self.measurements[sample];
                let mut grad: Vec<f64> = u.iter().map(|&ui| vy * ui).collect();
                grad.extend(v.iter().map(|&vi| ux * vi));
                Ok((c, grad))
            }
        }
    }

    /// Mean absolute residual `(1/m) sum_i |c_i(point)|`, or positive
    /// infinity when the point is outside the domain ball.
    pub fn full_objective(&self, point: &[f64]) -> f64 {
        if !self.ball().contains(point) {
            return f64::INFINITY;
        }
        let m = self.measurements.len();
        let total: f64 = (0..m)
            .map(|i| self.inner_eval(point, i).expect("valid index").0.abs())
            .sum();
        total / m as f64
    }

    /// A subgradient of `|c(., i)|` at `point`: `sign(c) * grad c`, with
    /// `sign(0) = 0` (the minimal-norm element).
    pub fn subgradient(&self, point: &[f64], sample: usize) -> Result<Vec<f64>> {
        let (c, mut grad) = self.inner_eval(point, sample)?;
        let s = if c > 0.0 {
            1.0
        } else if c < 0.0 {
            -1.0
        } else {
            0.0
        };
        for g in grad.iter_mut() {
            *g *= s;
        }
        Ok(grad)
    }
}

/// Affine model of the inner function, `l(x) = <gradient, x> + intercept`.
///
/// The intercept is `c(z, i) - <grad c(z, i), z>` for the base point `z`, so
/// the receiver can evaluate `l` anywhere without knowing `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub gradient: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Builds the model of `c(., sample)` linearized at `base`.
    pub fn at_base(instance: &ProblemInstance, base: &[f64], sample: usize) -> Result<Self> {
        let (c, gradient) = instance.inner_eval(base, sample)?;
        let intercept = c - dot(&gradient, base);
        Ok(LinearModel { gradient, intercept })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.gradient, x) + self.intercept
    }
}

/// Payload of a worker message: either the linearized-model coefficients
/// (prox-linear family) or a subgradient (subgradient family).
#[derive(Debug, Clone, PartialEq)]
pub enum InfoPayload {
    ProxLinear(LinearModel),
    Subgradient(Vec<f64>),
}

/// The message a worker sends to the master: model data computed at some
/// historical iterate, together with the iteration it was issued at and the
/// sample it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedInfo {
    pub payload: InfoPayload,
    pub issued_at: usize,
    pub sample: usize,
}

impl DelayedInfo {
    pub fn prox_linear(
        instance: &ProblemInstance,
        base: &[f64],
        sample: usize,
        issued_at: usize,
    ) -> Result<Self> {
        Ok(DelayedInfo {
            payload: InfoPayload::ProxLinear(LinearModel::at_base(instance, base, sample)?),
            issued_at,
            sample,
        })
    }

    pub fn subgradient(
        instance: &ProblemInstance,
        base: &[f64],
        sample: usize,
        issued_at: usize,
    ) -> Result<Self> {
        Ok(DelayedInfo {
            payload: InfoPayload::Subgradient(instance.subgradient(base, sample)?),
            issued_at,
            sample,
        })
    }

    /// Value `|l(x)|` of the one-sample model carried by a prox-linear
    /// message. Errors on subgradient messages, which carry no model.
    pub fn model_value(&self, x: &[f64]) -> Result<f64> {
        match &self.payload {
            InfoPayload::ProxLinear(model) => Ok(model.value(x).abs()),
            InfoPayload::Subgradient(_) => Err(Error::InfoVariantMismatch(
                "model_value on a subgradient message",
            )),
        }
    }
}

/// Starting point for a run, per the instance's initialization policy:
/// unit-normalized Gaussian for synthetic data (per block for pairs), or
/// truth plus standard Gaussian noise for loaded signals.
pub fn initial_point(instance: &ProblemInstance, rng: &mut impl RngCore) -> Vec<f64> {
    match instance.init_policy() {
        InitPolicy::UnitGaussian => match instance.kind() {
            ProblemKind::PhaseRetrieval => unit_normal_vec(rng, instance.signal_dim()),
            ProblemKind::BlindDeconvolution => {
                let n = instance.signal_dim();
                let mut x = unit_normal_vec(rng, n);
                x.extend(unit_normal_vec(rng, n));
                x
            }
        },
        InitPolicy::TruthPlusNoise => instance
            .truth()
            .iter()
            .map(|t| t + rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}
