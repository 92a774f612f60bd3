//! Stationarity and recovery metrics.
//!
//! Near-stationarity is measured through the Moreau envelope: for
//! `psi(x) = (1/m) sum_i |c_i(x)| + ball indicator` and `rho` larger than
//! the weak-convexity modulus, the envelope gradient is
//! `rho * (x - prox_{psi/rho}(x))` and its squared norm goes to zero at
//! stationary points. The proximal point itself has no closed form, so it
//! is approximated by deterministic full-batch prox-linear iterations whose
//! piecewise-linear subproblems are solved exactly through their dual.

use crate::linalg::{add_scaled, dist, dot, norm_sq, scale, sub};
use crate::problem::{ProblemInstance, ProblemKind};
use crate::prox::BallSpec;

/// Composite objectives `(1/m) sum_i |c_i(x)|` exposed through their
/// one-sample inner values and gradients.
pub trait CompositeOracle {
    fn dim(&self) -> usize;
    fn num_samples(&self) -> usize;
    fn inner_value_grad(&self, point: &[f64], sample: usize) -> (f64, Vec<f64>);
    fn ball(&self) -> BallSpec;
    /// Weak-convexity modulus of the one-sample losses (an upper estimate).
    fn weak_convexity_modulus(&self) -> f64;

    fn objective(&self, point: &[f64]) -> f64 {
        let m = self.num_samples();
        (0..m)
            .map(|i| self.inner_value_grad(point, i).0.abs())
            .sum::<f64>()
            / m as f64
    }
}

impl CompositeOracle for ProblemInstance {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn num_samples(&self) -> usize {
        self.num_measurements()
    }

    fn inner_value_grad(&self, point: &[f64], sample: usize) -> (f64, Vec<f64>) {
        self.inner_eval(point, sample).expect("sample index in range")
    }

    fn ball(&self) -> BallSpec {
        self.ball()
    }

    fn weak_convexity_modulus(&self) -> f64 {
        self.weak_convexity_modulus()
    }
}

/// Exact minimizer of
/// `(1/m) sum_i |<g_i, u> + e_i| + (q/2) ||u - w||^2`
/// via coordinate ascent on the box-constrained dual
/// `max_{|s_i| <= 1/m} sum_i s_i l_i(w) - (1/2q) ||sum_i s_i g_i||^2`,
/// with primal recovery `u = w - (1/q) sum_i s_i g_i`.
fn sum_abs_affine_prox(
    grads: &[Vec<f64>],
    values_at_center: &[f64],
    q: f64,
    center: &[f64],
    dual: &mut [f64],
) -> Vec<f64> {
    let m = grads.len();
    let bound = 1.0 / m as f64;
    let mut residual = vec![0.0; center.len()];
    for (s, g) in dual.iter().zip(grads) {
        if *s != 0.0 {
            for (r, gi) in residual.iter_mut().zip(g) {
                *r += s * gi;
            }
        }
    }
    for _ in 0..400 {
        let mut max_change = 0.0f64;
        for i in 0..m {
            let g = &grads[i];
            let g_sq = norm_sq(g);
            if g_sq == 0.0 {
                continue;
            }
            let old = dual[i];
            // Maximize the dual over s_i with the others fixed.
            let grad_i = values_at_center[i] - (dot(g, &residual) - old * g_sq) / q;
            let new = (q * grad_i / g_sq).clamp(-bound, bound);
            if new != old {
                let delta = new - old;
                for (r, gi) in residual.iter_mut().zip(g) {
                    *r += delta * gi;
                }
                dual[i] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change <= 1e-15 {
            break;
        }
    }
    add_scaled(center, -1.0 / q, &residual)
}

/// Result of a Moreau-envelope gradient estimate.
#[derive(Debug, Clone)]
pub struct MoreauEstimate {
    /// `rho^2 ||x - x_hat||^2`, the squared envelope gradient norm.
    pub grad_norm_sq: f64,
    /// The approximate proximal point `x_hat`.
    pub prox_point: Vec<f64>,
    /// Movement of the last inner iteration, for judging accuracy.
    pub last_movement: f64,
    /// Inner iterations actually used.
    pub iterations: usize,
}

/// Estimates `||grad psi_{1/rho}(x)||^2 = rho^2 ||x - prox_{psi/rho}(x)||^2`.
///
/// The proximal point is approximated by full-batch prox-linear iterations
/// on `psi(y) + (rho/2) ||y - x||^2`: every inner function is linearized at
/// the current inner iterate and the resulting piecewise-linear-plus-
/// quadratic subproblem (extra proximal weight `gamma_inner`) is solved
/// exactly. Iterations end when the movement drops below `inner_tol` or the
/// budget runs out. The caller must pick `rho` above the weak-convexity
/// modulus; `gamma_inner` is chosen as `rho + 2 lambda_hat` with
/// `lambda_hat` estimated from the inner gradients at the anchor.
pub fn moreau_stationarity(
    oracle: &impl CompositeOracle,
    x: &[f64],
    rho: f64,
    inner_iters: usize,
    inner_tol: f64,
) -> MoreauEstimate {
    assert!(rho > 0.0, "envelope parameter rho must be positive");
    assert!(x.iter().all(|v| v.is_finite()), "non-finite anchor point");
    let m = oracle.num_samples();
    let ball = oracle.ball();
    let lambda_hat = oracle.weak_convexity_modulus();
    let gamma_inner = rho + 2.0 * lambda_hat;
    let q = rho + gamma_inner;

    let mut y = x.to_vec();
    let mut dual = vec![0.0; m];
    let mut last_movement = f64::INFINITY;
    let mut used = 0;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut values: Vec<f64> = vec![0.0; m];
    for _ in 0..inner_iters {
        used += 1;
        grads.clear();
        // Combined center of the two quadratic terms.
        let w: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (rho * xi + gamma_inner * yi) / q)
            .collect();
        for (i, value) in values.iter_mut().enumerate() {
            let (c, g) = oracle.inner_value_grad(&y, i);
            // Model value at w: c(y) + <g, w - y>.
            *value = c + dot(&g, &w) - dot(&g, &y);
            grads.push(g);
        }
        let next = sum_abs_affine_prox(&grads, &values, q, &w, &mut dual);
        let next = if ball.contains(&next) { next } else { ball.project(&next) };
        last_movement = dist(&next, &y);
        y = next;
        if last_movement <= inner_tol {
            break;
        }
    }
    MoreauEstimate {
        grad_norm_sq: rho * rho * norm_sq(&sub(x, &y)),
        prox_point: y,
        last_movement,
        iterations: used,
    }
}

/// Distance to the ground truth modulo the model's ambiguity group:
/// global sign for phase retrieval (`min(||x - x*||, ||x + x*||)`), scale of
/// the rank-one product for blind deconvolution
/// (`||x y^T - x* y*^T||_F / ||x* y*^T||_F`).
pub fn recovery_distance(instance: &ProblemInstance, point: &[f64]) -> f64 {
    let truth = instance.truth();
    match instance.kind() {
        ProblemKind::PhaseRetrieval => {
            let plus = dist(point, truth);
            let minus = dist(point, &scale(truth, -1.0));
            plus.min(minus)
        }
        ProblemKind::BlindDeconvolution => {
            let n = instance.signal_dim();
            let (x, y) = point.split_at(n);
            let (xs, ys) = truth.split_at(n);
            // ||x y^T - x* y*^T||_F^2 expanded in inner products.
            let diff_sq = norm_sq(x) * norm_sq(y) - 2.0 * dot(x, xs) * dot(y, ys)
                + norm_sq(xs) * norm_sq(ys);
            let denom_sq = norm_sq(xs) * norm_sq(ys);
            (diff_sq.max(0.0) / denom_sq).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_blind_deconvolution, generate_phase_retrieval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `psi(x) = (1/m) sum_i |<a_i, x> - b_i|`: linear inner functions, so
    /// the prox-linear model is exact. Used to encode 1-D absolute losses.
    struct LinearAbs {
        rows: Vec<Vec<f64>>,
        b: Vec<f64>,
        radius: f64,
    }

    impl CompositeOracle for LinearAbs {
        fn dim(&self) -> usize {
            self.rows[0].len()
        }
        fn num_samples(&self) -> usize {
            self.rows.len()
        }
        fn inner_value_grad(&self, point: &[f64], sample: usize) -> (f64, Vec<f64>) {
            let a = &self.rows[sample];
            (dot(a, point) - self.b[sample], a.clone())
        }
        fn ball(&self) -> BallSpec {
            BallSpec::Joint { radius: self.radius }
        }
        fn weak_convexity_modulus(&self) -> f64 {
            0.0
        }
    }

    #[test]
    fn soft_threshold_case() {
        // psi(x) = |x|, rho = 1, anchor 3: prox point 2, stationarity 1.
        let problem = LinearAbs {
            rows: vec![vec![1.0]],
            b: vec![0.0],
            radius: 1e6,
        };
        let est = moreau_stationarity(&problem, &[3.0], 1.0, 200, 1e-9);
        assert!((est.prox_point[0] - 2.0).abs() < 1e-7, "{:?}", est.prox_point);
        assert!((est.grad_norm_sq - 1.0).abs() < 1e-6);

        // Already stationary at the origin.
        let est = moreau_stationarity(&problem, &[0.0], 1.0, 200, 1e-9);
        assert!(est.grad_norm_sq <= 1e-10);
        assert!(est.last_movement <= 1e-9);
    }

    #[test]
    fn matches_grid_oracle_on_small_instance() {
        let inst = generate_phase_retrieval(5, 2, 1.0, 0.0, 5.0, 61).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() * 0.8).collect();
        let lambda_hat = (0..5)
            .map(|i| 2.0 * norm_sq(inst.sensing().row(i)))
            .fold(0.0f64, f64::max);
        let rho = 2.0 * lambda_hat + 1.0;
        let est = moreau_stationarity(&inst, &x, rho, 400, 1e-12);

        // Dense grid argmin of psi(y) + rho/2 ||y - x||^2 around the anchor.
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        let half_width = 0.6;
        let steps = 600;
        for i in 0..=steps {
            for j in 0..=steps {
                let y = vec![
                    x[0] - half_width + 2.0 * half_width * i as f64 / steps as f64,
                    x[1] - half_width + 2.0 * half_width * j as f64 / steps as f64,
                ];
                let val = inst.full_objective(&y) + 0.5 * rho * norm_sq(&sub(&y, &x));
                if val < best.0 {
                    best = (val, y);
                }
            }
        }
        assert!(
            dist(&est.prox_point, &best.1) <= 1e-4 + 2.0 * half_width / steps as f64,
            "prox point {:?} vs grid argmin {:?}",
            est.prox_point,
            best.1
        );
    }

    #[test]
    fn stationarity_nonnegative_and_zero_iff_fixed() {
        let inst = generate_phase_retrieval(8, 3, 1.0, 0.0, 5.0, 63).unwrap();
        let est = moreau_stationarity(&inst, inst.truth(), 500.0, 200, 1e-10);
        // The truth is a global minimizer of the clean objective.
        assert!(est.grad_norm_sq >= 0.0);
        assert!(est.grad_norm_sq <= 1e-10, "{}", est.grad_norm_sq);
    }

    #[test]
    fn recovery_distance_ambiguity_group() {
        let inst = generate_phase_retrieval(10, 4, 1.0, 0.0, 5.0, 64).unwrap();
        assert_eq!(recovery_distance(&inst, inst.truth()), 0.0);
        let negated = scale(inst.truth(), -1.0);
        assert!(recovery_distance(&inst, &negated) <= 1e-12);

        let bd = generate_blind_deconvolution(10, 4, 1.0, 0.0, 64).unwrap();
        let truth = bd.truth().to_vec();
        assert!(recovery_distance(&bd, &truth) <= 1e-12);
        let n = bd.signal_dim();
        let mut scaled = scale(&truth[..n], 2.0);
        scaled.extend(scale(&truth[n..], 0.5));
        assert!(recovery_distance(&bd, &scaled) <= 1e-7);
    }
}
