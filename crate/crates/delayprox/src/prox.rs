//! Exact solvers for the proximal subproblems used by the steppers.
//!
//! All subproblems here are small convex programs with closed-form or
//! one-dimensional solutions: the absolute-value-of-affine model prox used
//! by the prox-linear family, the ball-constrained gradient prox used by
//! the subgradient family, and the piecewise-linear Bregman prox.

use crate::error::{Error, Result};
use crate::kernel::PolynomialKernel;
use crate::linalg::{add_scaled, dot, norm, norm_sq, scale, sub};

/// Domain constraint for iterates. `PerBlock` applies the radius to the two
/// halves `x[..split]` and `x[split..]` separately (blind deconvolution);
/// `Joint` applies it to the whole vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallSpec {
    Joint { radius: f64 },
    PerBlock { radius: f64, split: usize },
}

impl BallSpec {
    pub fn radius(&self) -> f64 {
        match *self {
            BallSpec::Joint { radius } => radius,
            BallSpec::PerBlock { radius, .. } => radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1.0 + 1e-12;
        match *self {
            BallSpec::Joint { radius } => norm(x) <= radius * slack,
            BallSpec::PerBlock { radius, split } => {
                norm(&x[..split]) <= radius * slack && norm(&x[split..]) <= radius * slack
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            BallSpec::Joint { radius } => ball_project(x, radius),
            BallSpec::PerBlock { radius, split } => {
                let mut out = ball_project(&x[..split], radius);
                out.extend(ball_project(&x[split..], radius));
                out
            }
        }
    }
}

/// Result of a proximal step. `boundary_hit` flags that the unconstrained
/// closed-form solution left the ball and was projected back.
#[derive(Debug, Clone)]
pub struct ProxStep {
    pub point: Vec<f64>,
    pub boundary_hit: bool,
}

/// Euclidean projection onto the ball of the given radius.
pub fn ball_project(x: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius > 0.0, "ball radius must be positive, got {radius}");
    let r = norm(x);
    if r <= radius {
        x.to_vec()
    } else {
        scale(x, radius / r)
    }
}

/// Minimizer of `|<gradient, x> + intercept-part| + (gamma/2) ||x - center||^2`
/// over the ball, given the model value `l(center)` at the center.
///
/// The unconstrained solution lies on the segment `center + t * zeta` with
/// `zeta = gradient / gamma` and `t = Proj_[-1,1](-delta / ||zeta||^2)`,
/// `delta = l(center) / gamma`. A zero gradient reduces to projecting the
/// center; a solution outside the ball is projected and flagged.
pub fn prox_affine_abs(
    gradient: &[f64],
    value_at_center: f64,
    center: &[f64],
    gamma: f64,
    ball: &BallSpec,
) -> ProxStep {
    assert!(gamma > 0.0, "prox parameter gamma must be positive, got {gamma}");
    let zeta = scale(gradient, 1.0 / gamma);
    let zeta_sq = norm_sq(&zeta);
    if zeta_sq == 0.0 {
        let inside = ball.contains(center);
        return ProxStep {
            point: ball.project(center),
            boundary_hit: !inside,
        };
    }
    let delta = value_at_center / gamma;
    let t = (-delta / zeta_sq).clamp(-1.0, 1.0);
    let candidate = add_scaled(center, t, &zeta);
    if ball.contains(&candidate) {
        ProxStep {
            point: candidate,
            boundary_hit: false,
        }
    } else {
        ProxStep {
            point: ball.project(&candidate),
            boundary_hit: true,
        }
    }
}

/// Phase-retrieval prox-linear step: minimizer over the ball of
/// `|<a,z>^2 + 2<a,z><a, x - z> - b| + (gamma/2) ||x - w||^2`
/// where `z` is the model base point and `w` the proximal center.
pub fn prox_linear_pr(
    a: &[f64],
    b: f64,
    base: &[f64],
    center: &[f64],
    gamma: f64,
    radius: f64,
) -> ProxStep {
    assert!(gamma > 0.0, "prox parameter gamma must be positive, got {gamma}");
    let az = dot(a, base);
    let ball = BallSpec::Joint { radius };
    if az == 0.0 {
        // Constant model: only the proximal term matters.
        let inside = ball.contains(center);
        return ProxStep {
            point: ball.project(center),
            boundary_hit: !inside,
        };
    }
    let delta = (az * az + 2.0 * az * (dot(a, center) - az) - b) / gamma;
    let zeta = scale(a, 2.0 * az / gamma);
    let t = (-delta / norm_sq(&zeta)).clamp(-1.0, 1.0);
    let candidate = add_scaled(center, t, &zeta);
    if ball.contains(&candidate) {
        ProxStep {
            point: candidate,
            boundary_hit: false,
        }
    } else {
        ProxStep {
            point: ball.project(&candidate),
            boundary_hit: true,
        }
    }
}

/// Blind-deconvolution prox-linear step over the concatenated pair.
///
/// `base` and `center` hold the stacked `(x, y)` blocks with `x` of length
/// `u.len()`. The model is the bilinear measurement linearized at `base`:
/// `|<u,z_x><v,z_y> + <v,z_y><u, x - z_x> + <u,z_x><v, y - z_y> - b|`.
pub fn prox_linear_bd(
    u: &[f64],
    v: &[f64],
    b: f64,
    base: &[f64],
    center: &[f64],
    gamma: f64,
    ball: &BallSpec,
) -> ProxStep {
    assert!(gamma > 0.0, "prox parameter gamma must be positive, got {gamma}");
    let n = u.len();
    assert_eq!(base.len(), n + v.len());
    assert_eq!(center.len(), base.len());
    let (zx, zy) = base.split_at(n);
    let (wx, wy) = center.split_at(n);
    let uzx = dot(u, zx);
    let vzy = dot(v, zy);
    if uzx == 0.0 && vzy == 0.0 {
        let inside = ball.contains(center);
        return ProxStep {
            point: ball.project(center),
            boundary_hit: !inside,
        };
    }
    let delta =
        (uzx * vzy + vzy * (dot(u, wx) - dot(u, zx)) + uzx * (dot(v, wy) - dot(v, zy)) - b) / gamma;
    let mut zeta = scale(u, vzy / gamma);
    zeta.extend(scale(v, uzx / gamma));
    let t = (-delta / norm_sq(&zeta)).clamp(-1.0, 1.0);
    let candidate = add_scaled(center, t, &zeta);
    if ball.contains(&candidate) {
        ProxStep {
            point: candidate,
            boundary_hit: false,
        }
    } else {
        ProxStep {
            point: ball.project(&candidate),
            boundary_hit: true,
        }
    }
}

/// Subgradient prox step: exact minimizer over the ball of
/// `<g, x> + (gamma/2) ||x - w||^2`, i.e. the projected gradient step
/// `Proj(w - g / gamma)`.
pub fn prox_sgd_step(g: &[f64], center: &[f64], gamma: f64, ball: &BallSpec) -> ProxStep {
    assert!(gamma > 0.0, "prox parameter gamma must be positive, got {gamma}");
    let unconstrained = add_scaled(center, -1.0 / gamma, g);
    let inside = ball.contains(&unconstrained);
    ProxStep {
        point: ball.project(&unconstrained),
        boundary_hit: !inside,
    }
}

/// Smallest positive root of a function with `f(0) < 0`, found by geometric
/// bracket expansion from 1 followed by bisection. Brackets the first sign
/// change, so mild non-monotonicity beyond the root is harmless.
fn first_positive_root(f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi);
    if f(1.0) >= 0.0 {
        lo = 0.0;
        hi = 1.0;
    } else {
        lo = 1.0;
        hi = 2.0;
        let mut expansions = 0;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
            if expansions > 200 || !hi.is_finite() {
                return Err(Error::RootBracketing);
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Positive root `alpha` of
/// `alpha * d'(||u + alpha v||) - 1 = 0`,
/// which for a kernel built from growth coefficients `p_k` reads
/// `sum_k p_k alpha ||u + alpha v||^(k+1) - 1 = 0`.
pub fn poly_root_positive(kernel: &PolynomialKernel, u: &[f64], v: &[f64]) -> Result<f64> {
    let phi = |alpha: f64| {
        let point = add_scaled(u, alpha, v);
        alpha * kernel.gradient_magnitude(norm(&point)) - 1.0
    };
    first_positive_root(phi)
}

/// Solves `d'(s) = target` for `s >= 0`. The radial derivative of a
/// 1-strongly convex kernel is strictly increasing with `d'(0) = 0` and
/// `d'(s) >= s`, so `[0, target]` always brackets the solution.
fn radial_inverse(kernel: &PolynomialKernel, target: f64) -> f64 {
    debug_assert!(target >= 0.0);
    if target == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kernel.gradient_magnitude(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact minimizer of `<a, x> + gamma * V_d(x, y)`.
///
/// Stationarity gives `grad d(z) = grad d(y) - a / gamma`, so `z` lies on a
/// known ray and only its radius has to be solved for.
pub fn bregman_linear_prox(
    a: &[f64],
    y: &[f64],
    gamma: f64,
    kernel: &PolynomialKernel,
) -> Vec<f64> {
    assert!(gamma > 0.0, "prox parameter gamma must be positive, got {gamma}");
    let target = add_scaled(&kernel.gradient(y), -1.0 / gamma, a);
    let t = norm(&target);
    if t == 0.0 {
        return vec![0.0; a.len()];
    }
    let s = radial_inverse(kernel, t);
    scale(&target, s / t)
}

/// Exact minimizer of `<a, x> + d(x)` (single linear piece).
fn single_piece_min(a: &[f64], kernel: &PolynomialKernel) -> Vec<f64> {
    let t = norm(a);
    if t == 0.0 {
        return vec![0.0; a.len()];
    }
    let s = radial_inverse(kernel, t);
    scale(a, -s / t)
}

/// Exact minimizer of `max{<a1,x> + b1, <a2,x> + b2} + d(x)`.
///
/// Solves the two single-piece problems, keeping each only if its own piece
/// attains the max at its solution, plus the equality-constrained candidate
/// `x = u + alpha v` whose scale `alpha` solves
/// `alpha * zeta(||u + alpha v||) = 1` with `grad d(x) = zeta(||x||) x`.
/// Returns the feasible candidate with least objective; ties within 1e-12 go
/// to the smaller-norm candidate.
pub fn bregman_pw_linear_prox(
    a1: &[f64],
    b1: f64,
    a2: &[f64],
    b2: f64,
    kernel: &PolynomialKernel,
) -> Result<Vec<f64>> {
    assert_eq!(a1.len(), a2.len());
    let objective = |x: &[f64]| {
        let p1 = dot(a1, x) + b1;
        let p2 = dot(a2, x) + b2;
        p1.max(p2) + kernel.value(x)
    };

    let diff = sub(a1, a2);
    let diff_sq = norm_sq(&diff);
    if diff_sq == 0.0 {
        // Parallel pieces: the max is a single affine function.
        return Ok(single_piece_min(a1, kernel));
    }

    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(3);
    let x1 = single_piece_min(a1, kernel);
    if dot(a1, &x1) + b1 >= dot(a2, &x1) + b2 - 1e-12 {
        candidates.push(x1);
    }
    let x2 = single_piece_min(a2, kernel);
    if dot(a2, &x2) + b2 >= dot(a1, &x2) + b1 - 1e-12 {
        candidates.push(x2);
    }

    // Equality-constrained candidate.
    let u = scale(&diff, -(b1 - b2) / diff_sq);
    let mut v = scale(&diff, (norm_sq(a1) - norm_sq(a2)) / (2.0 * diff_sq));
    for (vi, (c1, c2)) in v.iter_mut().zip(a1.iter().zip(a2)) {
        *vi -= 0.5 * (c1 + c2);
    }
    if norm_sq(&v) == 0.0 {
        candidates.push(u);
    } else {
        let alpha = first_positive_root(|alpha| {
            let point = add_scaled(&u, alpha, &v);
            alpha * kernel.gradient_scale(norm(&point)) - 1.0
        })?;
        candidates.push(add_scaled(&u, alpha, &v));
    }

    let mut best = candidates.pop().expect("at least the constrained candidate");
    let mut best_obj = objective(&best);
    for cand in candidates {
        let obj = objective(&cand);
        if obj < best_obj - 1e-12 || ((obj - best_obj).abs() <= 1e-12 && norm(&cand) < norm(&best))
        {
            best = cand;
            best_obj = obj;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() - 0.5) * 2.0 * s).collect()
    }

    #[test]
    fn ball_project_basics() {
        assert_eq!(ball_project(&[0.5, 0.5], 1.0), vec![0.5, 0.5]);
        let p = ball_project(&[3.0, 4.0], 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x = random_vec(&mut rng, 6, 10.0);
            assert!(norm(&ball_project(&x, 2.5)) <= 2.5 * (1.0 + 1e-12));
        }
    }

    #[test]
    #[should_panic(expected = "radius must be positive")]
    fn ball_project_rejects_nonpositive_radius() {
        ball_project(&[1.0], 0.0);
    }

    #[test]
    fn per_block_projection() {
        let ball = BallSpec::PerBlock { radius: 1.0, split: 2 };
        let p = ball.project(&[3.0, 4.0, 0.1, 0.2]);
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert_eq!(&p[2..], &[0.1, 0.2]);
    }

    #[test]
    fn prox_linear_pr_fixed_points() {
        // Zero model residual at the center: the center is optimal.
        let a = [1.0, 0.0];
        let z = [2.0, 0.0];
        let w = [2.0, 0.0];
        let b = 4.0; // <a,z>^2 = 4 = b and w = z, so delta = 0
        let step = prox_linear_pr(&a, b, &z, &w, 3.0, 100.0);
        assert!(dist(&step.point, &w) < 1e-15);
        assert!(!step.boundary_hit);

        // <a,z> = 0: constant model, center projected.
        let z0 = [0.0, 5.0];
        let w_out = [300.0, 0.0];
        let step = prox_linear_pr(&a, 1.0, &z0, &w_out, 3.0, 100.0);
        assert!((norm(&step.point) - 100.0).abs() < 1e-9);
        assert!(step.boundary_hit);
    }

    #[test]
    fn prox_sgd_step_contraction() {
        let ball = BallSpec::Joint { radius: 1e6 };
        let w = [1.0, -2.0, 0.5];
        let step = prox_sgd_step(&[0.0, 0.0, 0.0], &w, 2.0, &ball);
        assert_eq!(step.point, w.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = random_vec(&mut rng, 3, 5.0);
            let gamma = 1.0 + rng.random::<f64>() * 100.0;
            let step = prox_sgd_step(&g, &w, gamma, &ball);
            assert!(dist(&step.point, &w) <= norm(&g) / gamma + 1e-12);
        }
    }

    // 1-D restriction oracle along zeta for the prox-linear closed forms.
    fn grid_min_along(
        value_at_center: f64,
        gradient: &[f64],
        gamma: f64,
        points: usize,
    ) -> f64 {
        let zeta = scale(gradient, 1.0 / gamma);
        let zeta_sq = norm_sq(&zeta);
        let mut best = f64::INFINITY;
        for i in 0..=points {
            let t = -1.0 + 2.0 * (i as f64) / (points as f64);
            let model = (value_at_center + gamma * t * zeta_sq).abs();
            let obj = model + 0.5 * gamma * t * t * zeta_sq;
            if obj < best {
                best = obj;
            }
        }
        best
    }

    #[test]
    fn prox_affine_abs_beats_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ball = BallSpec::Joint { radius: 1e9 };
        for _ in 0..200 {
            let n = 2 + (rng.random::<f64>() * 4.0) as usize;
            let g = random_vec(&mut rng, n, 3.0);
            let w = random_vec(&mut rng, n, 3.0);
            let val = (rng.random::<f64>() - 0.5) * 10.0;
            let gamma = 0.5 + rng.random::<f64>() * 10.0;
            let step = prox_affine_abs(&g, val, &w, gamma, &ball);
            let model_at = val + dot(&g, &sub(&step.point, &w));
            let obj = model_at.abs() + 0.5 * gamma * norm_sq(&sub(&step.point, &w));
            let grid = grid_min_along(val, &g, gamma, 4000);
            assert!(obj <= grid + 1e-8, "obj {obj} grid {grid}");
        }
    }

    #[test]
    fn pr_and_generic_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = 3;
            let a = random_vec(&mut rng, n, 2.0);
            let z = random_vec(&mut rng, n, 2.0);
            let w = random_vec(&mut rng, n, 2.0);
            let b = (rng.random::<f64>() - 0.5) * 4.0;
            let gamma = 0.5 + rng.random::<f64>() * 5.0;
            let az = dot(&a, &z);
            let gradient = scale(&a, 2.0 * az);
            let model_at_w = az * az + 2.0 * az * (dot(&a, &w) - az) - b;
            let direct = prox_linear_pr(&a, b, &z, &w, gamma, 1e9);
            let generic = prox_affine_abs(
                &gradient,
                model_at_w,
                &w,
                gamma,
                &BallSpec::Joint { radius: 1e9 },
            );
            assert!(dist(&direct.point, &generic.point) <= 1e-10 * (1.0 + norm(&w)));
        }
    }

    #[test]
    fn bd_zero_coefficients_project_center() {
        let ball = BallSpec::PerBlock { radius: 10.0, split: 2 };
        let base = [0.0, 0.0, 0.0, 0.0];
        let center = [1.0, 1.0, 2.0, -1.0];
        let step = prox_linear_bd(&[1.0, 0.0], &[0.0, 1.0], 3.0, &base, &center, 2.0, &ball);
        assert_eq!(step.point, center.to_vec());
    }

    #[test]
    fn bd_zero_residual_keeps_center() {
        // Model residual zero at the center: the prox term pins the center.
        let ball = BallSpec::PerBlock { radius: 10.0, split: 2 };
        let base = [1.0, 0.0, 0.0, 2.0]; // z_x = (1,0), z_y = (0,2)
        let u = [1.0, 0.5];
        let v = [0.25, 1.0];
        // center = base, so the model value there is <u,z_x><v,z_y> - b.
        let b = dot(&u, &base[..2]) * dot(&v, &base[2..]);
        let step = prox_linear_bd(&u, &v, b, &base, &base, 2.0, &ball);
        assert!(dist(&step.point, &base) < 1e-15);
        assert!(!step.boundary_hit);
    }

    #[test]
    fn poly_root_euclidean_cases() {
        let kernel = PolynomialKernel::euclidean();
        // u = 0: alpha^2 ||v|| = 1.
        let v = [2.0, 0.0];
        let alpha = poly_root_positive(&kernel, &[0.0, 0.0], &v).unwrap();
        assert!((alpha - 1.0 / norm(&v).sqrt()).abs() < 1e-10);
        // u = 0, v = e1: alpha = 1.
        let alpha = poly_root_positive(&kernel, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((alpha - 1.0).abs() < 1e-10);
    }

    #[test]
    fn poly_root_residual_small_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let kernels = [
            PolynomialKernel::euclidean(),
            PolynomialKernel::from_growth(&[(0, 1.0), (2, 0.7)]).unwrap(),
        ];
        for kernel in &kernels {
            for _ in 0..200 {
                let u = random_vec(&mut rng, 3, 2.0);
                let v = random_vec(&mut rng, 3, 2.0);
                let alpha = poly_root_positive(kernel, &u, &v).unwrap();
                let point = add_scaled(&u, alpha, &v);
                let phi = alpha * kernel.gradient_magnitude(norm(&point)) - 1.0;
                assert!(phi.abs() <= 1e-10, "residual {phi}");
            }
        }
    }

    #[test]
    fn poly_root_errors_without_sign_change() {
        let kernel = PolynomialKernel::euclidean();
        assert!(matches!(
            poly_root_positive(&kernel, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::RootBracketing)
        ));
    }

    #[test]
    fn bregman_pw_linear_closed_form_cases() {
        let kernel = PolynomialKernel::euclidean();
        // Single piece: min <a,x> + 0.5||x||^2 at x = -a.
        let a = [1.5, -0.5];
        let x = bregman_pw_linear_prox(&a, 1.0, &a, 1.0, &kernel).unwrap();
        assert!(dist(&x, &[-1.5, 0.5]) < 1e-12);
        // Symmetric pieces |<a,x>| + 0.5||x||^2 minimized at the origin.
        let x = bregman_pw_linear_prox(&a, 0.0, &scale(&a, -1.0), 0.0, &kernel).unwrap();
        assert!(norm(&x) < 1e-10);
    }

    #[test]
    fn bregman_linear_prox_three_point_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let kernel = PolynomialKernel::from_growth(&[(0, 1.0), (2, 0.5)]).unwrap();
        for _ in 0..100 {
            let a = random_vec(&mut rng, 3, 2.0);
            let y = random_vec(&mut rng, 3, 2.0);
            let gamma = 0.5 + rng.random::<f64>() * 5.0;
            let z = bregman_linear_prox(&a, &y, gamma, &kernel);
            let x = random_vec(&mut rng, 3, 3.0);
            let lhs = dot(&a, &z) + gamma * kernel.divergence(&z, &y);
            let rhs = dot(&a, &x) + gamma * kernel.divergence(&x, &y)
                - gamma * kernel.divergence(&x, &z);
            assert!(lhs <= rhs + 1e-9, "three-point violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn bregman_linear_prox_step_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let kernel = PolynomialKernel::from_growth(&[(0, 2.0), (2, 1.0)]).unwrap();
        for _ in 0..100 {
            let a = random_vec(&mut rng, 4, 3.0);
            let y = random_vec(&mut rng, 4, 2.0);
            let gamma = 0.5 + rng.random::<f64>() * 10.0;
            let z = bregman_linear_prox(&a, &y, gamma, &kernel);
            let l = norm(&a);
            assert!(kernel.divergence(&z, &y).sqrt() <= 2f64.sqrt() * l / gamma + 1e-9);
            assert!(dist(&z, &y) <= 2.0 * l / gamma + 1e-9);
        }
    }
}
