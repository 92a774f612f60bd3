//! Radial polynomial Bregman kernels.
//!
//! A kernel is a function `d(x) = sum_j q_j * ||x||^j` with nonnegative
//! coefficients and degrees `j >= 2`. Every kernel produced here is
//! 1-strongly convex, which the proximal subproblem solvers rely on. The
//! divergence induced by `d` is
//! `V_d(x, y) = d(x) - d(y) - <grad d(y), x - y>`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};

/// Radial polynomial kernel `d(x) = sum_j coeff_j * ||x||^degree_j`.
///
/// Because `d` is radial, its gradient has the form
/// `grad d(x) = zeta(||x||) * x` for a scalar scale function `zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialKernel {
    /// Monomial terms `(degree, coefficient)`, degree >= 2, sorted by degree.
    terms: Vec<(u32, f64)>,
    /// Coefficient of the `0.5 * ||x||^2` part; >= 1 by construction, so the
    /// kernel is 1-strongly convex.
    strong_convexity_floor: f64,
}

impl PolynomialKernel {
    /// The Euclidean kernel `d(x) = 0.5 * ||x||^2`.
    pub fn euclidean() -> Self {
        PolynomialKernel {
            terms: vec![(2, 0.5)],
            strong_convexity_floor: 1.0,
        }
    }

    /// Builds a kernel from a polynomial bound on the squared subgradient
    /// norm: given `||h'(x)||^2 <= sum_k p_k * ||x||^k`, the function `h` is
    /// 1-Lipschitz relative to `d(x) = sum_k p_k / (k + 2) * ||x||^(k + 2)`.
    ///
    /// A quadratic term is added when necessary so that the result is always
    /// 1-strongly convex (the construction alone does not guarantee it).
    pub fn from_growth(growth: &[(u32, f64)]) -> Result<Self> {
        let mut terms: Vec<(u32, f64)> = Vec::new();
        for &(k, p) in growth {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::invalid(format!(
                    "growth coefficient for degree {k} must be finite and nonnegative, got {p}"
                )));
            }
            if p == 0.0 {
                continue;
            }
            let degree = k + 2;
            let coeff = p / f64::from(degree);
            match terms.iter_mut().find(|(d, _)| *d == degree) {
                Some((_, c)) => *c += coeff,
                None => terms.push((degree, coeff)),
            }
        }
        // 1-strong convexity needs the 0.5||x||^2 coefficient to be >= 1,
        // i.e. a quadratic monomial coefficient of at least 0.5.
        let quad = terms
            .iter()
            .find(|(d, _)| *d == 2)
            .map(|(_, c)| *c)
            .unwrap_or(0.0);
        if quad < 0.5 {
            match terms.iter_mut().find(|(d, _)| *d == 2) {
                Some((_, c)) => *c = 0.5,
                None => terms.push((2, 0.5)),
            }
        }
        terms.sort_by_key(|(d, _)| *d);
        let floor = 2.0 * terms.iter().find(|(d, _)| *d == 2).map(|(_, c)| *c).unwrap();
        Ok(PolynomialKernel {
            terms,
            strong_convexity_floor: floor,
        })
    }

    /// Monomial terms `(degree, coefficient)` of `d` in `||x||`.
    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    /// Coefficient of the `0.5||x||^2` part (>= 1).
    pub fn strong_convexity_floor(&self) -> f64 {
        self.strong_convexity_floor
    }

    /// `d` evaluated at radius `r = ||x||`.
    pub fn radial_value(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(deg, c)| c * r.powi(deg as i32))
            .sum()
    }

    /// `d(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.radial_value(norm(x))
    }

    /// Scale `zeta(r)` such that `grad d(x) = zeta(||x||) * x`.
    pub fn gradient_scale(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(deg, c)| c * f64::from(deg) * r.powi(deg as i32 - 2))
            .sum()
    }

    /// Radial derivative `d'(r) = ||grad d(x)||` at `r = ||x||`.
    pub fn gradient_magnitude(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(deg, c)| c * f64::from(deg) * r.powi(deg as i32 - 1))
            .sum()
    }

    /// `grad d(x) = zeta(||x||) * x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let scale = self.gradient_scale(norm(x));
        x.iter().map(|v| scale * v).collect()
    }

    /// Bregman divergence `V_d(x, y) = d(x) - d(y) - <grad d(y), x - y>`.
    pub fn divergence(&self, x: &[f64], y: &[f64]) -> f64 {
        let grad_y = self.gradient(y);
        self.value(x) - self.value(y) - dot(&grad_y, &sub(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| (rng.random::<f64>() - 0.5) * 2.0 * scale).collect()
    }

    #[test]
    fn constant_growth_gives_euclidean_shape() {
        // ||h'||^2 <= L^2 with L = 2 -> d(x) = 2 ||x||^2, no floor needed.
        let k = PolynomialKernel::from_growth(&[(0, 4.0)]).unwrap();
        assert_eq!(k.terms(), &[(2, 2.0)]);
        // L = 0.5 -> construction gives 0.125 ||x||^2, floor lifts it to 0.5.
        let k = PolynomialKernel::from_growth(&[(0, 0.25)]).unwrap();
        assert_eq!(k.terms(), &[(2, 0.5)]);
        assert_eq!(k.strong_convexity_floor(), 1.0);
    }

    #[test]
    fn quartic_growth_construction() {
        // {(0, p0), (2, p2)} -> p0/2 ||x||^2 + p2/4 ||x||^4.
        let k = PolynomialKernel::from_growth(&[(0, 3.0), (2, 8.0)]).unwrap();
        assert_eq!(k.terms(), &[(2, 1.5), (4, 2.0)]);
        // zeta(r) = p0 + p2 r^2 for the quartic kernel.
        let r: f64 = 1.7;
        assert!((k.gradient_scale(r) - (3.0 + 8.0 * r * r)).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_coefficients() {
        assert!(PolynomialKernel::from_growth(&[(0, -1.0)]).is_err());
    }

    #[test]
    fn euclidean_divergence_is_half_squared_distance() {
        let k = PolynomialKernel::euclidean();
        assert_eq!(k.gradient_scale(3.7), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_vec(&mut rng, 4, 2.0);
            let y = random_vec(&mut rng, 4, 2.0);
            let expected = 0.5 * norm_sq(&sub(&x, &y));
            assert!((k.divergence(&x, &y) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_identity_and_nonnegativity() {
        let k = PolynomialKernel::from_growth(&[(0, 1.0), (2, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = random_vec(&mut rng, 3, 3.0);
            let y = random_vec(&mut rng, 3, 3.0);
            let v = k.divergence(&x, &y);
            // 1-strong convexity lower bound.
            assert!(v >= 0.5 * norm_sq(&sub(&x, &y)) - 1e-10, "v = {v}");
            assert!(k.divergence(&x, &x).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = PolynomialKernel::from_growth(&[(0, 2.0), (1, 0.3), (2, 1.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_vec(&mut rng, 5, 2.0);
            let g = k.gradient(&x);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (k.value(&xp) - k.value(&xm)) / (2.0 * h);
                let denom = g[i].abs().max(1.0);
                assert!(
                    ((g[i] - fd) / denom).abs() <= 1e-6,
                    "component {i}: {} vs {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn quadratic_measurement_rows_are_relatively_lipschitz() {
        // For c(x) = <a, x>^2 the gradient norm obeys
        // ||grad c(x)||^2 <= 4 ||a||^4 ||x||^2, so the induced quartic
        // kernel makes c 1-relatively Lipschitz.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 4, 1.5)).collect();
        let max_norm4 = rows
            .iter()
            .map(|a| norm_sq(a) * norm_sq(a))
            .fold(0.0f64, f64::max);
        let kernel = PolynomialKernel::from_growth(&[(2, 4.0 * max_norm4)]).unwrap();
        for _ in 0..100 {
            let x = random_vec(&mut rng, 4, 3.0);
            let y = random_vec(&mut rng, 4, 3.0);
            if norm(&sub(&x, &y)) < 1e-9 {
                continue;
            }
            for a in &rows {
                let grad_norm = 2.0 * dot(a, &x).abs() * norm(a);
                let bound = (2.0 * kernel.divergence(&y, &x)).sqrt() / norm(&sub(&y, &x));
                assert!(grad_norm <= bound + 1e-9, "{grad_norm} > {bound}");
            }
        }
    }

    #[test]
    fn gradient_magnitude_is_radial_derivative() {
        let k = PolynomialKernel::from_growth(&[(0, 1.0), (2, 2.0)]).unwrap();
        let x = [0.6, -0.8, 0.0]; // norm 1
        let g = k.gradient(&x);
        assert!((norm(&g) - k.gradient_magnitude(1.0)).abs() < 1e-12);
    }
}
