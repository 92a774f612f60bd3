//! Bregman proximal machinery: building a kernel from subgradient growth
//! bounds and solving the piecewise-linear proximal subproblem exactly.
//!
//! The kernel spec is read from the command line as `degree:coefficient`
//! pairs bounding the squared subgradient norm, e.g.
//!
//! ```bash
//! cargo run --release --example bregman_subproblem -- 0:1.0 2:0.5
//! ```
//!
//! meaning `||h'(x)||^2 <= 1.0 + 0.5 ||x||^2`. Defaults to that quartic
//! kernel when no pairs are given.

use delayprox::kernel::PolynomialKernel;
use delayprox::linalg::{dot, norm};
use delayprox::prox::{bregman_pw_linear_prox, poly_root_positive};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let growth: Vec<(u32, f64)> = if args.is_empty() {
        vec![(0, 1.0), (2, 0.5)]
    } else {
        args.iter()
            .map(|pair| {
                let (deg, coeff) = pair
                    .split_once(':')
                    .unwrap_or_else(|| panic!("'{pair}' is not of the form degree:coefficient"));
                (
                    deg.parse().expect("degree must be a nonnegative integer"),
                    coeff.parse().expect("coefficient must be a real"),
                )
            })
            .collect()
    };

    let kernel = PolynomialKernel::from_growth(&growth).expect("valid growth bound");
    println!("growth bound: ||h'(x)||^2 <= {}", describe(&growth));
    println!(
        "kernel d(x) = {}  (1-strong convexity floor {})",
        describe_kernel(&kernel),
        kernel.strong_convexity_floor()
    );

    // An l1-style two-piece subproblem: max(<a1,x> + b1, <a2,x> + b2) + d(x).
    let a1 = vec![1.5, -0.5, 0.25];
    let a2 = vec![-1.0, 0.75, 0.5];
    let (b1, b2) = (0.4, 0.1);
    let x = bregman_pw_linear_prox(&a1, b1, &a2, b2, &kernel).expect("solvable");
    let p1 = dot(&a1, &x) + b1;
    let p2 = dot(&a2, &x) + b2;
    println!("\nminimizer of max(<a1,x>+b1, <a2,x>+b2) + d(x):");
    println!("  x = {x:?}");
    println!("  piece values {p1:.6} / {p2:.6}, objective {:.6}", p1.max(p2) + kernel.value(&x));

    // The positive-root search used by the equality-constrained candidate.
    let u = vec![0.3, 0.1, -0.2];
    let v = vec![0.8, -0.4, 0.6];
    let alpha = poly_root_positive(&kernel, &u, &v).expect("root exists");
    let point: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| ui + alpha * vi).collect();
    let residual = alpha * kernel.gradient_magnitude(norm(&point)) - 1.0;
    println!("\npositive root alpha = {alpha:.12} (residual {residual:.2e})");
}

fn describe(growth: &[(u32, f64)]) -> String {
    growth
        .iter()
        .map(|(k, p)| match k {
            0 => format!("{p}"),
            1 => format!("{p} ||x||"),
            _ => format!("{p} ||x||^{k}"),
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn describe_kernel(kernel: &PolynomialKernel) -> String {
    kernel
        .terms()
        .iter()
        .map(|(deg, c)| format!("{c} ||x||^{deg}"))
        .collect::<Vec<_>>()
        .join(" + ")
}
