//! The closed-form constants in one place.
//!
//! * general: ((lambda^p - 1)/(lambda^p - lambda))^(1/p), the norm
//!   increase guaranteed by any lambda-dense exhaustive family;
//! * limit: (p/(p-1))^(1/p), its lambda -> 1 limit, attained by
//!   uncentered boxes;
//! * dyadic: the general constant at lambda = 2^n, the ratio enforced by
//!   half-splitting boxes in dimension n;
//! * almost-centered: the explicit bound available when bodies only
//!   contain the point in a central lambda-dilate, with a Besicovitch
//!   overlap constant B and expansion threshold eta.

use maxlab::bellman::{general_constant, limit_constant, theorem_constants};
use maxlab::search::almost_centered_bound;

fn main() -> maxlab::Result<()> {
    println!("norm-increase constants (columns: lambda; last two: limit, dyadic n=1..3)");
    println!(
        "  {:>5}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
        "p", "l=1.25", "l=1.5", "l=2", "limit", "n=1", "n=2", "n=3"
    );
    for p in [1.25, 1.5, 2.0, 3.0, 4.0] {
        let gs: Vec<f64> = [1.25, 1.5, 2.0]
            .iter()
            .map(|&l| general_constant(p, l))
            .collect::<maxlab::Result<_>>()?;
        let ds: Vec<f64> = (1..=3)
            .map(|n| Ok(theorem_constants(p, 2.0, n)?.dyadic))
            .collect::<maxlab::Result<_>>()?;
        println!(
            "  {:>5}  {:>8.5}  {:>8.5}  {:>8.5}  {:>8.5}  {:>8.5}  {:>8.5}  {:>8.5}",
            p, gs[0], gs[1], gs[2], limit_constant(p)?, ds[0], ds[1], ds[2]
        );
    }

    // The general constant is nonincreasing in lambda and exceeds 1.
    let mut prev = f64::INFINITY;
    for l in [1.1, 1.5, 2.0, 4.0, 16.0] {
        let c = general_constant(2.0, l)?;
        assert!(c > 1.0 && c <= prev);
        prev = c;
    }

    // The almost-centered bound against dimension and exponent, with the
    // box overlap constant B = 5^n. The boundary-shaving parameter eps
    // must stay under a feasibility threshold that shrinks with B, so it
    // is set to half that threshold per entry; the resulting margin over
    // 1 thins out quickly as n grows.
    let (lambda, eta) = (0.5, 0.1);
    println!("\nalmost-centered bound, lambda = {lambda}, eta = {eta}, B = 5^n, eps = eps_max/2:");
    println!("  {:>3}  {:>14}  {:>14}  {:>14}", "n", "p=1.5", "p=2", "p=3");
    for n in 1..=6u32 {
        let b = 5f64.powi(n as i32);
        let row: Vec<f64> = [1.5, 2.0, 3.0]
            .iter()
            .map(|&p| {
                // Largest eps keeping the bound nontrivial: the shrink
                // loss (1-eps)^(-n-p) may not eat the overlap gain.
                let eps_max = 1.0
                    - (1.0 + 1.0 / (b * (p - 1.0))).powf(-1.0 / (n as f64 + p));
                almost_centered_bound(n, p, lambda, eps_max / 2.0, eta, b)
            })
            .collect::<maxlab::Result<_>>()?;
        println!("  {:>3}  {:>14.10}  {:>14.10}  {:>14.10}", n, row[0], row[1], row[2]);
        assert!(row.iter().all(|&a| a > 1.0));
    }
    println!("\n(A > 1 in every dimension, though the excess decays with n.)");
    Ok(())
}
