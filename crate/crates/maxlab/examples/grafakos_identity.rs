//! The level-set exchange identity of the one-sided operator on the line:
//!
//!   t * |{ MR f > t }| = integral of f over { MR f > t }.
//!
//! MR f(x) looks only rightward, so on each component of a superlevel set
//! the running average leaves the set at value exactly t — the measure of
//! the set trades places with the mass of f on it. Step functions satisfy
//! the identity on the grid exactly; smooth densities pick up one cell of
//! boundary error per component.

use maxlab::grid::GridFunction;
use maxlab::search::{grafakos_check, grafakos_csv, operator_field, RatioOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> maxlab::Result<()> {
    // Exact on a cell-aligned indicator at levels whose set boundaries
    // 1 - 1/t land on cell edges: both sides equal the unit mass below
    // the plateau and vanish above it.
    let g = GridFunction::from_fn(vec![288], vec![-4.0], 1.0 / 32.0, |x| {
        if x[0] > 0.0 && x[0] <= 1.0 { 1.0 } else { 0.0 }
    })?;
    let rows = grafakos_check(&g, &[0.25, 0.5, 2.0])?;
    println!("unit indicator:");
    print!("{}", grafakos_csv(&rows));
    for r in &rows {
        assert!(r.residual < 1e-12, "residual {} at t = {}", r.residual, r.t);
    }

    // A smooth density: three Gaussian bumps on a domain padded to the
    // left, so no superlevel component reaches the edge of the grid.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(0.3..1.5), rng.gen_range(0.2..0.8), rng.gen_range(0.05..0.2)))
        .collect();
    let h = 1.0 / 256.0;
    let g = GridFunction::from_fn(vec![2304], vec![-7.0], h, |x| {
        bumps
            .iter()
            .map(|&(a, c, w)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
            .sum()
    })?;
    let field = operator_field(&g, &RatioOperator::OneSided)?;
    let top = field.field.sup_norm();
    // Components can only cross the left edge when the first cell itself
    // is in the superlevel set; starting above its value prevents that.
    let floor = (0.05 * top).max(1.15 * field.field.values[0]);
    let levels: Vec<f64> = (0..20)
        .map(|i| floor * (0.9 * top / floor).powf(i as f64 / 19.0))
        .collect();
    let rows = grafakos_check(&g, &levels)?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    println!("\nsmooth bumps, 20 levels: worst residual {:.2e} (allowance 1% + 2h = {:.2e})",
        worst, 0.01 + 2.0 * h);
    assert!(worst <= 0.01 + 2.0 * h);
    Ok(())
}
