//! Two region-level diagnostics that drive covering arguments.
//!
//! The entropy comparison: for f supported in a region K0 with average 1,
//! the integral of f log f against the centered field over K0 is
//! controlled — concentrated densities have large entropy, but the
//! centered field over the region grows to match. The dichotomy: a region
//! either *expands* (the maximal field carries (1 + eta) times its mass)
//! or f is *spread out* on it (the field is nearly constant at the
//! region's own average on a shrunken core).

use maxlab::body::BodySpec;
use maxlab::covering::{dichotomy_check, stein_check, Verdict};
use maxlab::grid::GridFunction;

fn main() -> maxlab::Result<()> {
    // f = 2 on the left half of the unit square, 0 on the right: average 1
    // over the square, entropy integral ln 2 times the mass of f.
    let g = GridFunction::from_fn(vec![64, 64], vec![0.0, 0.0], 1.0 / 64.0, |x| {
        if x[0] < 0.5 { 2.0 } else { 0.0 }
    })?;
    let k0 = BodySpec::cube(vec![0.5, 0.5], 0.5)?;
    let rep = stein_check(&g, &k0)?;
    println!("two-valued density on the unit square:");
    println!("  entropy side  {:.6}  (exactly 2 ln 2 * 1/2 = {:.6})", rep.lhs, 2f64.ln());
    println!("  field side    {:.6}", rep.rhs);
    println!("  empirical c   {:.4}  (< 1: the field side dominates)", rep.empirical_c);
    assert!(rep.lhs <= rep.rhs && rep.empirical_c < 1.0);

    // A corner spike seen from a centered window: all of its mass lies
    // outside the window's core, so the region must expand.
    let spike = GridFunction::from_fn(vec![64, 64], vec![0.0, 0.0], 1.0 / 64.0, |x| {
        if x[0] < 0.05 && x[1] < 0.05 { 100.0 } else { 0.01 }
    })?;
    let k = BodySpec::cube(vec![0.25, 0.25], 0.25)?;
    let rep = dichotomy_check(&spike, &k, 0.5, 0.1, 0.1)?;
    println!("\ncorner spike, window [0, 0.5]^2: verdict {:?}", rep.verdict);
    println!("  expansion: integral of Mf = {:.4} >= (1 + eta) mass = {:.4}",
        rep.expansion_lhs, rep.expansion_rhs);
    assert!(matches!(rep.verdict, Verdict::Expansion | Verdict::Both));

    // A constant density cannot expand — averaging cannot beat the sup —
    // but it is spread out by definition.
    let flat = GridFunction::constant(vec![64, 64], vec![0.0, 0.0], 1.0 / 64.0, 1.0)?;
    let rep = dichotomy_check(&flat, &k, 0.5, 0.1, 0.1)?;
    println!("\nconstant density, same window: verdict {:?}", rep.verdict);
    println!("  spread: min field {:.4} vs threshold {:.4}", rep.spread_min, rep.spread_threshold);
    assert!(matches!(rep.verdict, Verdict::Spread | Verdict::Both));
    Ok(())
}
