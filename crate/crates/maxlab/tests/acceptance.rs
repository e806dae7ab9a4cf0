//! The acceptance gate: one test per headline claim, each printing a
//! single `C<i> ...: PASS/FAIL` line (visible with `--nocapture`).
//!
//! Every criterion is checked at its stated tolerance against values
//! computed independently of the library where possible — closed forms,
//! exactly representable fixtures, or certified floors.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maxlab::bellman::{
    chord_margin, filtration_instances, lemma_certificate, main_inequality_margin,
    theorem_constants,
};
use maxlab::body::{BodyKind, BodySpec};
use maxlab::builtins::indicator;
use maxlab::covering::{
    besicovitch_extract, build_psi, layer_cake_constant, layer_cake_report, level_family,
    overlap_field,
};
use maxlab::grid::GridFunction;
use maxlab::operators::centered_counterexample_report;
use maxlab::partition::{build_filtration, verify_density, AxisBox, StopRule};
use maxlab::search::{almost_centered_bound, grafakos_check, minimize_ratio, ratio, RatioOperator};

/// Prints the per-criterion verdict line, then enforces it.
fn conclude(line: &str, pass: bool) {
    println!("{line}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{line}: FAIL");
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let q = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo * q.powi(i as i32)).collect()
}

/// Strictly positive rough density on an n-cell-per-axis grid over [0,1]^d.
fn random_density(seed: u64, dim: usize, n: usize) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n.pow(dim as u32)).map(|_| 0.05 + rng.gen::<f64>()).collect();
    GridFunction::new(vec![n; dim], vec![0.0; dim], 1.0 / n as f64, values).unwrap()
}

#[test]
fn c01_uncentered_indicator_within_two_percent_of_sqrt3() {
    let start = Instant::now();
    let g = indicator().unwrap();
    let rep = ratio(&g, &RatioOperator::UncenteredBox, 2.0).unwrap();
    let elapsed = start.elapsed();
    let sqrt3 = 3f64.sqrt();
    let pass = (rep.ratio - sqrt3).abs() <= 0.02 * sqrt3
        && rep.ratio >= 2f64.sqrt()
        && elapsed.as_secs_f64() < 10.0;
    conclude(
        &format!(
            "C1 uncentered indicator: ratio {:.6} vs sqrt(3) = {:.6} in {:.2?}",
            rep.ratio, sqrt3, elapsed
        ),
        pass,
    );
}

#[test]
fn c02_dyadic_extremal_within_one_percent_of_sqrt_three_halves() {
    let start = Instant::now();
    let g = GridFunction::from_fn(vec![256], vec![0.0], 1.0, |x| {
        if x[0] < 1.0 { 1.0 } else { 0.0 }
    })
    .unwrap();
    let rep = ratio(&g, &RatioOperator::Dyadic, 2.0).unwrap();
    let elapsed = start.elapsed();
    let c = theorem_constants(2.0, 2.0, 1).unwrap().dyadic;
    let pass = (rep.ratio - c).abs() <= 0.01 * c && elapsed.as_secs_f64() < 5.0;
    conclude(
        &format!(
            "C2 dyadic extremal: ratio {:.9} vs ((2^p-1)/(2^p-2))^(1/p) = {:.9} in {:.2?}",
            rep.ratio, c, elapsed
        ),
        pass,
    );
}

#[test]
fn c03_main_inequality_margins_on_ten_thousand_instances() {
    let lambdas = [1.25, 1.5, 2.0];
    let ps = [1.5, 2.0, 3.0];
    let mut instances = 0usize;
    let mut min_margin = f64::INFINITY;
    let root = AxisBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
    'outer: for seed in 0..60u64 {
        for &lambda in &lambdas {
            for &p in &ps {
                let g = random_density(seed * 31 + 7, 2, 32);
                let tree = build_filtration(&g, &root, lambda, p, StopRule {
                    max_depth: Some(5),
                    min_diam: None,
                })
                .unwrap();
                for (parent, children) in filtration_instances(&tree) {
                    let m = main_inequality_margin(&parent, &children).unwrap();
                    min_margin = min_margin.min(m);
                    instances += 1;
                }
            }
        }
        if instances >= 10_000 {
            break 'outer;
        }
    }

    let mut chord_min = f64::INFINITY;
    for &lambda in &lambdas {
        for &p in &ps {
            for i in 0..10_000usize {
                let s = 1.0 + (lambda - 1.0) * i as f64 / 9_999.0;
                chord_min = chord_min.min(chord_margin(s.min(lambda), p, lambda).unwrap());
            }
        }
    }

    let pass = instances >= 10_000 && min_margin >= -1e-9 && chord_min >= 0.0;
    conclude(
        &format!(
            "C3 averaging inequality: {} instances, worst margin {:.2e}, chord min {:.2e}",
            instances, min_margin, chord_min
        ),
        pass,
    );
}

#[test]
fn c04_root_certificates_on_fifty_random_instances() {
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let dim = 1 + (seed as usize) % 2;
        let n = if dim == 1 { 128 } else { 24 };
        let g = random_density(seed, dim, n);
        let root = AxisBox::new(vec![0.0; dim], vec![1.0; dim]).unwrap();
        let lambda = [1.25, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
        let p = [1.5, 2.0, 2.5, 3.0][rng.gen_range(0..4)];
        // Leaves below cell scale: the certificate is only as good as the
        // resolution of the filtration it is telescoped through.
        let tree = build_filtration(&g, &root, lambda, p, StopRule {
            max_depth: None,
            min_diam: Some(0.5 / n as f64),
        })
        .unwrap();
        let mq = tree.maximal_field(&g).unwrap();
        let cert = lemma_certificate(&g, &root, &tree, p, lambda, &mq).unwrap();
        worst = worst.min(cert.lhs - cert.rhs);
    }
    conclude(
        &format!("C4 certificates: 50 random (f, S, lambda, p), worst lhs - rhs = {worst:.2e}"),
        worst >= -1e-6,
    );
}

#[test]
fn c05_partition_density_on_one_hundred_random_densities() {
    let root = AxisBox::new(vec![0.0; 2], vec![1.0; 2]).unwrap();
    let lambda = 1.5;
    let mut worst_item = 0.0f64;
    let mut worst_fraction = 0.0f64;
    let mut all_pass = true;
    for seed in 0..100u64 {
        let g = random_density(500 + seed, 2, 32);
        let tree = build_filtration(&g, &root, lambda, 2.0, StopRule {
            max_depth: None,
            min_diam: Some(2f64.powi(-6)),
        })
        .unwrap();
        let report = verify_density(&tree, &g, lambda).unwrap();
        all_pass &= report.pass;
        for item in &report.items {
            worst_item = worst_item.max(item.worst);
        }
        for node in &tree.nodes {
            if let Some(p) = node.parent {
                let frac = node.region.volume() / tree.nodes[p].region.volume();
                worst_fraction = worst_fraction.max(frac);
            }
        }
    }
    let pass = all_pass && worst_fraction <= 1.0 / lambda + 1e-12;
    conclude(
        &format!(
            "C5 partition density: 100 trees, all properties {}, max child volume fraction {:.6} <= {:.6}",
            if all_pass { "hold" } else { "VIOLATED" },
            worst_fraction,
            1.0 / lambda
        ),
        pass,
    );
}

#[test]
fn c06_covering_properties_overlap_bound_and_exchange_identity() {
    // (a) Overlap-function properties on a 30-point ladder, delta = 1e-3.
    let g = GridFunction::from_fn(vec![288], vec![-4.0], 1.0 / 32.0, |x| {
        if x[0] > 0.0 && x[0] <= 1.0 { 1.0 } else { 0.0 }
    })
    .unwrap();
    let delta = 1e-3;
    let ladder = geometric(0.05, 0.95, 30);
    let mut psi_pass = true;
    for &t in &ladder {
        let family = level_family(&g, t, delta, BodyKind::Box).unwrap();
        let kept = besicovitch_extract(&family).unwrap();
        let (_, report) = build_psi(&g, t, delta, kept, None).unwrap();
        psi_pass &= report.pass;
    }

    // (b) Greedy subfamily overlap stays under 5^n on 10^3 random squares.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let bodies: Vec<BodySpec> = (0..1000)
        .map(|_| {
            let c = vec![rng.gen_range(0.5..9.5), rng.gen_range(0.5..9.5)];
            BodySpec::cube(c, rng.gen_range(0.25..0.5)).unwrap()
        })
        .collect();
    let kept = besicovitch_extract(&bodies).unwrap();
    let canvas = GridFunction::constant(vec![100; 2], vec![0.0; 2], 0.1, 1.0).unwrap();
    let overlap = overlap_field(&canvas, &kept).unwrap();
    let max_overlap = overlap.values.iter().cloned().fold(0.0, f64::max);

    // (c) Both sides of the exchange identity agree within 2%: per level
    // exactly, and in aggregate through the layer-cake quadrature.
    let rows = grafakos_check(&g, &[0.25, 0.5, 0.8]).unwrap();
    let gr_ok = rows.iter().all(|r| r.residual <= 0.02);
    let cake = layer_cake_report(&g, BodyKind::Box, 2.0, &ladder, delta).unwrap();
    let cake_ok = (cake.lhs - cake.rhs).abs() <= 0.02 * cake.lhs.max(cake.rhs);

    let pass = psi_pass && max_overlap <= 25.0 && gr_ok && cake_ok;
    conclude(
        &format!(
            "C6 covering: psi properties {}, max overlap {} <= 25, identity sides within 2% (cake {:.4} vs {:.4})",
            if psi_pass { "hold" } else { "VIOLATED" },
            max_overlap,
            cake.lhs,
            cake.rhs
        ),
        pass,
    );
}

#[test]
fn c07_centered_fixed_point_deviation_small_and_refining() {
    let coarse = centered_counterexample_report(64, 8.0, None, 2).unwrap();
    let fine = centered_counterexample_report(128, 8.0, None, 2).unwrap();
    let pass = coarse.max_rel_deviation <= 0.05
        && fine.max_rel_deviation < coarse.max_rel_deviation;
    conclude(
        &format!(
            "C7 centered fixed point: interior deviation {:.3e} at n = 64, {:.3e} at n = 128",
            coarse.max_rel_deviation, fine.max_rel_deviation
        ),
        pass,
    );
}

#[test]
fn c08_extremal_search_stays_above_the_constant() {
    let outcome = minimize_ratio(&RatioOperator::UncenteredBox, 2.0, &[256], 100_000, 1).unwrap();
    let floor = 2f64.sqrt() * 0.98;
    let certified = outcome.report.certified_ratio.unwrap();
    let pass = outcome.report.ratio >= floor && certified >= floor;
    conclude(
        &format!(
            "C8 extremal search: best ratio {:.6}, certified {:.6}, floor sqrt(2)*0.98 = {:.6}",
            outcome.report.ratio, certified, floor
        ),
        pass,
    );
}

#[test]
fn c09_exchange_identity_residuals_on_fifty_smooth_densities() {
    let h = 1.0 / 256.0;
    let bound = 0.01 + 2.0 * h;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (rng.gen_range(0.3..1.5), rng.gen_range(0.2..0.8), rng.gen_range(0.05..0.2))
            })
            .collect();
        let g = GridFunction::from_fn(vec![2304], vec![-7.0], h, |x| {
            bumps
                .iter()
                .map(|&(a, c, w)| a * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
                .sum()
        })
        .unwrap();
        let field = maxlab::search::operator_field(&g, &RatioOperator::OneSided).unwrap();
        let top = field.field.sup_norm();
        let floor = (0.05 * top).max(1.15 * field.field.values[0]);
        let rows = grafakos_check(&g, &geometric(floor, 0.9 * top, 20)).unwrap();
        for r in rows {
            worst = worst.max(r.residual);
        }
    }
    conclude(
        &format!("C9 exchange identity: 50 densities x 20 levels, worst residual {worst:.2e} <= {bound:.2e}"),
        worst <= bound,
    );
}

#[test]
fn c10_constants_are_bit_stable_and_match_closed_forms() {
    let mut stable = true;
    let mut closed = true;
    let mut substitution = true;
    for &p in &[1.5, 2.0, 3.0] {
        for &lambda in &[1.25, 1.5, 2.0, 4.0] {
            let a = theorem_constants(p, lambda, 2).unwrap();
            let b = theorem_constants(p, lambda, 2).unwrap();
            stable &= a.general.to_bits() == b.general.to_bits()
                && a.limit.to_bits() == b.limit.to_bits()
                && a.dyadic.to_bits() == b.dyadic.to_bits();
            let general = ((lambda.powf(p) - 1.0) / (lambda.powf(p) - lambda)).powf(1.0 / p);
            let limit = (p / (p - 1.0)).powf(1.0 / p);
            closed &= a.general.to_bits() == general.to_bits()
                && a.limit.to_bits() == limit.to_bits();
        }
        for n in [1u32, 2, 3, 8] {
            let tc = theorem_constants(p, 2f64.powi(n as i32), n).unwrap();
            substitution &= tc.general.to_bits() == tc.dyadic.to_bits();
        }
    }

    // The layer-cake constant at p = 2, B = 5, and the almost-centered
    // bound in its eps -> 0, eta -> infinity, lambda -> 1 corner, both
    // equal sqrt(1.2).
    let target = 1.2f64.sqrt();
    let cake = layer_cake_constant(2.0, 5.0).unwrap();
    let mut corner = true;
    for n in 1..=3u32 {
        let a = almost_centered_bound(n, 2.0, 1.0 - 1e-9, 1e-13, 1e15, 5.0).unwrap();
        corner &= (a - target).abs() <= 1e-12;
    }
    let pass = stable
        && closed
        && substitution
        && (cake - target).abs() <= 1e-12
        && corner;
    conclude(
        &format!(
            "C10 constants: bit-stable {stable}, closed forms {closed}, lambda = 2^n substitution {substitution}, sqrt(1.2) checks {:.2e}",
            (cake - target).abs()
        ),
        pass,
    );
}
