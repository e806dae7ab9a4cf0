//! Level families, greedy disjointification, and overlap functions.
//!
//! For a level `t > 0`, a *level family* attaches to each grid point `x`
//! with `f(x) > t` a body centered at `x` whose average is (within a
//! relative tolerance) exactly `t` — such a body exists by the intermediate
//! value theorem, since averages start at `f(x) > t` on tiny bodies and
//! dilute to zero on huge ones. [`besicovitch_extract`] greedily thins the
//! family to a subfamily that still covers every center but overlaps at
//! most `5^n` times, and [`build_psi`] turns the survivors into the overlap
//! count `psi` together with checks of its four defining properties.
//! Integrating those properties over a ladder of levels
//! ([`layer_cake_report`]) produces a norm lower bound with the constant
//! `(1 + 1/((p-1) B))^(1/p)`, where `B` is the observed overlap bound.
//! [`dichotomy_check`], [`split_cover`], and [`stein_check`] cover the
//! companion inequalities used when the body family is only almost
//! centered (`0 < lambda < 1`).

use crate::body::{BodyKind, BodySpec};
use crate::error::{Error, Result};
use crate::grid::{body_average, GridFunction, SummedTable};
use crate::operators::{maximal, MaximalField, Mode, OperatorSpec};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// A level-`t` cover: the selected bodies, their overlap count on the grid,
/// and (after [`split_cover`]) the expansion/spread classification.
#[derive(Debug, Clone, Serialize)]
pub struct LevelSetCover {
    pub t: f64,
    /// Relative tolerance: every selected body has `|avg - t| <= delta * t`.
    pub delta: f64,
    pub selected: Vec<BodySpec>,
    /// Overlap count at cell centers.
    pub psi: GridFunction,
    /// Bodies on which the maximal function strictly expands mass.
    pub psi1: Option<Vec<BodySpec>>,
    /// Bodies on which the maximal function spreads the body average.
    pub psi2: Option<Vec<BodySpec>>,
    /// Overlap count of the `(1-eps)`-shrunk spread bodies.
    pub psi2_eps: Option<GridFunction>,
}

fn scaled_body(kind: BodyKind, center: Vec<f64>, s: f64) -> Result<BodySpec> {
    match kind {
        BodyKind::Box => BodySpec::cube(center, s),
        _ => BodySpec::new_ball(kind, center, s),
    }
}

/// For every grid point with `f(x) > t`, the body centered at `x` whose
/// average equals `t` within `delta * t` (found at the first downward
/// crossing of the dilating average, then bisected). Points with
/// `f(x) <= t` are skipped: only the superlevel set needs covering.
///
/// Supported families are those with exact step-function averages (`Box`,
/// `BallInf`); metric balls are quadrature-based and cannot honor a `1e-3`
/// relative tolerance in the scale bisection.
pub fn level_family(
    g: &GridFunction,
    t: f64,
    delta: f64,
    family: BodyKind,
) -> Result<Vec<BodySpec>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidLevel(format!("level {t} must be positive")));
    }
    if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {delta} must lie in (0, 1)"
        )));
    }
    if matches!(family, BodyKind::Ball1 | BodyKind::Ball2) {
        return Err(Error::InvalidParameter(
            "level families need exact body averages; use box or sup-ball bodies".into(),
        ));
    }
    let table = SummedTable::new(g);
    let avg = |center: &[f64], s: f64| -> Result<f64> {
        body_average(g, &table, &scaled_body(family, center.to_vec(), s)?, 1)
    };
    // Bisect to a tenth of the advertised tolerance so that downstream
    // property checks with multiplicative slack (1 + delta) can never be
    // tripped by a body sitting at the edge of its own tolerance band.
    let tol = delta * t / 10.0;
    let mut out = Vec::new();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    g.for_each_cell(|idx, lin| {
        if g.values[lin] > t {
            centers.push(g.cell_center(idx));
        }
    });
    for center in centers {
        let mut s_lo = g.h / 2.0;
        let p_lo = avg(&center, s_lo)?;
        if p_lo <= t {
            // Center value exceeds t but its own cell does not (possible
            // only through quadrature of non-box bodies); nothing to grow.
            continue;
        }
        if (p_lo - t).abs() <= tol {
            out.push(scaled_body(family, center, s_lo)?);
            continue;
        }
        // Geometric scan for the first downward crossing of t.
        let mut s_hi = s_lo;
        let mut crossed = false;
        for _ in 0..10_000 {
            s_hi *= 2f64.powf(0.25);
            let p = avg(&center, s_hi)?;
            if p < t {
                crossed = true;
                break;
            }
            s_lo = s_hi;
        }
        if !crossed {
            continue; // dilution never reached t; defensive, t > 0 prevents it
        }
        let mut s_mid = 0.5 * (s_lo + s_hi);
        for _ in 0..200 {
            s_mid = 0.5 * (s_lo + s_hi);
            let p = avg(&center, s_mid)?;
            if (p - t).abs() <= tol {
                break;
            }
            if p > t {
                s_lo = s_mid;
            } else {
                s_hi = s_mid;
            }
        }
        let body = scaled_body(family, center, s_mid)?;
        let a = body_average(g, &table, &body, 1)?;
        if (a - t).abs() <= delta * t {
            out.push(body);
        }
        // A body that cannot be refined into the tolerance band (the
        // average jumped past t) is dropped rather than mislabeled.
    }
    Ok(out)
}

/// Greedy disjointification: repeatedly select a largest body whose center
/// is not yet covered (ties to the lowest input index) and mark every
/// center it contains as covered. Every input center ends up covered; the
/// overlap of the selection is the quantity bounded by `5^n`.
pub fn besicovitch_extract(bodies: &[BodySpec]) -> Result<Vec<BodySpec>> {
    if bodies.is_empty() {
        return Ok(Vec::new());
    }
    let dim = bodies[0].dim();
    for b in bodies {
        b.validate()?;
        if b.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: b.dim() });
        }
    }
    let mut covered = vec![false; bodies.len()];
    let mut selected = Vec::new();
    loop {
        let mut pick: Option<usize> = None;
        for (i, b) in bodies.iter().enumerate() {
            if !covered[i] && pick.map_or(true, |j| b.size() > bodies[j].size()) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        for (j, b) in bodies.iter().enumerate() {
            if !covered[j] && bodies[i].contains(&b.center)? {
                covered[j] = true;
            }
        }
        debug_assert!(covered[i]);
        selected.push(bodies[i].clone());
    }
    Ok(selected)
}

/// Property report for one overlap function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiReport {
    pub t: f64,
    pub n_selected: usize,
    pub max_psi: f64,
    /// `5^n`.
    pub besicovitch_bound: f64,
    pub prop1_pass: bool,
    /// Worst signed excess of `t` over `(1+delta) M_1 f` on `{psi > 0}`,
    /// relative to `t`; `-1` when vacuous. Positive means a body was
    /// selected where the maximal function cannot support it.
    pub prop2_worst: f64,
    pub prop2_pass: bool,
    /// Worst signed excess of `f` over `(1+delta) t` among *uncovered*
    /// cells, relative to `t`; `-1` when every superlevel cell is covered.
    pub prop3_worst: f64,
    pub prop3_pass: bool,
    /// `t * sum |S|` and `sum of integrals of f over S`: the two sides of
    /// the exchange identity, plus their absolute difference.
    pub prop4_lhs: f64,
    pub prop4_rhs: f64,
    pub prop4_residual: f64,
    pub prop4_pass: bool,
    pub pass: bool,
}

impl PsiReport {
    pub fn csv_header() -> &'static str {
        "t,n_selected,max_psi,prop2_worst,prop3_worst,prop4_residual"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.t, self.n_selected, self.max_psi, self.prop2_worst, self.prop3_worst,
            self.prop4_residual
        )
    }
}

/// Overlap count of a body list at cell centers.
pub fn overlap_field(g: &GridFunction, bodies: &[BodySpec]) -> Result<GridFunction> {
    let mut counts = vec![0.0f64; g.cell_count()];
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(g.cell_count());
    g.for_each_cell(|idx, _| centers.push(g.cell_center(idx)));
    for b in bodies {
        for (lin, c) in centers.iter().enumerate() {
            if b.contains(c)? {
                counts[lin] += 1.0;
            }
        }
    }
    GridFunction::new(g.shape.clone(), g.origin.clone(), g.h, counts)
}

/// The reference field for "the maximal function supports this level": the
/// exact uncentered box maximal, refined by the averages of the bodies
/// themselves (each selected body pushes its own average onto the cells it
/// contains — a genuine lower bound for any containing-body maximal).
fn support_field(
    g: &GridFunction,
    table: &SummedTable,
    bodies: &[BodySpec],
    base: Option<&MaximalField>,
) -> Result<Vec<f64>> {
    let mut vals = match base {
        Some(m) => {
            let f = &m.field;
            if f.shape != g.shape || f.origin != g.origin || f.h != g.h {
                return Err(Error::Config(
                    "maximal field lives on a different grid than the density".into(),
                ));
            }
            f.values.clone()
        }
        None => {
            let spec = OperatorSpec { family: BodyKind::Box, lambda: 1.0, mode: Mode::Exact, ..OperatorSpec::default() };
            maximal(g, &spec)?.field.values
        }
    };
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(g.cell_count());
    g.for_each_cell(|idx, _| centers.push(g.cell_center(idx)));
    for b in bodies {
        let a = body_average(g, table, b, 4)?;
        for (lin, c) in centers.iter().enumerate() {
            if b.contains(c)? && a > vals[lin] {
                vals[lin] = a;
            }
        }
    }
    Ok(vals)
}

/// Builds the overlap function of a selection and checks its four defining
/// properties:
///
/// 1. `max psi <= 5^n`;
/// 2. `psi = 0` wherever `t > M_1 f(x) (1+delta)` (no body can average to
///    `t` where the maximal function stays below it);
/// 3. `psi >= 1` wherever `f(x) > t (1+delta)` (the superlevel set is
///    covered);
/// 4. `t * sum |S| = sum over S of the integral of f`, within `delta`
///    relative (every body averages to `t`).
///
/// Property 4 is evaluated with closed-form volumes and exact body
/// integrals; counting cells against the grid `psi` would add `O(h)`
/// boundary error that swamps `delta`. Failures are reported, not raised.
/// `m1` optionally supplies a precomputed uncentered maximal field (it is
/// recomputed otherwise).
pub fn build_psi(
    g: &GridFunction,
    t: f64,
    delta: f64,
    selected: Vec<BodySpec>,
    m1: Option<&MaximalField>,
) -> Result<(LevelSetCover, PsiReport)> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidLevel(format!("level {t} must be positive")));
    }
    let n = g.dim();
    let table = SummedTable::new(g);
    let psi = overlap_field(g, &selected)?;
    let max_psi = psi.values.iter().cloned().fold(0.0, f64::max);
    let bound = 5f64.powi(n as i32);
    let prop1_pass = max_psi <= bound;

    let support = support_field(g, &table, &selected, m1)?;
    let mut prop2_worst = -1.0f64;
    let mut prop3_worst = -1.0f64;
    for lin in 0..g.cell_count() {
        if psi.values[lin] > 0.0 {
            prop2_worst = prop2_worst.max((t - (1.0 + delta) * support[lin]) / t);
        } else if g.values[lin] > t * (1.0 + delta) {
            prop3_worst = prop3_worst.max((g.values[lin] - t * (1.0 + delta)) / t);
        }
    }
    let prop2_pass = prop2_worst <= 0.0;
    let prop3_pass = prop3_worst <= 0.0;

    let mut vol_sum = 0.0;
    let mut mass_sum = 0.0;
    for b in &selected {
        let v = b.volume();
        vol_sum += v;
        mass_sum += v * body_average(g, &table, b, 4)?;
    }
    let prop4_lhs = t * vol_sum;
    let prop4_rhs = mass_sum;
    let prop4_residual = (prop4_lhs - prop4_rhs).abs();
    let prop4_pass = prop4_residual <= delta * prop4_lhs;

    let report = PsiReport {
        t,
        n_selected: selected.len(),
        max_psi,
        besicovitch_bound: bound,
        prop1_pass,
        prop2_worst,
        prop2_pass,
        prop3_worst,
        prop3_pass,
        prop4_lhs,
        prop4_rhs,
        prop4_residual,
        prop4_pass,
        pass: prop1_pass && prop2_pass && prop3_pass && prop4_pass,
    };
    let cover = LevelSetCover { t, delta, selected, psi, psi1: None, psi2: None, psi2_eps: None };
    Ok((cover, report))
}

/// Which half of the almost-centered dichotomy a body satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The maximal function strictly expands the mass of the body.
    Expansion,
    /// The maximal function dominates `(1-eps)` of the body average on the
    /// shrunk body.
    Spread,
    Both,
    Neither,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub verdict: Verdict,
    /// Integral of the maximal function over the body.
    pub expansion_lhs: f64,
    /// `(1 + eta)` times the integral of `f` over the body.
    pub expansion_rhs: f64,
    /// Minimum of the maximal field over the shrunk body.
    pub spread_min: f64,
    /// `(1 - eps)` times the body average.
    pub spread_threshold: f64,
    /// Cell centers inside the shrunk body (0 makes the spread check vacuous).
    pub cells_checked: usize,
}

fn lambda_field(g: &GridFunction, kind: BodyKind, lambda: f64) -> Result<MaximalField> {
    let family = if kind == BodyKind::BallInf { BodyKind::Box } else { kind };
    maximal(g, &OperatorSpec { family, lambda, mode: Mode::Ladder, ..OperatorSpec::default() })
}

fn check_dichotomy_params(lambda: f64, eps: f64, eta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "calibration {lambda} must lie in (0, 1]"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps {eps} must lie in (0, 1)")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} must be positive")));
    }
    Ok(())
}

fn dichotomy_against_field(
    g: &GridFunction,
    table: &SummedTable,
    field: &MaximalField,
    k: &BodySpec,
    eps: f64,
    eta: f64,
) -> Result<DichotomyReport> {
    let mtable = SummedTable::new(&field.field);
    let vol = k.volume();
    let expansion_lhs = body_average(&field.field, &mtable, k, 4)? * vol;
    let mass = body_average(g, table, k, 4)? * vol;
    let expansion_rhs = (1.0 + eta) * mass;
    let shrunk = k.dilate(1.0 - eps)?;
    let threshold = (1.0 - eps) * mass / vol;
    let mut spread_min = f64::INFINITY;
    let mut cells = 0usize;
    let mut result: Result<()> = Ok(());
    g.for_each_cell(|idx, lin| {
        if result.is_err() {
            return;
        }
        match shrunk.contains(&g.cell_center(idx)) {
            Ok(true) => {
                cells += 1;
                spread_min = spread_min.min(field.field.values[lin]);
            }
            Ok(false) => {}
            Err(e) => result = Err(e),
        }
    });
    result?;
    let expansion = expansion_lhs >= expansion_rhs;
    let spread = cells == 0 || spread_min >= threshold;
    let verdict = match (expansion, spread) {
        (true, true) => Verdict::Both,
        (true, false) => Verdict::Expansion,
        (false, true) => Verdict::Spread,
        (false, false) => Verdict::Neither,
    };
    Ok(DichotomyReport {
        verdict,
        expansion_lhs,
        expansion_rhs,
        spread_min: if cells == 0 { f64::NAN } else { spread_min },
        spread_threshold: threshold,
        cells_checked: cells,
    })
}

/// Evaluates both halves of the almost-centered dichotomy on one body: does
/// the `lambda`-maximal function expand the body's mass by `(1+eta)`, and
/// does it dominate `(1-eps)` of the body average on the `(1-eps)`-shrunk
/// body? For small enough `eta` one of the two always holds; at a fixed
/// `eta` the outcome is reported, never asserted.
pub fn dichotomy_check(
    g: &GridFunction,
    k: &BodySpec,
    lambda: f64,
    eps: f64,
    eta: f64,
) -> Result<DichotomyReport> {
    check_dichotomy_params(lambda, eps, eta)?;
    let field = lambda_field(g, k.kind, lambda)?;
    let table = SummedTable::new(g);
    dichotomy_against_field(g, &table, &field, k, eps, eta)
}

/// Classification outcome for a whole cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReport {
    pub n_expansion: usize,
    pub n_spread: usize,
    /// Indices (into the cover's selection) satisfying neither half at the
    /// given `(eps, eta)`; logged, since no effective `eta` is known.
    pub neither: Vec<usize>,
    /// Worst signed excess of `t` over `(1+delta) lambda^{-n} M_lambda f`
    /// on `{psi1 > 0}`, relative to `t`; `-1` when vacuous. The expansion
    /// part of the overlap must vanish wherever the calibrated maximal
    /// function cannot reach `lambda^n t`.
    pub psi1_vanishing_worst: f64,
    pub psi1_vanishing_pass: bool,
    /// Largest relative defect of `|(1-eps)K| = (1-eps)^n |K|` over the
    /// spread bodies.
    pub shrink_volume_defect: f64,
}

/// Splits a level cover into expansion (`psi1`) and spread (`psi2`) parts
/// by the dichotomy at `(eps, eta)`, preferring spread when both hold, and
/// attaches the shrunk-body overlap `psi2_eps`. Also verifies the vanishing
/// property of `psi1`: wherever `t` exceeds `lambda^{-n} M_lambda f` (with
/// `(1+delta)` slack), no expansion body may cover the point — each
/// selected body `K` pushes `lambda^n <f>_K` onto `M_lambda f` through its
/// `1/lambda`-dilate, so the check folds the body averages into the field.
pub fn split_cover(
    g: &GridFunction,
    cover: &mut LevelSetCover,
    lambda: f64,
    eps: f64,
    eta: f64,
) -> Result<SplitReport> {
    check_dichotomy_params(lambda, eps, eta)?;
    let n = g.dim();
    let kind = cover.selected.first().map_or(BodyKind::Box, |b| b.kind);
    let field = lambda_field(g, kind, lambda)?;
    let table = SummedTable::new(g);

    let mut psi1 = Vec::new();
    let mut psi2 = Vec::new();
    let mut neither = Vec::new();
    let mut shrink_defect = 0.0f64;
    for (i, k) in cover.selected.iter().enumerate() {
        let rep = dichotomy_against_field(g, &table, &field, k, eps, eta)?;
        match rep.verdict {
            Verdict::Spread | Verdict::Both => {
                let shrunk = k.dilate(1.0 - eps)?;
                let expect = (1.0 - eps).powi(n as i32) * k.volume();
                shrink_defect =
                    shrink_defect.max(((shrunk.volume() - expect) / expect).abs());
                psi2.push(k.clone());
            }
            Verdict::Expansion => psi1.push(k.clone()),
            Verdict::Neither => neither.push(i),
        }
    }

    // Lower bound for the calibrated maximal function: the ladder field,
    // refined through the dilate trick by every selected body's average.
    let lam_n = lambda.powi(n as i32);
    let mut support = field.field.values.clone();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(g.cell_count());
    g.for_each_cell(|idx, _| centers.push(g.cell_center(idx)));
    for b in &cover.selected {
        let push = lam_n * body_average(g, &table, b, 4)?;
        for (lin, c) in centers.iter().enumerate() {
            if b.contains(c)? && push > support[lin] {
                support[lin] = push;
            }
        }
    }
    let psi1_field = overlap_field(g, &psi1)?;
    let mut worst = -1.0f64;
    for lin in 0..g.cell_count() {
        if psi1_field.values[lin] > 0.0 {
            worst = worst.max((cover.t - (1.0 + cover.delta) * support[lin] / lam_n) / cover.t);
        }
    }
    let report = SplitReport {
        n_expansion: psi1.len(),
        n_spread: psi2.len(),
        neither,
        psi1_vanishing_worst: worst,
        psi1_vanishing_pass: worst <= 0.0,
        shrink_volume_defect: shrink_defect,
    };
    cover.psi2_eps = Some(overlap_field(
        g,
        &psi2.iter().map(|b| b.dilate(1.0 - eps)).collect::<Result<Vec<_>>>()?,
    )?);
    cover.psi1 = Some(psi1);
    cover.psi2 = Some(psi2);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinReport {
    /// Integral of `f ln^+ f` over the region, after normalizing the
    /// region average to one.
    pub lhs: f64,
    /// Integral of the centered maximal function of the normalized density.
    pub rhs: f64,
    pub empirical_c: f64,
    pub region_volume: f64,
}

/// Entropy-versus-maximal check on a region: after normalizing `f` to unit
/// average over `k0`, compares the entropy integral of `f ln^+ f` with the
/// integral of the centered (cube) maximal function. The entropy side is
/// exact per cell; the maximal side uses the centered scale ladder, an
/// underestimate, so the reported ratio errs on the large side.
pub fn stein_check(g: &GridFunction, k0: &BodySpec) -> Result<SteinReport> {
    let table = SummedTable::new(g);
    let vol = k0.volume();
    let mass = body_average(g, &table, k0, 4)? * vol;
    if mass <= 0.0 {
        return Err(Error::DegenerateInput(
            "density has zero mass on the region".into(),
        ));
    }
    let total = g.mass();
    if total - mass > 1e-9 * total {
        return Err(Error::Config(format!(
            "density must be supported in the region: mass {total} vs {mass} inside"
        )));
    }
    let c = mass / vol;
    let scaled = g.map(|v| v / c)?;
    let cell = g.cell_volume();
    let mut lhs = 0.0;
    let mut result: Result<()> = Ok(());
    scaled.for_each_cell(|idx, lin| {
        if result.is_err() {
            return;
        }
        match k0.contains(&scaled.cell_center(idx)) {
            Ok(true) => {
                let v = scaled.values[lin];
                if v > 1.0 {
                    lhs += v * v.ln() * cell;
                }
            }
            Ok(false) => {}
            Err(e) => result = Err(e),
        }
    });
    result?;
    let m0 = maximal(
        &scaled,
        &OperatorSpec { family: BodyKind::Box, lambda: 0.0, mode: Mode::Ladder, ..OperatorSpec::default() },
    )?;
    let mtable = SummedTable::new(&m0.field);
    let rhs = body_average(&m0.field, &mtable, k0, 4)? * vol;
    Ok(SteinReport { lhs, rhs, empirical_c: lhs / rhs, region_volume: vol })
}

/// One level's contribution to the layer-cake integrals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRow {
    pub report: PsiReport,
    /// Total volume of the selected bodies.
    pub volume: f64,
    /// Total mass of `f` inside them.
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCakeReport {
    pub p: f64,
    pub rows: Vec<LayerRow>,
    /// Integral over the ladder of `t^(p-1) * volume(t)`.
    pub lhs: f64,
    /// Integral over the ladder of `t^(p-2) * mass(t)`.
    pub rhs: f64,
    /// Overlap bound used for the closed-form constant.
    pub besicovitch_bound: f64,
    /// `(1 + 1/((p-1) B))^(1/p)`.
    pub constant: f64,
}

impl LayerCakeReport {
    pub fn csv(&self) -> String {
        let mut s = String::from(PsiReport::csv_header());
        s.push('\n');
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.report.csv_row());
        }
        s
    }
}

/// The closed-form constant `(1 + 1/((p-1) B))^(1/p)` of the layer-cake
/// route, for an overlap bound `B`.
pub fn layer_cake_constant(p: f64, b: f64) -> Result<f64> {
    crate::error::check_exponent(p)?;
    if !(b.is_finite() && b >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "overlap bound {b} must be at least 1"
        )));
    }
    Ok((1.0 + 1.0 / ((p - 1.0) * b)).powf(1.0 / p))
}

/// Runs the level machinery over a ladder of levels and integrates both
/// sides of the exchange identity in `t` (trapezoid rule): the `t^(p-1)`
/// moment of the covered volume against the `t^(p-2)` moment of the
/// covered mass. Per-level property reports ride along as CSV-able rows.
pub fn layer_cake_report(
    g: &GridFunction,
    family: BodyKind,
    p: f64,
    t_grid: &[f64],
    delta: f64,
) -> Result<LayerCakeReport> {
    crate::error::check_exponent(p)?;
    if t_grid.is_empty() {
        return Err(Error::Config("empty level ladder".into()));
    }
    let mut ladder = t_grid.to_vec();
    for &t in &ladder {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidLevel(format!("level {t} must be positive")));
        }
    }
    ladder.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ladder.dedup();

    let m1 = maximal(
        g,
        &OperatorSpec { family: BodyKind::Box, lambda: 1.0, mode: Mode::Exact, ..OperatorSpec::default() },
    )?;
    let table = SummedTable::new(g);
    let mut rows = Vec::with_capacity(ladder.len());
    for &t in &ladder {
        let bodies = level_family(g, t, delta, family)?;
        let selected = besicovitch_extract(&bodies)?;
        let mut volume = 0.0;
        let mut mass = 0.0;
        for b in &selected {
            let v = b.volume();
            volume += v;
            mass += v * body_average(g, &table, b, 4)?;
        }
        let (_, report) = build_psi(g, t, delta, selected, Some(&m1))?;
        rows.push(LayerRow { report, volume, mass });
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for w in rows.windows(2) {
        let (t0, t1) = (w[0].report.t, w[1].report.t);
        let dt = t1 - t0;
        lhs += 0.5 * dt * (t0.powf(p - 1.0) * w[0].volume + t1.powf(p - 1.0) * w[1].volume);
        rhs += 0.5 * dt * (t0.powf(p - 2.0) * w[0].mass + t1.powf(p - 2.0) * w[1].mass);
    }
    let n = g.dim();
    let bound = 5f64.powi(n as i32);
    Ok(LayerCakeReport {
        p,
        rows,
        lhs,
        rhs,
        besicovitch_bound: bound,
        constant: layer_cake_constant(p, bound)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn indicator_1d() -> GridFunction {
        // chi_[0,1] on [-4, 5] with h = 1/32: cell boundaries align with 0, 1.
        GridFunction::from_fn(vec![288], vec![-4.0], 1.0 / 32.0, |x| {
            if x[0] > 0.0 && x[0] < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn level_family_rejects_bad_levels() {
        let g = indicator_1d();
        assert!(matches!(
            level_family(&g, 0.0, 1e-3, BodyKind::Box),
            Err(Error::InvalidLevel(_))
        ));
        assert!(matches!(
            level_family(&g, -1.0, 1e-3, BodyKind::Box),
            Err(Error::InvalidLevel(_))
        ));
        assert!(level_family(&g, 0.5, 1e-3, BodyKind::Ball2).is_err());
    }

    #[test]
    fn constant_above_level_gives_empty_family() {
        let g = GridFunction::constant(vec![32], vec![0.0], 0.125, 1.0).unwrap();
        assert!(level_family(&g, 2.0, 1e-3, BodyKind::Box).unwrap().is_empty());
    }

    #[test]
    fn indicator_level_half_has_length_two_bodies() {
        let g = indicator_1d();
        let bodies = level_family(&g, 0.5, 1e-3, BodyKind::Box).unwrap();
        assert!(!bodies.is_empty());
        let table = SummedTable::new(&g);
        for b in &bodies {
            let a = body_average(&g, &table, b, 1).unwrap();
            assert!((a - 0.5).abs() <= 0.5e-3, "avg {a}");
        }
        // The centered one: half-width 1 (length 2) at x = 0.5 + h/2-ish.
        let mid = bodies
            .iter()
            .min_by(|a, b| {
                (a.center[0] - 0.5).abs().partial_cmp(&(b.center[0] - 0.5).abs()).unwrap()
            })
            .unwrap();
        assert!(
            (mid.half_widths[0] - 1.0).abs() < 0.02,
            "half width {}",
            mid.half_widths[0]
        );
    }

    #[test]
    fn greedy_trace_on_eleven_intervals() {
        let bodies: Vec<BodySpec> = (0..11)
            .map(|i| BodySpec::cube(vec![i as f64 * 0.1], 0.5).unwrap())
            .collect();
        let selected = besicovitch_extract(&bodies).unwrap();
        assert_eq!(selected.len(), 2);
        assert_eq!(selected[0].center[0], 0.0);
        assert!((selected[1].center[0] - 0.6).abs() < 1e-15);
        // Overlap of the selection is at most 2 anywhere.
        for x in [-0.3, 0.0, 0.2, 0.5, 0.9, 1.1] {
            let c = selected.iter().filter(|b| b.contains(&[x]).unwrap()).count();
            assert!(c <= 2);
        }
        assert!(besicovitch_extract(&[]).unwrap().is_empty());
        let single = besicovitch_extract(&bodies[3..4]).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn random_squares_are_covered_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let bodies: Vec<BodySpec> = (0..1000)
            .map(|_| {
                BodySpec::cube(
                    vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)],
                    0.5,
                )
                .unwrap()
            })
            .collect();
        let selected = besicovitch_extract(&bodies).unwrap();
        for b in &bodies {
            assert!(
                selected.iter().any(|s| s.contains(&b.center).unwrap()),
                "center {:?} uncovered",
                b.center
            );
        }
        let worst = bodies
            .iter()
            .map(|b| selected.iter().filter(|s| s.contains(&b.center).unwrap()).count())
            .max()
            .unwrap();
        assert!(worst <= 25, "overlap {worst}");
    }

    #[test]
    fn psi_properties_hold_for_the_indicator() {
        let g = indicator_1d();
        let t = 0.5;
        let bodies = level_family(&g, t, 1e-3, BodyKind::Box).unwrap();
        let selected = besicovitch_extract(&bodies).unwrap();
        let (cover, report) = build_psi(&g, t, 1e-3, selected, None).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_psi <= 5.0);
        // psi >= 1 on the open unit interval.
        cover.psi.for_each_cell(|idx, lin| {
            let x = cover.psi.cell_center(idx)[0];
            if x > 0.01 && x < 0.99 {
                assert!(cover.psi.values[lin] >= 1.0, "uncovered at {x}");
            }
        });
        assert!(report.prop4_residual <= 1e-3 * report.prop4_lhs);
    }

    #[test]
    fn empty_selection_is_vacuous() {
        let g = indicator_1d();
        let (cover, report) = build_psi(&g, 2.0, 1e-3, Vec::new(), None).unwrap();
        assert!(cover.psi.values.iter().all(|&v| v == 0.0));
        assert!(report.pass);
        assert_eq!(report.prop4_lhs, 0.0);
        assert_eq!(report.prop4_rhs, 0.0);
    }

    #[test]
    fn random_2d_psi_suite() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for trial in 0..5 {
            let n = 24;
            let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let g =
                GridFunction::new(vec![n, n], vec![0.0, 0.0], 1.0 / n as f64, values).unwrap();
            let mut sorted = g.values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let t = sorted[(sorted.len() * 6) / 10].max(0.05);
            let bodies = level_family(&g, t, 1e-3, BodyKind::Box).unwrap();
            let selected = besicovitch_extract(&bodies).unwrap();
            let (_, report) = build_psi(&g, t, 1e-3, selected, None).unwrap();
            assert!(report.pass, "trial {trial}: {report:?}");
        }
    }

    #[test]
    fn constant_density_spreads_for_every_eps() {
        let g = GridFunction::constant(vec![16, 16], vec![0.0, 0.0], 0.125, 2.0).unwrap();
        let k = BodySpec::cube(vec![1.0, 1.0], 0.75).unwrap();
        for eps in [0.05, 0.2, 0.5, 0.9] {
            let rep = dichotomy_check(&g, &k, 0.5, eps, 0.1).unwrap();
            assert!(
                matches!(rep.verdict, Verdict::Spread | Verdict::Both),
                "eps {eps}: {rep:?}"
            );
            assert!(rep.spread_min >= rep.spread_threshold);
        }
    }

    #[test]
    fn corner_spike_expands() {
        // A point mass in the corner of K: the calibrated maximal function
        // spreads it over a neighborhood, so its integral over K grows.
        let n = 64;
        let g = GridFunction::from_fn(vec![n, n], vec![0.0, 0.0], 1.0 / n as f64, |x| {
            if x[0] < 0.05 && x[1] < 0.05 {
                100.0
            } else {
                0.01
            }
        })
        .unwrap();
        let k = BodySpec::new_box(vec![0.25, 0.25], vec![0.25, 0.25]).unwrap();
        let rep = dichotomy_check(&g, &k, 0.5, 0.1, 0.1).unwrap();
        assert!(
            matches!(rep.verdict, Verdict::Expansion | Verdict::Both),
            "{rep:?}"
        );
        assert!(rep.expansion_lhs >= rep.expansion_rhs);
    }

    #[test]
    fn dichotomy_validates_parameters() {
        let g = GridFunction::constant(vec![8], vec![0.0], 0.125, 1.0).unwrap();
        let k = BodySpec::cube(vec![0.5], 0.25).unwrap();
        assert!(dichotomy_check(&g, &k, 0.0, 0.1, 0.1).is_err());
        assert!(dichotomy_check(&g, &k, 1.5, 0.1, 0.1).is_err());
        assert!(dichotomy_check(&g, &k, 0.5, 0.0, 0.1).is_err());
        assert!(dichotomy_check(&g, &k, 0.5, 1.0, 0.1).is_err());
        assert!(dichotomy_check(&g, &k, 0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn split_classifies_and_psi1_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let n = 32;
        let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let g = GridFunction::new(vec![n, n], vec![0.0, 0.0], 1.0 / n as f64, values).unwrap();
        let t = 1.0;
        let bodies = level_family(&g, t, 1e-3, BodyKind::Box).unwrap();
        let selected = besicovitch_extract(&bodies).unwrap();
        let (mut cover, _) = build_psi(&g, t, 1e-3, selected, None).unwrap();
        let rep = split_cover(&g, &mut cover, 0.5, 0.1, 1e-3).unwrap();
        assert_eq!(
            rep.n_expansion + rep.n_spread + rep.neither.len(),
            cover.selected.len()
        );
        assert!(rep.psi1_vanishing_pass, "{rep:?}");
        assert!(rep.shrink_volume_defect <= 1e-12);
        assert!(cover.psi1.is_some() && cover.psi2.is_some());
        let eps_field = cover.psi2_eps.as_ref().unwrap();
        let psi2_max = {
            let f = overlap_field(&g, cover.psi2.as_ref().unwrap()).unwrap();
            f.values.iter().cloned().fold(0.0, f64::max)
        };
        let eps_max = eps_field.values.iter().cloned().fold(0.0, f64::max);
        assert!(eps_max <= psi2_max + 1e-12);
    }

    #[test]
    fn stein_entropy_of_two_level_density() {
        // f = 2 on the left half of K0 = [0,1]^2: normalized average is 1,
        // the entropy side is exactly ln 2 * |K0| / 2 * 2 = ln 2 * |K0|
        // (the cells at value 2 carry 2 ln 2 each over half the volume).
        let n = 32;
        let g = GridFunction::from_fn(vec![n, n], vec![0.0, 0.0], 1.0 / n as f64, |x| {
            if x[0] < 0.5 {
                2.0
            } else {
                0.0
            }
        })
        .unwrap();
        let k0 = BodySpec::new_box(vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let rep = stein_check(&g, &k0).unwrap();
        assert!((rep.lhs - 2.0f64.ln()).abs() < 1e-12, "lhs {}", rep.lhs);
        assert!(rep.rhs >= 1.0 - 1e-9, "rhs {}", rep.rhs);
        assert!(rep.empirical_c < 1.0);
    }

    #[test]
    fn stein_trivial_and_degenerate_cases() {
        let g = GridFunction::constant(vec![16], vec![0.0], 1.0 / 16.0, 3.0).unwrap();
        let k0 = BodySpec::cube(vec![0.5], 0.5).unwrap();
        let rep = stein_check(&g, &k0).unwrap();
        assert_eq!(rep.lhs, 0.0);
        let zero = GridFunction::constant(vec![16], vec![0.0], 1.0 / 16.0, 0.0).unwrap();
        assert!(matches!(stein_check(&zero, &k0), Err(Error::DegenerateInput(_))));
        // Mass outside the region is rejected.
        let wide = GridFunction::constant(vec![32], vec![0.0], 1.0 / 16.0, 1.0).unwrap();
        assert!(matches!(stein_check(&wide, &k0), Err(Error::Config(_))));
    }

    #[test]
    fn layer_cake_sides_agree_for_indicator() {
        let g = indicator_1d();
        let ladder: Vec<f64> = (0..30).map(|i| 0.03 * 1.12f64.powi(i)).collect();
        let rep = layer_cake_report(&g, BodyKind::Box, 2.0, &ladder, 1e-3).unwrap();
        assert!(rep.lhs > 0.0);
        let gap = (rep.lhs - rep.rhs).abs() / rep.lhs;
        assert!(gap <= 0.02, "sides {} vs {}", rep.lhs, rep.rhs);
        for row in &rep.rows {
            assert!(row.report.pass, "{row:?}");
        }
        let csv = rep.csv();
        assert!(csv.starts_with("t,"));
        assert_eq!(csv.lines().count(), rep.rows.len() + 1);
    }

    #[test]
    fn layer_cake_constant_and_edge_cases() {
        assert!((layer_cake_constant(2.0, 5.0).unwrap() - 1.2f64.sqrt()).abs() < 1e-15);
        let g = indicator_1d();
        assert!(matches!(
            layer_cake_report(&g, BodyKind::Box, 2.0, &[], 1e-3),
            Err(Error::Config(_))
        ));
        // Ladder entirely above max f: psi vanishes, both sides zero.
        let rep = layer_cake_report(&g, BodyKind::Box, 2.0, &[2.0, 3.0], 1e-3).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
    }
}
