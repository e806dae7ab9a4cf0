//! Maximal operators on grid functions.
//!
//! The central object is the lambda-calibrated maximal operator: for
//! `lambda` in `[0, 1]`,
//!
//! ```text
//! M_lambda f(x) = sup { avg_S f : S in family, x in lambda * S }
//! ```
//!
//! where `lambda * S` is the concentric rescaling of the body `S`. At
//! `lambda = 0` the point must be the center (the centered operator); at
//! `lambda = 1` the point may sit anywhere in the body (the uncentered
//! operator). Fields are evaluated at cell centers of the input grid, and
//! the input is treated as zero outside the grid.
//!
//! Three evaluation modes are provided:
//!
//! * [`Mode::Exact`] — the true continuum supremum for the box family at
//!   `lambda` 0 or 1. For an uncentered box average containing `x`, splitting
//!   the box at `x` shows the supremum is attained among boxes with `x` as a
//!   corner and the far corner on a cell boundary; for the centered operator
//!   the per-axis half-widths can be restricted to distances from `x` to cell
//!   boundaries. Both reductions are exact for step functions, so the field
//!   values are the continuum maximal function at cell centers up to
//!   floating-point rounding.
//! * [`Mode::Aligned`] — the supremum over cell-aligned boxes only, for any
//!   `lambda`. A lower bound for the continuum operator; cost grows quickly,
//!   so this is intended for small grids.
//! * [`Mode::Ladder`] — a geometric ladder of isotropic bodies centered at
//!   cell centers, for every family including metric balls. Guaranteed to
//!   dominate `f` pointwise and to stay below the continuum supremum for box
//!   bodies.
//!
//! Also here: the dyadic maximal operator over a cell-aligned root box, the
//! one-sided operator on the line, and exact tail completion of uncentered
//! norm ratios on the line ([`TailedRatio`]).

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{BodyKind, BodySpec};
use crate::error::{check_exponent, Error, Result};
use crate::grid::{next_index, strides_of, GridFunction, SummedTable};

/// Maximal operators act on nonnegative inputs; averages of signed data can
/// decrease under extension and break every monotonicity argument used here.
pub fn ensure_nonnegative(g: &GridFunction) -> Result<()> {
    if let Some(i) = g.values.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "maximal operators require nonnegative input; cell {i} is {}",
            g.values[i]
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && (0.0..=1.0).contains(&lambda)) {
        return Err(Error::InvalidParameter(format!(
            "calibration lambda = {lambda} must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// Geometric ladder of body scales (half-widths, in real units).
#[derive(Debug, Clone)]
pub struct LadderSpec {
    /// Successive scale ratio; must exceed 1.
    pub ratio: f64,
    /// Smallest half-width; defaults to `h/2` (a body inside its own cell),
    /// which guarantees `Mf >= f` pointwise.
    pub min_scale: Option<f64>,
    /// Largest half-width; defaults to the longest domain side, beyond which
    /// every body covers the whole grid from any center and averages only
    /// dilute further.
    pub max_scale: Option<f64>,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec { ratio: 2f64.powf(0.25), min_scale: None, max_scale: None }
    }
}

impl LadderSpec {
    /// Materializes the scale list for a grid.
    pub fn scales(&self, g: &GridFunction) -> Result<Vec<f64>> {
        if !(self.ratio.is_finite() && self.ratio > 1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "ladder ratio {} must exceed 1",
                self.ratio
            )));
        }
        let min = self.min_scale.unwrap_or(g.h / 2.0);
        let longest = g
            .shape
            .iter()
            .map(|&n| n as f64 * g.h)
            .fold(0.0, f64::max);
        let max = self.max_scale.unwrap_or(longest);
        if !(min.is_finite() && min > 0.0 && max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ladder scales [{min}, {max}] must be positive and finite"
            )));
        }
        // max < min yields an empty ladder; the operator then falls back to
        // the single-cell candidate alone.
        let mut scales = Vec::new();
        let mut s = min;
        while s <= max * (1.0 + 1e-12) {
            scales.push(s);
            s *= self.ratio;
            if scales.len() > 100_000 {
                return Err(Error::Config("ladder would exceed 100000 scales".into()));
            }
        }
        Ok(scales)
    }
}

/// How to evaluate the lambda-maximal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Aligned,
    Ladder,
}

/// Full description of a lambda-maximal computation.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub family: BodyKind,
    pub lambda: f64,
    pub mode: Mode,
    pub ladder: LadderSpec,
    /// Quadrature refinement for metric-ball boundary cells.
    pub subsample: usize,
    /// Record the body realizing the maximum at every cell.
    pub record_argmax: bool,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            family: BodyKind::Box,
            lambda: 1.0,
            mode: Mode::Exact,
            ladder: LadderSpec::default(),
            subsample: 4,
            record_argmax: false,
        }
    }
}

/// A computed maximal field, with optional per-cell maximizing bodies.
#[derive(Debug, Clone)]
pub struct MaximalField {
    pub field: GridFunction,
    pub argmax: Option<Vec<Option<BodySpec>>>,
}

impl MaximalField {
    fn from_values(g: &GridFunction, values: Vec<f64>, argmax: Option<Vec<Option<BodySpec>>>) -> Result<Self> {
        let field = GridFunction::new(g.shape.clone(), g.origin.clone(), g.h, values)?;
        Ok(MaximalField { field, argmax })
    }
}

/// Dispatches a lambda-maximal computation according to the spec.
///
/// In one dimension every body family degenerates to intervals, so the
/// family is silently treated as `Box` there.
pub fn maximal(g: &GridFunction, spec: &OperatorSpec) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    check_lambda(spec.lambda)?;
    let family = if g.dim() == 1 { BodyKind::Box } else { spec.family };
    match spec.mode {
        Mode::Exact => {
            if family != BodyKind::Box {
                return Err(Error::Config(
                    "exact mode supports the box family only; use ladder mode for balls".into(),
                ));
            }
            if spec.lambda == 1.0 {
                uncentered_box_maximal(g, spec.record_argmax)
            } else if spec.lambda == 0.0 {
                centered_box_maximal(g, spec.record_argmax)
            } else {
                Err(Error::Config(
                    "exact mode supports lambda = 0 or 1; use aligned or ladder mode".into(),
                ))
            }
        }
        Mode::Aligned => {
            if family != BodyKind::Box {
                return Err(Error::Config("aligned mode supports the box family only".into()));
            }
            aligned_lambda_box_maximal(g, spec.lambda, spec.record_argmax)
        }
        Mode::Ladder => ladder_maximal(g, family, spec.lambda, &spec.ladder, spec.subsample, spec.record_argmax),
    }
}

// ---------------------------------------------------------------------------
// Exact uncentered box maximal
// ---------------------------------------------------------------------------

/// 1d prefix sums of cell values: `s[u] = sum of values[0..u]`.
pub(crate) fn prefix_1d(values: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; values.len() + 1];
    for (i, &v) in values.iter().enumerate() {
        s[i + 1] = s[i] + v;
    }
    s
}

/// Exact uncentered interval maximal at cell centers, in cell units.
///
/// For every boundary index `u`, `(s[u] - s(x)) / (u - x)` is the average of
/// the interval between `x` and the boundary; the continuum supremum over all
/// intervals containing `x` equals the maximum of these one-sided averages
/// because any interval splits at `x` into two one-sided ones. Returns the
/// field and, per cell, the maximizing boundary pair `(lo, hi)`.
fn uncentered_core_1d(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = values.len();
    let s = prefix_1d(values);
    let out: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 + 0.5;
            let sx = 0.5 * (s[i] + s[i + 1]);
            // The own-cell value is attained by the half-cell [x, i + 1].
            let mut best = values[i];
            let mut arg = i + 1;
            for (u, &su) in s.iter().enumerate() {
                let avg = (su - sx) / (u as f64 - x);
                if avg > best {
                    best = avg;
                    arg = u;
                }
            }
            (best, arg)
        })
        .collect();
    let mut field = Vec::with_capacity(n);
    let mut args = Vec::with_capacity(n);
    for (v, a) in out {
        field.push(v);
        args.push(a);
    }
    (field, args)
}

/// The maximizing interval runs from the cell center to a boundary.
fn interval_body(g: &GridFunction, i: usize, u: usize) -> BodySpec {
    let x = g.origin[0] + (i as f64 + 0.5) * g.h;
    let pb = g.origin[0] + u as f64 * g.h;
    let (lo, hi) = (pb.min(x), pb.max(x));
    BodySpec {
        kind: BodyKind::Box,
        center: vec![0.5 * (lo + hi)],
        half_widths: vec![0.5 * (hi - lo)],
    }
}

/// Exact continuum uncentered box maximal function, sampled at cell centers.
pub fn uncentered_box_maximal(g: &GridFunction, record_argmax: bool) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    match g.dim() {
        1 => {
            let (field, args) = uncentered_core_1d(&g.values);
            let argmax = record_argmax.then(|| {
                args.iter().enumerate().map(|(i, &u)| Some(interval_body(g, i, u))).collect()
            });
            MaximalField::from_values(g, field, argmax)
        }
        2 => uncentered_box_2d(g, record_argmax),
        _ => uncentered_box_generic(g, record_argmax),
    }
}

fn uncentered_box_2d(g: &GridFunction, record_argmax: bool) -> Result<MaximalField> {
    let (n0, n1) = (g.shape[0], g.shape[1]);
    let st = n1 + 1;
    // Corner sums over cells: s[u * st + v] = sum over cells below (u, v).
    let mut s = vec![0.0; (n0 + 1) * st];
    for i in 0..n0 {
        for j in 0..n1 {
            s[(i + 1) * st + j + 1] =
                g.values[i * n1 + j] + s[i * st + j + 1] + s[(i + 1) * st + j] - s[i * st + j];
        }
    }

    let results: Vec<(f64, [usize; 2])> = (0..n0 * n1)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n1 + 1], vec![0.0; n0 + 1]),
            |(r, c), lin| {
                let i = lin / n1;
                let j = lin % n1;
                let x0 = i as f64 + 0.5;
                let x1 = j as f64 + 0.5;
                // Corner sums with the first (resp. second) coordinate frozen
                // at the cell center: averages of adjacent integer corners.
                for (v, rv) in r.iter_mut().enumerate() {
                    *rv = 0.5 * (s[i * st + v] + s[(i + 1) * st + v]);
                }
                for (u, cu) in c.iter_mut().enumerate() {
                    *cu = 0.5 * (s[u * st + j] + s[u * st + j + 1]);
                }
                let pxx = 0.5 * (r[j] + r[j + 1]);
                // The own-cell value is attained by the quarter cell with
                // far corner (i + 1, j + 1).
                let mut best = g.values[lin];
                let mut arg = [i + 1, j + 1];
                for u in 0..=n0 {
                    let d0 = u as f64 - x0;
                    let cu = c[u];
                    let row = &s[u * st..u * st + st];
                    for v in 0..=n1 {
                        // Signed integral between x and the corner (u, v)
                        // over signed volume: positive in every quadrant.
                        let num = row[v] - r[v] - cu + pxx;
                        let den = d0 * (v as f64 - x1);
                        let avg = num / den;
                        if avg > best {
                            best = avg;
                            arg = [u, v];
                        }
                    }
                }
                (best, arg)
            },
        )
        .collect();

    let mut field = Vec::with_capacity(n0 * n1);
    let mut argmax = record_argmax.then(|| Vec::with_capacity(n0 * n1));
    for (lin, (val, a)) in results.into_iter().enumerate() {
        field.push(val);
        if let Some(am) = argmax.as_mut() {
            let i = lin / n1;
            let j = lin % n1;
            let x0 = g.origin[0] + (i as f64 + 0.5) * g.h;
            let x1 = g.origin[1] + (j as f64 + 0.5) * g.h;
            let p0 = g.origin[0] + a[0] as f64 * g.h;
            let p1 = g.origin[1] + a[1] as f64 * g.h;
            am.push(Some(box_from_bounds(
                &[p0.min(x0), p1.min(x1)],
                &[p0.max(x0), p1.max(x1)],
            )));
        }
    }
    MaximalField::from_values(g, field, argmax)
}

/// Corner sum of the prefix lattice where axes in `center_mask` are frozen at
/// the cell center (averaging the two adjacent integer corners per frozen
/// axis) and the rest sit at integer boundaries `b`.
fn mixed_corner(
    sums: &SummedTable,
    cell: &[usize],
    b: &[usize],
    center_mask: usize,
    scratch: &mut Vec<usize>,
) -> f64 {
    let dim = cell.len();
    let free: Vec<usize> = (0..dim).filter(|a| center_mask & (1 << a) != 0).collect();
    let mut acc = 0.0;
    for pick in 0..(1usize << free.len()) {
        scratch.clear();
        scratch.extend_from_slice(b);
        for (t, &a) in free.iter().enumerate() {
            scratch[a] = cell[a] + ((pick >> t) & 1);
        }
        acc += sums.corner(scratch);
    }
    acc / (1usize << free.len()) as f64
}

fn uncentered_box_generic(g: &GridFunction, record_argmax: bool) -> Result<MaximalField> {
    let dim = g.dim();
    let table = SummedTable::new(g);
    let bshape: Vec<usize> = g.shape.iter().map(|&n| n + 1).collect();
    let mut field = Vec::with_capacity(g.cell_count());
    let mut arg_boxes: Vec<Option<BodySpec>> = Vec::new();

    let mut cell = vec![0usize; dim];
    let mut scratch = Vec::with_capacity(dim);
    loop {
        let lin = g.linear_index(&cell);
        let mut best = g.values[lin];
        let mut best_b: Option<Vec<usize>> = None;
        let mut b = vec![0usize; dim];
        loop {
            let mut num = 0.0;
            let mut den = 1.0;
            for a in 0..dim {
                den *= b[a] as f64 - (cell[a] as f64 + 0.5);
            }
            for mask in 0..(1usize << dim) {
                // mask bit set = this axis frozen at the cell center.
                let frozen = mask.count_ones() as i32;
                let sign = if frozen % 2 == 0 { 1.0 } else { -1.0 };
                num += sign * mixed_corner(&table, &cell, &b, mask, &mut scratch);
            }
            let avg = num / den;
            if avg > best {
                best = avg;
                best_b = Some(b.clone());
            }
            if !next_index(&mut b, &bshape) {
                break;
            }
        }
        field.push(best);
        if record_argmax {
            arg_boxes.push(Some(match best_b {
                None => own_cell_box(g, &cell),
                Some(bb) => {
                    let mut lo = vec![0.0; dim];
                    let mut hi = vec![0.0; dim];
                    for a in 0..dim {
                        let x = g.origin[a] + (cell[a] as f64 + 0.5) * g.h;
                        let pb = g.origin[a] + bb[a] as f64 * g.h;
                        lo[a] = pb.min(x);
                        hi[a] = pb.max(x);
                    }
                    box_from_bounds(&lo, &hi)
                }
            }));
        }
        if !next_index(&mut cell, &g.shape) {
            break;
        }
    }
    MaximalField::from_values(g, field, record_argmax.then_some(arg_boxes))
}

fn own_cell_box(g: &GridFunction, cell: &[usize]) -> BodySpec {
    BodySpec {
        kind: BodyKind::Box,
        center: g.cell_center(cell),
        half_widths: vec![g.h / 2.0; g.dim()],
    }
}

fn box_from_bounds(lo: &[f64], hi: &[f64]) -> BodySpec {
    BodySpec {
        kind: BodyKind::Box,
        center: lo.iter().zip(hi).map(|(&a, &b)| 0.5 * (a + b)).collect(),
        half_widths: lo.iter().zip(hi).map(|(&a, &b)| 0.5 * (b - a)).collect(),
    }
}

// ---------------------------------------------------------------------------
// Exact centered box maximal
// ---------------------------------------------------------------------------

/// Exact centered box maximal: supremum over boxes centered at the cell
/// center with free per-axis half-widths. For step data the supremum is
/// attained with every half-width equal to a distance from the center to a
/// cell boundary (both endpoints cross boundaries simultaneously there), so
/// radii range over `(k + 1/2) h`. Volume never clamps: mass outside the grid
/// is zero but still dilutes.
pub fn centered_box_maximal(g: &GridFunction, record_argmax: bool) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    let dim = g.dim();
    let table = SummedTable::new(g);

    let cells: Vec<usize> = (0..g.cell_count()).collect();
    let results: Vec<(f64, Vec<f64>)> = cells
        .par_iter()
        .map_init(
            || (vec![0usize; dim], vec![0usize; dim], vec![0usize; dim], vec![0usize; dim]),
            |(cell, k, kshape, corner), &lin| {
                let m = g.multi_index(lin);
                cell.copy_from_slice(&m);
                for a in 0..dim {
                    kshape[a] = cell[a].max(g.shape[a] - 1 - cell[a]) + 1;
                    k[a] = 0;
                }
                let mut best = g.values[lin];
                let mut best_r: Vec<f64> = vec![0.5; dim];
                loop {
                    let mut den = 1.0;
                    for a in 0..dim {
                        den *= 2.0 * (k[a] as f64 + 0.5);
                    }
                    // Inclusion-exclusion over clamped integer corners.
                    let mut num = 0.0;
                    for mask in 0..(1usize << dim) {
                        let mut sign = 1.0;
                        for a in 0..dim {
                            if mask & (1 << a) != 0 {
                                corner[a] = (cell[a] + 1 + k[a]).min(g.shape[a]);
                            } else {
                                corner[a] = cell[a].saturating_sub(k[a]);
                                sign = -sign;
                            }
                        }
                        num += sign * table.corner(corner);
                    }
                    let avg = num / den;
                    if avg > best {
                        best = avg;
                        for a in 0..dim {
                            best_r[a] = k[a] as f64 + 0.5;
                        }
                    }
                    if !next_index(k, kshape) {
                        break;
                    }
                }
                (best, best_r)
            },
        )
        .collect();

    let mut field = Vec::with_capacity(g.cell_count());
    let mut argmax = record_argmax.then(|| Vec::with_capacity(g.cell_count()));
    for (lin, (val, radii)) in results.into_iter().enumerate() {
        field.push(val);
        if let Some(am) = argmax.as_mut() {
            let cell = g.multi_index(lin);
            am.push(Some(BodySpec {
                kind: BodyKind::Box,
                center: g.cell_center(&cell),
                half_widths: radii.iter().map(|r| r * g.h).collect(),
            }));
        }
    }
    MaximalField::from_values(g, field, argmax)
}

// ---------------------------------------------------------------------------
// Aligned lambda boxes
// ---------------------------------------------------------------------------

/// Supremum over cell-aligned boxes `S` with the cell center inside
/// `lambda * S`. Exhaustive enumeration: intended for small grids.
pub fn aligned_lambda_box_maximal(
    g: &GridFunction,
    lambda: f64,
    record_argmax: bool,
) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    check_lambda(lambda)?;
    let dim = g.dim();
    let table = SummedTable::new(g);
    let mut field = g.values.clone();
    let mut args: Vec<Option<BodySpec>> =
        (0..g.cell_count()).map(|lin| Some(own_cell_box(g, &g.multi_index(lin)))).collect();

    // Enumerate boxes by (lo, size) per axis, in cell units.
    let mut lo = vec![0usize; dim];
    let mut hi = vec![0usize; dim];
    let mut cell = vec![0usize; dim];
    let mut cell_lo = vec![0usize; dim];
    let mut cell_shape = vec![0usize; dim];
    loop {
        // lo is the lower boundary multi-index; iterate upper boundaries.
        for a in 0..dim {
            hi[a] = lo[a] + 1;
        }
        'boxes: loop {
            let sum = table.box_sum_cells(&lo, &hi)?;
            let mut vol = 1.0;
            for a in 0..dim {
                vol *= (hi[a] - lo[a]) as f64;
            }
            let avg = sum / vol;
            // Cells whose centers lie in lambda * box: |x - c| <= lambda * r
            // per axis, with x = i + 1/2, c = (lo + hi)/2, r = (hi - lo)/2.
            // At lambda = 0 the dilate degenerates to the center point, which
            // on a grid means "the box center falls in the cell" (reach 1/2).
            let mut any = true;
            for a in 0..dim {
                let c = 0.5 * (lo[a] + hi[a]) as f64;
                let r = 0.5 * (hi[a] - lo[a]) as f64;
                let reach = if lambda == 0.0 { 0.5 } else { lambda * r } + 1e-9;
                let imin = (c - reach - 0.5).ceil().max(0.0) as usize;
                let imax_f = (c + reach - 0.5).floor();
                if imax_f < imin as f64 {
                    any = false;
                    break;
                }
                let imax = (imax_f as usize).min(g.shape[a] - 1);
                if imin > imax {
                    any = false;
                    break;
                }
                cell_lo[a] = imin;
                cell_shape[a] = imax - imin + 1;
            }
            if any {
                for a in 0..dim {
                    cell[a] = 0;
                }
                loop {
                    let mut lin = 0usize;
                    let strides = strides_of(&g.shape);
                    for a in 0..dim {
                        lin += (cell_lo[a] + cell[a]) * strides[a];
                    }
                    if avg > field[lin] {
                        field[lin] = avg;
                        if record_argmax {
                            let lo_r: Vec<f64> =
                                (0..dim).map(|a| g.origin[a] + lo[a] as f64 * g.h).collect();
                            let hi_r: Vec<f64> =
                                (0..dim).map(|a| g.origin[a] + hi[a] as f64 * g.h).collect();
                            args[lin] = Some(box_from_bounds(&lo_r, &hi_r));
                        }
                    }
                    if !next_index(&mut cell, &cell_shape) {
                        break;
                    }
                }
            }
            // Advance hi like an odometer bounded by the shape.
            let mut a = dim;
            loop {
                if a == 0 {
                    break 'boxes;
                }
                a -= 1;
                hi[a] += 1;
                if hi[a] <= g.shape[a] {
                    break;
                }
                hi[a] = lo[a] + 1;
            }
        }
        // Advance lo over cells (lower boundary can be 0..shape-1).
        if !next_index(&mut lo, &g.shape) {
            break;
        }
    }
    MaximalField::from_values(g, field, record_argmax.then_some(args))
}

// ---------------------------------------------------------------------------
// Ladder mode
// ---------------------------------------------------------------------------

/// Translation-invariant quadrature kernel of a metric ball of radius `rho`
/// (in cell units) centered at a cell center. Cells entirely inside the ball
/// form contiguous runs along the last axis (weight 1, summed via row prefix
/// sums); boundary cells carry fractional weights from subcell-center
/// counting. The denominator of the kernel average is the total weight, so a
/// constant function averages to itself exactly wherever the kernel stays in
/// the grid.
struct BallKernel {
    /// (offset of the row on leading axes, first, last) full-weight run.
    runs: Vec<(Vec<i64>, i64, i64)>,
    /// (full offset, weight) for partially covered cells.
    partials: Vec<(Vec<i64>, f64)>,
    total_weight: f64,
}

fn kind_norm(kind: BodyKind, v: &[f64]) -> f64 {
    match kind {
        BodyKind::Ball1 => v.iter().map(|x| x.abs()).sum(),
        BodyKind::Ball2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        BodyKind::BallInf | BodyKind::Box => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

fn ball_kernel(kind: BodyKind, dim: usize, rho: f64, subsample: usize) -> BallKernel {
    let kmax = rho.ceil() as i64;
    let mut runs = Vec::new();
    let mut partials = Vec::new();
    let mut total_weight = 0.0;

    let far = |coords: &[f64]| -> f64 {
        let v: Vec<f64> = coords.iter().map(|c| c.abs() + 0.5).collect();
        kind_norm(kind, &v)
    };
    let near = |coords: &[f64]| -> f64 {
        let v: Vec<f64> = coords.iter().map(|c| (c.abs() - 0.5).max(0.0)).collect();
        kind_norm(kind, &v)
    };
    let weight = |cell: &[f64]| -> f64 {
        let mut count = 0u64;
        let sub = subsample as i64;
        let mut sigma = vec![0i64; dim];
        let total = (subsample as u64).pow(dim as u32);
        let mut node = vec![0.0f64; dim];
        for _ in 0..total {
            for a in 0..dim {
                node[a] = cell[a] - 0.5 + (sigma[a] as f64 + 0.5) / sub as f64;
            }
            if kind_norm(kind, &node) <= rho {
                count += 1;
            }
            // Odometer over subcells.
            for a in (0..dim).rev() {
                sigma[a] += 1;
                if sigma[a] < sub {
                    break;
                }
                sigma[a] = 0;
            }
        }
        count as f64 / total as f64
    };

    let pshape = vec![(2 * kmax + 1) as usize; dim.saturating_sub(1)];
    let mut pidx = vec![0usize; dim.saturating_sub(1)];
    let mut prefix = vec![0.0f64; dim.saturating_sub(1)];
    loop {
        for a in 0..dim - 1 {
            prefix[a] = pidx[a] as i64 as f64 - kmax as f64;
        }
        // Largest |t| with the cell fully inside; then partial cells beyond.
        let mut full_hi: i64 = -1;
        let mut cellc = prefix.clone();
        cellc.push(0.0);
        for t in 0..=kmax {
            *cellc.last_mut().unwrap() = t as f64;
            if far(&cellc) <= rho {
                full_hi = t;
            } else {
                break;
            }
        }
        if full_hi >= 0 {
            let pref: Vec<i64> = prefix.iter().map(|&p| p as i64).collect();
            runs.push((pref, -full_hi, full_hi));
            total_weight += (2 * full_hi + 1) as f64;
        }
        for t in (full_hi + 1).max(0)..=(kmax + 1) {
            *cellc.last_mut().unwrap() = t as f64;
            if near(&cellc) > rho {
                break;
            }
            let w = weight(&cellc);
            if w > 0.0 {
                let mut off: Vec<i64> = prefix.iter().map(|&p| p as i64).collect();
                off.push(t);
                partials.push((off.clone(), w));
                total_weight += w;
                if t > 0 {
                    // Mirror in the last axis.
                    *off.last_mut().unwrap() = -t;
                    partials.push((off, w));
                    total_weight += w;
                }
            }
        }
        if dim == 1 || !next_index(&mut pidx, &pshape) {
            break;
        }
    }
    BallKernel { runs, partials, total_weight }
}

/// Applies a ball kernel at every cell: numerator sums in-grid mass, the
/// denominator is the full kernel weight (zero extension dilutes).
fn apply_ball_kernel(values: &[f64], shape: &[usize], kernel: &BallKernel) -> Vec<f64> {
    let targets: Vec<usize> = (0..values.len()).collect();
    apply_ball_kernel_at(values, shape, kernel, &targets)
}

/// Kernel averages at the given linear cell indices only.
fn apply_ball_kernel_at(
    values: &[f64],
    shape: &[usize],
    kernel: &BallKernel,
    targets: &[usize],
) -> Vec<f64> {
    let dim = shape.len();
    let last = shape[dim - 1];
    let n_rows: usize = shape[..dim - 1].iter().product::<usize>().max(1);
    // Per-row prefix sums along the last axis.
    let mut pref = vec![0.0f64; n_rows * (last + 1)];
    for row in 0..n_rows {
        let base = row * last;
        let pbase = row * (last + 1);
        for k in 0..last {
            pref[pbase + k + 1] = pref[pbase + k] + values[base + k];
        }
    }
    let row_strides = strides_of(&shape[..dim - 1]);

    targets
        .par_iter()
        .copied()
        .map_init(
            || vec![0usize; dim],
            |multi, lin| {
                // Decompose lin into the multi-index.
                let mut rem = lin;
                let strides = strides_of(shape);
                for a in 0..dim {
                    multi[a] = rem / strides[a];
                    rem %= strides[a];
                }
                let c_last = multi[dim - 1] as i64;
                let mut acc = 0.0;
                'runs: for (pre, lo, hi) in &kernel.runs {
                    let mut row = 0usize;
                    for a in 0..dim - 1 {
                        let c = multi[a] as i64 + pre[a];
                        if c < 0 || c as usize >= shape[a] {
                            continue 'runs;
                        }
                        row += c as usize * row_strides[a];
                    }
                    let a = (c_last + lo).max(0) as usize;
                    let b = ((c_last + hi).min(last as i64 - 1) + 1) as usize;
                    if a < b {
                        let pbase = row * (last + 1);
                        acc += pref[pbase + b] - pref[pbase + a];
                    }
                }
                'parts: for (off, w) in &kernel.partials {
                    let mut idx = 0usize;
                    let strides = strides_of(shape);
                    for a in 0..dim {
                        let c = multi[a] as i64 + off[a];
                        if c < 0 || c as usize >= shape[a] {
                            continue 'parts;
                        }
                        idx += c as usize * strides[a];
                    }
                    acc += w * values[idx];
                }
                acc / kernel.total_weight
            },
        )
        .collect()
}

/// Sliding window maximum with radius `w` along one line.
fn sliding_max_line(src: &[f64], dst: &mut [f64], w: usize) {
    let n = src.len();
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut r = 0usize;
    for i in 0..n {
        let hi = (i + w).min(n - 1);
        while r <= hi {
            while let Some(&b) = dq.back() {
                if src[b] <= src[r] {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            dq.push_back(r);
            r += 1;
        }
        let lo = i.saturating_sub(w);
        while let Some(&f) = dq.front() {
            if f < lo {
                dq.pop_front();
            } else {
                break;
            }
        }
        dst[i] = src[*dq.front().unwrap()];
    }
}

/// In-place sliding max with radius `w` along `axis`.
fn sliding_max_axis(values: &mut [f64], shape: &[usize], axis: usize, w: usize) {
    if w == 0 {
        return;
    }
    let strides = strides_of(shape);
    let stride = strides[axis];
    let len = shape[axis];
    let total = values.len();
    let mut line = vec![0.0f64; len];
    let mut out = vec![0.0f64; len];
    for base in 0..total {
        if (base / stride) % len != 0 {
            continue;
        }
        for i in 0..len {
            line[i] = values[base + i * stride];
        }
        sliding_max_line(&line, &mut out, w);
        for i in 0..len {
            values[base + i * stride] = out[i];
        }
    }
}

/// Window maximum over offsets `d` with `|d|` (in the window norm) at most
/// `wrho` cells, for 2d ball windows: per leading offset, a sliding max with
/// the corresponding row width.
fn ball_window_max_2d(field: &[f64], shape: &[usize], kind: BodyKind, wrho: f64) -> Vec<f64> {
    let (n0, n1) = (shape[0], shape[1]);
    let k0 = (wrho + 1e-12).floor() as i64;
    // Row half-widths per |leading offset|.
    let widths: Vec<usize> = (0..=k0)
        .map(|d0| {
            let rem = match kind {
                BodyKind::Ball2 => (wrho * wrho - (d0 * d0) as f64).max(0.0).sqrt(),
                BodyKind::Ball1 => wrho - d0 as f64,
                _ => wrho,
            };
            (rem + 1e-12).floor().max(0.0) as usize
        })
        .collect();
    // Sliding max along axis 1 once per distinct width.
    let mut by_width: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for &w in &widths {
        by_width.entry(w).or_insert_with(|| {
            let mut buf = field.to_vec();
            sliding_max_axis(&mut buf, shape, 1, w);
            buf
        });
    }
    let mut out = vec![f64::NEG_INFINITY; field.len()];
    for (i0, row_out) in out.chunks_mut(n1).enumerate() {
        for (ad0, &w) in widths.iter().enumerate() {
            for sgn in [-1i64, 1] {
                if ad0 == 0 && sgn == 1 {
                    continue;
                }
                let src0 = i0 as i64 + sgn * ad0 as i64;
                if src0 < 0 || src0 as usize >= n0 {
                    continue;
                }
                let src = &by_width[&w][src0 as usize * n1..(src0 as usize + 1) * n1];
                for (o, &s) in row_out.iter_mut().zip(src) {
                    if s > *o {
                        *o = s;
                    }
                }
            }
        }
    }
    out
}

/// Lambda-maximal over a geometric ladder of isotropic bodies centered at
/// cell centers. See the module docs for the approximation guarantees.
pub fn ladder_maximal(
    g: &GridFunction,
    family: BodyKind,
    lambda: f64,
    ladder: &LadderSpec,
    subsample: usize,
    record_argmax: bool,
) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    check_lambda(lambda)?;
    if subsample == 0 {
        return Err(Error::InvalidParameter("subsample must be >= 1".into()));
    }
    let dim = g.dim();
    let family = if dim == 1 { BodyKind::Box } else { family };
    let is_box_like = matches!(family, BodyKind::Box | BodyKind::BallInf);
    if !is_box_like && dim > 3 {
        return Err(Error::Config("ball ladders are supported in dimensions 1..3".into()));
    }
    if !is_box_like && dim == 3 && lambda > 0.0 {
        return Err(Error::Config(
            "ball ladders with lambda > 0 are supported in dimensions 1..2; use lambda = 0 in 3d"
                .into(),
        ));
    }
    let scales = ladder.scales(g)?;
    let table = is_box_like.then(|| SummedTable::new(g));

    // Start from f itself: bodies shrinking to the point are admissible for
    // every lambda, so M f >= f is part of the operator, not a convention.
    let mut best = g.values.clone();
    let mut best_arg: Vec<Option<BodySpec>> = if record_argmax {
        (0..g.cell_count())
            .map(|lin| {
                let cell = g.multi_index(lin);
                let center = g.cell_center(&cell);
                Some(match family {
                    BodyKind::Box => own_cell_box(g, &cell),
                    kind => BodySpec { kind, center, half_widths: vec![g.h / 2.0; dim] },
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut scratch_lo = vec![0.0f64; dim];
    let mut scratch_hi = vec![0.0f64; dim];
    for &s in &scales {
        // Per-scale average field at all centers.
        let field_s: Vec<f64> = if is_box_like {
            let table = table.as_ref().unwrap();
            let vol = (2.0 * s).powi(dim as i32);
            (0..g.cell_count())
                .map(|lin| {
                    let cell = g.multi_index(lin);
                    let c = g.cell_center(&cell);
                    for a in 0..dim {
                        scratch_lo[a] = c[a] - s;
                        scratch_hi[a] = c[a] + s;
                    }
                    table.box_integral(&scratch_lo, &scratch_hi).map(|int| int / vol)
                })
                .collect::<Result<Vec<f64>>>()?
        } else {
            let kernel = ball_kernel(family, dim, s / g.h, subsample);
            apply_ball_kernel(&g.values, &g.shape, &kernel)
        };

        if record_argmax {
            // Slow path: explicit window offsets so the maximizing center is
            // known exactly.
            let wrho = lambda * s / g.h;
            let kw = (wrho + 1e-12).floor() as i64;
            let mut offsets: Vec<Vec<i64>> = Vec::new();
            let oshape = vec![(2 * kw + 1) as usize; dim];
            let mut oid = vec![0usize; dim];
            loop {
                let off: Vec<i64> = oid.iter().map(|&i| i as i64 - kw).collect();
                let offr: Vec<f64> = off.iter().map(|&o| o as f64).collect();
                if kind_norm(family, &offr) <= wrho + 1e-12 {
                    offsets.push(off);
                }
                if !next_index(&mut oid, &oshape) {
                    break;
                }
            }
            let strides = strides_of(&g.shape);
            for lin in 0..g.cell_count() {
                let multi = g.multi_index(lin);
                for off in &offsets {
                    let mut src = 0usize;
                    let mut ok = true;
                    for a in 0..dim {
                        let c = multi[a] as i64 + off[a];
                        if c < 0 || c as usize >= g.shape[a] {
                            ok = false;
                            break;
                        }
                        src += c as usize * strides[a];
                    }
                    if ok && field_s[src] > best[lin] {
                        best[lin] = field_s[src];
                        let src_multi = g.multi_index(src);
                        let center = g.cell_center(&src_multi);
                        best_arg[lin] = Some(BodySpec {
                            kind: family,
                            center,
                            half_widths: vec![s; dim],
                        });
                    }
                }
            }
        } else {
            let windowed: Vec<f64> = if lambda == 0.0 {
                field_s
            } else if is_box_like {
                let w = (lambda * s / g.h + 1e-12).floor() as usize;
                let mut buf = field_s;
                for a in 0..dim {
                    sliding_max_axis(&mut buf, &g.shape, a, w);
                }
                buf
            } else if dim == 1 {
                let w = (lambda * s / g.h + 1e-12).floor() as usize;
                let mut buf = field_s;
                sliding_max_axis(&mut buf, &g.shape, 0, w);
                buf
            } else {
                ball_window_max_2d(&field_s, &g.shape, family, lambda * s / g.h)
            };
            for (b, w) in best.iter_mut().zip(&windowed) {
                if *w > *b {
                    *b = *w;
                }
            }
        }
    }
    MaximalField::from_values(g, best, record_argmax.then_some(best_arg))
}

/// Centered metric-ball maximal restricted to radii that keep the ball inside
/// the grid, with `f` itself always a candidate. On functions defined by
/// off-grid data this avoids polluting averages with the artificial zero
/// extension; used to test mean-value inequalities of superharmonic data.
///
/// When `region` is given, only cells whose centers lie in that box receive
/// ball candidates (the rest keep `f`), which keeps large grids affordable.
pub fn centered_ball_field_interior(
    g: &GridFunction,
    kind: BodyKind,
    ladder: &LadderSpec,
    subsample: usize,
    region: Option<(&[f64], &[f64])>,
) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    if kind == BodyKind::Box {
        return Err(Error::Config("interior centered field expects a ball family".into()));
    }
    if g.dim() > 3 {
        return Err(Error::Config("ball kernels are supported in dimensions 1..3".into()));
    }
    if subsample == 0 {
        return Err(Error::InvalidParameter("subsample must be >= 1".into()));
    }
    let scales = ladder.scales(g)?;
    let dim = g.dim();
    let lo = g.domain_lo();
    let hi = g.domain_hi();
    if let Some((rlo, rhi)) = region {
        if rlo.len() != dim || rhi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rlo.len().max(rhi.len()),
            });
        }
    }

    // Distance from each candidate cell center to the grid boundary; a radius
    // is admissible iff the ball stays inside the grid.
    let mut cells = Vec::new();
    let mut dist = Vec::new();
    'cells: for lin in 0..g.cell_count() {
        let multi = g.multi_index(lin);
        let x = g.cell_center(&multi);
        if let Some((rlo, rhi)) = region {
            for a in 0..dim {
                if x[a] < rlo[a] || x[a] > rhi[a] {
                    continue 'cells;
                }
            }
        }
        let mut d = f64::INFINITY;
        for a in 0..dim {
            d = d.min(x[a] - lo[a]).min(hi[a] - x[a]);
        }
        cells.push(lin);
        dist.push(d);
    }

    let mut best = g.values.clone();
    for &s in &scales {
        let targets: Vec<usize> = cells
            .iter()
            .zip(&dist)
            .filter(|&(_, &d)| s <= d)
            .map(|(&lin, _)| lin)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let kernel = ball_kernel(kind, dim, s / g.h, subsample);
        let field_s = apply_ball_kernel_at(&g.values, &g.shape, &kernel, &targets);
        for (lin, v) in targets.into_iter().zip(field_s) {
            if v > best[lin] {
                best[lin] = v;
            }
        }
    }
    MaximalField::from_values(g, best, None)
}

/// Refinement study of the centered-operator counterexample profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// Cells per axis.
    pub n: usize,
    /// Domain half-width; the grid covers `[-l, l]^3`.
    pub l: f64,
    pub h: f64,
    /// Deviations are maximized over cells with `|center|_inf` below this.
    pub interior_half_width: f64,
    /// Largest ball radius in the probe family.
    pub max_radius: f64,
    pub subsample: usize,
    pub cells_checked: usize,
    /// max over interior cells of (M0 f - f)/f; signed, but the single-cell
    /// candidate makes it nonnegative.
    pub max_rel_deviation: f64,
    pub argmax_center: Vec<f64>,
    /// Deviation at the cell nearest the origin, where f attains its maximum
    /// and the deviation must vanish identically.
    pub deviation_near_origin: f64,
}

/// Probes the profile `f = min(|x|^{-1}, 1)` on `[-l, l]^3` with the centered
/// `l^2`-ball maximal operator (balls kept inside the domain). In the
/// continuum the profile is superharmonic, ball averages never beat the
/// center value, and `M_0 f = f` exactly; on a grid the relative deviation
/// `(M_0 f - f)/f` over interior cells measures pure discretization error and
/// shrinks under refinement.
///
/// The probe family is the radius ladder from half a cell up to `l/2`
/// (larger balls only dilute the averages of this decaying profile), and the
/// interior is the closed box `|x|_inf <= l/4`.
pub fn centered_counterexample_report(
    n: usize,
    l: f64,
    ladder: Option<LadderSpec>,
    subsample: usize,
) -> Result<CounterexampleReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one cell per axis".into()));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidParameter(format!("domain half-width {l} must be positive")));
    }
    let h = 2.0 * l / n as f64;
    let g = GridFunction::from_fn(vec![n; 3], vec![-l; 3], h, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        (1.0 / r).min(1.0)
    })?;
    let max_radius = l / 2.0;
    let ladder = ladder.unwrap_or(LadderSpec { max_scale: Some(max_radius), ..LadderSpec::default() });
    let interior = l / 4.0;
    let rlo = vec![-interior - 1e-12; 3];
    let rhi = vec![interior + 1e-12; 3];
    let m = centered_ball_field_interior(&g, BodyKind::Ball2, &ladder, subsample, Some((&rlo, &rhi)))?;

    let mut max_dev = f64::NEG_INFINITY;
    let mut argmax = vec![0.0; 3];
    let mut near_origin_dev = 0.0;
    let mut near_origin_d2 = f64::INFINITY;
    let mut checked = 0usize;
    for lin in 0..g.cell_count() {
        let x = g.cell_center(&g.multi_index(lin));
        if x.iter().any(|&c| c.abs() > interior + 1e-12) {
            continue;
        }
        checked += 1;
        let dev = (m.field.values[lin] - g.values[lin]) / g.values[lin];
        if dev > max_dev {
            max_dev = dev;
            argmax = x.clone();
        }
        let d2: f64 = x.iter().map(|&c| c * c).sum();
        if d2 < near_origin_d2 {
            near_origin_d2 = d2;
            near_origin_dev = dev;
        }
    }
    Ok(CounterexampleReport {
        n,
        l,
        h,
        interior_half_width: interior,
        max_radius,
        subsample,
        cells_checked: checked,
        max_rel_deviation: max_dev,
        argmax_center: argmax,
        deviation_near_origin: near_origin_dev,
    })
}

// ---------------------------------------------------------------------------
// Dyadic maximal
// ---------------------------------------------------------------------------

/// Dyadic maximal over the filtration generated by halving a cell-aligned
/// root box `levels` times. Inside the root, the field at a cell is the
/// largest average among the dyadic ancestors of the finest box containing
/// it; outside the root the operator sees nothing and the field equals `f`.
pub fn dyadic_maximal(
    g: &GridFunction,
    root_lo: &[f64],
    root_hi: &[f64],
    levels: u32,
    record_argmax: bool,
) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    let dim = g.dim();
    if root_lo.len() != dim || root_hi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: root_lo.len().max(root_hi.len()) });
    }
    // Root corners must sit on cell boundaries.
    let mut lo_c = vec![0usize; dim];
    let mut hi_c = vec![0usize; dim];
    for a in 0..dim {
        for (target, store) in [(root_lo[a], &mut lo_c[a]), (root_hi[a], &mut hi_c[a])] {
            let u = (target - g.origin[a]) / g.h;
            let k = u.round();
            if (u - k).abs() > 1e-9 {
                return Err(Error::Alignment(format!(
                    "root corner {target} on axis {a} is not on a cell boundary"
                )));
            }
            if k < 0.0 || k > g.shape[a] as f64 {
                return Err(Error::InvalidRegion(format!(
                    "root corner {target} on axis {a} escapes the grid"
                )));
            }
            *store = k as usize;
        }
        if lo_c[a] >= hi_c[a] {
            return Err(Error::InvalidRegion(format!("empty root on axis {a}")));
        }
        let side = hi_c[a] - lo_c[a];
        if side % (1usize << levels) != 0 {
            return Err(Error::Alignment(format!(
                "root side of {side} cells on axis {a} is not divisible by 2^{levels}"
            )));
        }
    }

    let table = SummedTable::new(g);
    let mut field = g.values.clone();
    let mut args: Vec<Option<BodySpec>> = if record_argmax {
        vec![None; g.cell_count()]
    } else {
        Vec::new()
    };

    // Depth-first over the dyadic tree, carrying the best ancestor average.
    struct Walk<'a> {
        g: &'a GridFunction,
        table: &'a SummedTable,
        levels: u32,
        field: &'a mut Vec<f64>,
        args: &'a mut Vec<Option<BodySpec>>,
        record: bool,
    }
    impl Walk<'_> {
        fn node(&mut self, lo: &[usize], hi: &[usize], depth: u32, inherited: f64, arg: Option<(Vec<usize>, Vec<usize>)>) -> Result<()> {
            let dim = lo.len();
            let mut cells = 1.0;
            for a in 0..dim {
                cells *= (hi[a] - lo[a]) as f64;
            }
            let avg = self.table.box_sum_cells(lo, hi)? / cells;
            let (best, barg) = if avg > inherited {
                (avg, Some((lo.to_vec(), hi.to_vec())))
            } else {
                (inherited, arg)
            };
            let leaf = depth == self.levels || hi.iter().zip(lo).all(|(&h, &l)| h - l == 1);
            if leaf {
                let mut cell = lo.to_vec();
                loop {
                    let lin = self.g.linear_index(&cell);
                    self.field[lin] = best;
                    if self.record {
                        self.args[lin] = barg.as_ref().map(|(l, h)| {
                            let lo_r: Vec<f64> = (0..dim)
                                .map(|a| self.g.origin[a] + l[a] as f64 * self.g.h)
                                .collect();
                            let hi_r: Vec<f64> = (0..dim)
                                .map(|a| self.g.origin[a] + h[a] as f64 * self.g.h)
                                .collect();
                            box_from_bounds(&lo_r, &hi_r)
                        });
                    }
                    // Odometer within [lo, hi).
                    let mut done = true;
                    for a in (0..dim).rev() {
                        cell[a] += 1;
                        if cell[a] < hi[a] {
                            done = false;
                            break;
                        }
                        cell[a] = lo[a];
                    }
                    if done {
                        break;
                    }
                }
                return Ok(());
            }
            // Halve every axis.
            let mut child_lo = lo.to_vec();
            let mut child_hi = hi.to_vec();
            for mask in 0..(1usize << dim) {
                for a in 0..dim {
                    let mid = lo[a] + (hi[a] - lo[a]) / 2;
                    if mask & (1 << a) == 0 {
                        child_lo[a] = lo[a];
                        child_hi[a] = mid;
                    } else {
                        child_lo[a] = mid;
                        child_hi[a] = hi[a];
                    }
                }
                self.node(&child_lo, &child_hi, depth + 1, best, barg.clone())?;
            }
            Ok(())
        }
    }
    let record = record_argmax;
    Walk { g, table: &table, levels, field: &mut field, args: &mut args, record }
        .node(&lo_c, &hi_c, 0, f64::NEG_INFINITY, None)?;
    MaximalField::from_values(g, field, record_argmax.then_some(args))
}

// ---------------------------------------------------------------------------
// One-sided maximal on the line
// ---------------------------------------------------------------------------

/// One-sided maximal operator: `M f(x) = sup over b > x of the average of f
/// on [x, b]`, evaluated exactly at cell centers (step data attains the
/// supremum at cell boundaries or in the short limit).
pub fn one_sided_maximal(g: &GridFunction) -> Result<MaximalField> {
    ensure_nonnegative(g)?;
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: g.dim() });
    }
    let n = g.shape[0];
    let s = prefix_1d(&g.values);
    let field: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 + 0.5;
            let sx = 0.5 * (s[i] + s[i + 1]);
            let mut best = g.values[i];
            for u in i + 1..=n {
                let avg = (s[u] - sx) / (u as f64 - x);
                if avg > best {
                    best = avg;
                }
            }
            best
        })
        .collect();
    MaximalField::from_values(g, field, None)
}

// ---------------------------------------------------------------------------
// Tail completion and certified interval floors (1d)
// ---------------------------------------------------------------------------

/// For every cell, the best average among intervals covering the whole cell.
/// This is a pointwise lower bound for the uncentered maximal function at
/// *every* point of the cell (not just its center), so norms built from it
/// are certified lower bounds.
pub fn covering_interval_floor_1d(g: &GridFunction) -> Result<Vec<f64>> {
    ensure_nonnegative(g)?;
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: g.dim() });
    }
    let n = g.shape[0];
    let s = prefix_1d(&g.values);
    let mut floor = g.values.clone();
    for u in 0..n {
        // Right boundaries v > i become admissible as i decreases.
        let mut run_max = f64::NEG_INFINITY;
        for i in (u..n).rev() {
            let v = i + 1;
            run_max = run_max.max((s[v] - s[u]) / ((v - u) as f64));
            if run_max > floor[i] {
                floor[i] = run_max;
            }
        }
    }
    Ok(floor)
}

/// Integral of `max_j (m_j / (x - a_j))^p` over `[start, infinity)`, where
/// all poles `a_j <= start` and masses are nonnegative. The envelope is
/// resolved by a greedy crossing scan (the active branch can only be
/// overtaken by one with strictly larger mass), and each branch integrates in
/// closed form.
pub(crate) fn hyperbola_tail_integral(masses: &[f64], poles: &[f64], start: f64, p: f64) -> f64 {
    let piece = |m: f64, a: f64, c: f64, d: Option<f64>| -> f64 {
        let head = (c - a).powf(1.0 - p);
        let tail = d.map_or(0.0, |d| (d - a).powf(1.0 - p));
        m.powf(p) * (head - tail) / (p - 1.0)
    };
    let cands: Vec<(f64, f64)> = masses
        .iter()
        .zip(poles)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &a)| (m, a))
        .collect();
    if cands.is_empty() {
        return 0.0;
    }
    // Active branch at start: largest value, ties to the larger mass.
    let mut act = 0usize;
    for k in 1..cands.len() {
        let va = cands[act].0 / (start - cands[act].1);
        let vk = cands[k].0 / (start - cands[k].1);
        if vk > va || (vk == va && cands[k].0 > cands[act].0) {
            act = k;
        }
    }
    let mut x = start;
    let mut total = 0.0;
    loop {
        let (m, a) = cands[act];
        // Earliest overtaking by a strictly heavier branch.
        let mut next: Option<(f64, usize)> = None;
        for (k, &(mk, ak)) in cands.iter().enumerate() {
            if mk <= m {
                continue;
            }
            let xc = (mk * a - m * ak) / (mk - m);
            if xc > x {
                let better = match next {
                    None => true,
                    Some((xn, kn)) => xc < xn || (xc == xn && mk > cands[kn].0),
                };
                if better {
                    next = Some((xc, k));
                }
            }
        }
        match next {
            Some((xc, k)) => {
                total += piece(m, a, x, Some(xc));
                x = xc;
                act = k;
            }
            None => {
                total += piece(m, a, x, None);
                return total;
            }
        }
    }
}

/// A norm-ratio for the 1d uncentered operator with exact tails over the
/// whole line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailedRatio {
    pub p: f64,
    pub norm_f: f64,
    /// Integral of the field^p over the grid.
    pub grid_integral: f64,
    pub left_tail: f64,
    pub right_tail: f64,
    pub norm_mf: f64,
    pub ratio: f64,
    /// True when the grid part uses covering floors (a pointwise lower bound
    /// everywhere) rather than exact center samples.
    pub certified: bool,
}

/// Exact-tails uncentered ratio on the line.
///
/// Outside the grid the maximal function of compactly supported data is
/// exactly an upper envelope of hyperbolas `(remaining mass)/(distance to a
/// boundary)`, whose `p`-th power integrates in closed form; both tails are
/// therefore exact. On the grid the field is either the exact maximal values
/// at cell centers (`certified = false`) or the covering-interval floors
/// (`certified = true`), which bound the maximal function from below at every
/// point and hence give a fully certified lower bound for the true ratio.
pub fn uncentered_tailed_ratio_1d(g: &GridFunction, p: f64, certified: bool) -> Result<TailedRatio> {
    check_exponent(p)?;
    ensure_nonnegative(g)?;
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: g.dim() });
    }
    let norm_f = g.norm_lp(p)?;
    if norm_f == 0.0 {
        return Err(Error::DegenerateInput("zero function has no ratio".into()));
    }
    let n = g.shape[0];
    let field = if certified {
        covering_interval_floor_1d(g)?
    } else {
        uncentered_core_1d(&g.values).0
    };
    let grid_integral: f64 = field.iter().map(|v| v.powf(p)).sum::<f64>() * g.h;

    let s = prefix_1d(&g.values);
    let total = s[n];
    // Right tail: masses beyond boundary j, poles at the boundaries.
    let masses_r: Vec<f64> = (0..=n).map(|j| (total - s[j]) * g.h).collect();
    let poles: Vec<f64> = (0..=n).map(|j| g.origin[0] + j as f64 * g.h).collect();
    let right_tail = hyperbola_tail_integral(&masses_r, &poles, g.origin[0] + n as f64 * g.h, p);
    // Left tail by reflection.
    let masses_l: Vec<f64> = (0..=n).map(|j| s[j] * g.h).collect();
    let poles_l: Vec<f64> = poles.iter().map(|&a| -a).collect();
    let left_tail = hyperbola_tail_integral(&masses_l, &poles_l, -g.origin[0], p);

    let norm_mf = (grid_integral + left_tail + right_tail).powf(1.0 / p);
    Ok(TailedRatio {
        p,
        norm_f,
        grid_integral,
        left_tail,
        right_tail,
        norm_mf,
        ratio: norm_mf / norm_f,
        certified,
    })
}
