//! Step functions on uniform grids, exact box integrals, and body averages.
//!
//! A [`GridFunction`] represents a nonnegative (or signed) step function that
//! is constant on the cells of a uniform grid and identically zero outside
//! the grid. Cells are cubes of side `h`; values are stored row-major with
//! axis 0 slowest. The zero extension is a convention, not an approximation:
//! every averaging routine in the crate accounts for mass outside the grid
//! being exactly zero.
//!
//! [`SummedTable`] holds prefix sums over the cell lattice. Multilinear
//! interpolation of those corner sums reproduces the integral of a step
//! function over *any* axis-aligned box exactly (the integral is multilinear
//! in the box corners within each cell), so box averages carry no quadrature
//! error. Clamping interpolation coordinates to the grid implements the zero
//! extension automatically.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{BodyKind, BodySpec};
use crate::error::{Error, Result};

/// A step function on a uniform grid with cubical cells of side `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub h: f64,
    /// Row-major cell values, axis 0 slowest.
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, h: f64, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::InvalidParameter("grid must have dimension >= 1".into()));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch { expected: shape.len(), got: origin.len() });
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("grid shape entries must be positive".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("cell size h = {h} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(Error::Inconsistent(format!(
                "value count {} does not match shape product {}",
                values.len(),
                total
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {i}")));
        }
        Ok(GridFunction { shape, origin, h, values })
    }

    /// Constant function `c` on the given grid.
    pub fn constant(shape: Vec<usize>, origin: Vec<f64>, h: f64, c: f64) -> Result<Self> {
        let total = shape.iter().product();
        Self::new(shape, origin, h, vec![c; total])
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(
        shape: Vec<usize>,
        origin: Vec<f64>,
        h: f64,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = shape.len();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        loop {
            for a in 0..dim {
                x[a] = origin[a] + (idx[a] as f64 + 0.5) * h;
            }
            values.push(f(&x));
            if !next_index(&mut idx, &shape) {
                break;
            }
        }
        Self::new(shape, origin, h, values)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Row-major strides (axis 0 slowest).
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn linear_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim());
        let strides = self.strides();
        coords.iter().zip(&strides).map(|(&c, &s)| c * s).sum()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize; self.dim()];
        for a in 0..self.dim() {
            out[a] = lin / strides[a];
            lin %= strides[a];
        }
        out
    }

    pub fn cell_center(&self, coords: &[usize]) -> Vec<f64> {
        coords
            .iter()
            .zip(&self.origin)
            .map(|(&c, &o)| o + (c as f64 + 0.5) * self.h)
            .collect()
    }

    /// Lower corner of the grid domain.
    pub fn domain_lo(&self) -> Vec<f64> {
        self.origin.clone()
    }

    /// Upper corner of the grid domain.
    pub fn domain_hi(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.shape)
            .map(|(&o, &n)| o + n as f64 * self.h)
            .collect()
    }

    /// Converts a real point to grid coordinates (units of cells from origin).
    pub fn grid_coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(x.iter().zip(&self.origin).map(|(&xi, &o)| (xi - o) / self.h).collect())
    }

    /// Visits each cell as `(multi_index, linear_index)` in row-major order.
    pub fn for_each_cell(&self, mut f: impl FnMut(&[usize], usize)) {
        let mut idx = vec![0usize; self.dim()];
        let mut lin = 0usize;
        loop {
            f(&idx, lin);
            lin += 1;
            if !next_index(&mut idx, &self.shape) {
                break;
            }
        }
    }

    /// New grid with the same geometry and mapped values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::new(
            self.shape.clone(),
            self.origin.clone(),
            self.h,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Signed integral of the function over the whole space.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    /// The L^p norm for `p > 1` (the zero extension contributes nothing).
    pub fn norm_lp(&self, p: f64) -> Result<f64> {
        crate::error::check_exponent(p)?;
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        Ok((s * self.cell_volume()).powf(1.0 / p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lebesgue measure of the superlevel set `{x in bbox : g(x) > t}`,
    /// i.e. `h^n` times the number of cells whose value strictly exceeds `t`.
    /// Only the grid bounding box is measured; for `t < 0` and nonnegative
    /// data this is just the box volume.
    pub fn superlevel_measure(&self, t: f64) -> f64 {
        let count = self.values.iter().filter(|&&v| v > t).count();
        count as f64 * self.cell_volume()
    }

    /// Serializes to the plain-text grid format (see [`from_ggrid_str`]).
    pub fn to_ggrid_string(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{}", self.dim());
        for n in &self.shape {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
        for o in &self.origin {
            let _ = write!(s, "{o} ");
        }
        let _ = write!(s, "{}\n", self.h);
        let row = *self.shape.last().unwrap();
        for chunk in self.values.chunks(row) {
            let mut first = true;
            for v in chunk {
                if !first {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
                first = false;
            }
            s.push('\n');
        }
        s
    }

    pub fn write_ggrid(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_ggrid_string())?;
        Ok(())
    }

    pub fn read_ggrid(path: impl AsRef<Path>) -> Result<GridFunction> {
        let text = std::fs::read_to_string(&path)?;
        from_ggrid_str(&text)
    }
}

/// Parses the plain-text grid format:
///
/// ```text
/// 2 4 4
/// -1 -1 0.5
/// 0 0 1 0
/// ...
/// ```
///
/// Line 1 holds the dimension `n` followed by the `n` per-axis cell counts;
/// line 2 holds the `n` origin coordinates followed by the spacing `h`; the
/// remaining lines hold `prod(shape)` values in row-major order (last axis
/// fastest), whitespace-separated with any line breaks. Blank lines and lines
/// starting with `#` are ignored. Floats are written with shortest-roundtrip
/// formatting, so a write/read cycle is bit-exact.
pub fn from_ggrid_str(text: &str) -> Result<GridFunction> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
    let mut parts = header.split_whitespace();
    let dim: usize = parts
        .next()
        .unwrap()
        .parse()
        .map_err(|e| Error::Parse(format!("dimension: {e}")))?;
    if dim == 0 {
        return Err(Error::Parse("dimension must be positive".into()));
    }
    let shape: Vec<usize> = parts
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("shape: {e}"))))
        .collect::<Result<_>>()?;
    if shape.len() != dim {
        return Err(Error::Parse(format!(
            "header declares dimension {dim} but lists {} cell counts",
            shape.len()
        )));
    }

    let geom = lines
        .next()
        .ok_or_else(|| Error::Parse("missing origin/spacing line".into()))?;
    let nums: Vec<f64> = geom
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("origin/spacing: {e}"))))
        .collect::<Result<_>>()?;
    if nums.len() != dim + 1 {
        return Err(Error::Parse(format!(
            "origin/spacing line needs {} numbers, found {}",
            dim + 1,
            nums.len()
        )));
    }
    let origin = nums[..dim].to_vec();
    let h = nums[dim];

    let total: usize = shape.iter().product();
    let mut values = Vec::with_capacity(total);
    for line in lines {
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| Error::Parse(format!("values: {e}")))?);
        }
    }
    if values.len() != total {
        return Err(Error::Parse(format!(
            "expected {total} values, found {}",
            values.len()
        )));
    }
    GridFunction::new(shape, origin, h, values)
}

/// Advances a row-major multi-index (last axis fastest); returns false after
/// the final index.
pub fn next_index(idx: &mut [usize], shape: &[usize]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < shape[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let n = shape.len();
    let mut s = vec![1usize; n];
    for a in (0..n.saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

/// Prefix sums over the cell lattice of a [`GridFunction`], supporting exact
/// integrals of the step function over arbitrary axis-aligned boxes.
///
/// Corner sums live on the `(shape + 1)` lattice: `corner(j) = sum of values
/// over all cells c with c < j componentwise`. For a step function the map
/// `u -> integral over [origin, origin + u*h]` is multilinear in `u` within
/// each cell, so interpolating corner sums is exact, and clamping `u` to
/// `[0, shape]` realizes the zero extension outside the grid.
#[derive(Debug, Clone)]
pub struct SummedTable {
    shape: Vec<usize>,
    origin: Vec<f64>,
    h: f64,
    cshape: Vec<usize>,
    cstrides: Vec<usize>,
    sums: Vec<f64>,
}

impl SummedTable {
    pub fn new(g: &GridFunction) -> Self {
        let dim = g.dim();
        let cshape: Vec<usize> = g.shape.iter().map(|&n| n + 1).collect();
        let cstrides = strides_of(&cshape);
        let total: usize = cshape.iter().product();
        let mut sums = vec![0.0; total];

        // Scatter each cell value to the corner one past it on every axis.
        let mut idx = vec![0usize; dim];
        let mut lin = 0usize;
        loop {
            let mut c = 0usize;
            for a in 0..dim {
                c += (idx[a] + 1) * cstrides[a];
            }
            sums[c] = g.values[lin];
            lin += 1;
            if !next_index(&mut idx, &g.shape) {
                break;
            }
        }
        debug_assert_eq!(lin, g.values.len());

        // In-place prefix sums along each axis in turn.
        for a in 0..dim {
            let stride = cstrides[a];
            let len = cshape[a];
            for base in 0..total {
                if (base / stride) % len != 0 {
                    continue;
                }
                for i in 1..len {
                    sums[base + i * stride] += sums[base + (i - 1) * stride];
                }
            }
        }

        SummedTable {
            shape: g.shape.clone(),
            origin: g.origin.clone(),
            h: g.h,
            cshape,
            cstrides,
            sums,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Sum of cell values over all cells strictly below `j` on every axis.
    pub fn corner(&self, j: &[usize]) -> f64 {
        debug_assert_eq!(j.len(), self.dim());
        let mut c = 0usize;
        for a in 0..j.len() {
            debug_assert!(j[a] < self.cshape[a]);
            c += j[a] * self.cstrides[a];
        }
        self.sums[c]
    }

    /// Sum of cell values over the index box `[lo, hi)` (cell indices).
    pub fn box_sum_cells(&self, lo: &[usize], hi: &[usize]) -> Result<f64> {
        let dim = self.dim();
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: lo.len().max(hi.len()) });
        }
        for a in 0..dim {
            if lo[a] > hi[a] || hi[a] > self.shape[a] {
                return Err(Error::InvalidRegion(format!(
                    "cell range [{}, {}) out of bounds on axis {a}",
                    lo[a], hi[a]
                )));
            }
        }
        let mut total = 0.0;
        let mut corner = vec![0usize; dim];
        for mask in 0..(1usize << dim) {
            let mut sign = 1.0;
            for a in 0..dim {
                if mask & (1 << a) != 0 {
                    corner[a] = hi[a];
                } else {
                    corner[a] = lo[a];
                    sign = -sign;
                }
            }
            // Sign each corner by (-1)^(number of lo picks): the
            // inclusion-exclusion expansion of the box sum.
            total += sign * self.corner(&corner);
        }
        Ok(total)
    }

    /// Exact integral of the step function over `[origin, origin + u*h]`
    /// where `u` is in grid coordinates, clamped to the grid (zero
    /// extension). Multilinear interpolation of corner sums.
    fn integral_from_origin(&self, u: &[f64]) -> f64 {
        let dim = self.dim();
        let mut j = vec![0usize; dim];
        let mut t = vec![0.0f64; dim];
        for a in 0..dim {
            let n = self.shape[a] as f64;
            let ua = u[a].clamp(0.0, n);
            let mut ja = ua.floor();
            if ja >= n {
                ja = n - 1.0;
            }
            j[a] = ja as usize;
            t[a] = ua - ja;
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; dim];
        for mask in 0..(1usize << dim) {
            let mut w = 1.0;
            for a in 0..dim {
                if mask & (1 << a) != 0 {
                    corner[a] = j[a] + 1;
                    w *= t[a];
                } else {
                    corner[a] = j[a];
                    w *= 1.0 - t[a];
                }
            }
            if w != 0.0 {
                acc += w * self.corner(&corner);
            }
        }
        acc * self.h.powi(dim as i32)
    }

    /// Exact integral of the (zero-extended) step function over the real box
    /// `[lo, hi]`. Errors if `lo > hi` on some axis; a flat box (`lo == hi`
    /// somewhere) integrates to zero.
    pub fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let dim = self.dim();
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: lo.len().max(hi.len()) });
        }
        let mut ulo = vec![0.0f64; dim];
        let mut uhi = vec![0.0f64; dim];
        for a in 0..dim {
            if !(lo[a].is_finite() && hi[a].is_finite()) {
                return Err(Error::InvalidRegion(format!("non-finite bound on axis {a}")));
            }
            if lo[a] > hi[a] {
                return Err(Error::InvalidRegion(format!(
                    "lo {} > hi {} on axis {a}",
                    lo[a], hi[a]
                )));
            }
            ulo[a] = (lo[a] - self.origin[a]) / self.h;
            uhi[a] = (hi[a] - self.origin[a]) / self.h;
        }
        let mut total = 0.0;
        let mut u = vec![0.0f64; dim];
        for mask in 0..(1usize << dim) {
            let mut sign = 1.0;
            for a in 0..dim {
                if mask & (1 << a) != 0 {
                    u[a] = uhi[a];
                } else {
                    u[a] = ulo[a];
                    sign = -sign;
                }
            }
            total += sign * self.integral_from_origin(&u);
        }
        Ok(total)
    }

    /// Average of the zero-extended function over the real box `[lo, hi]`.
    /// A box of zero volume averages to zero by convention.
    pub fn box_average(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let integral = self.box_integral(lo, hi)?;
        let mut vol = 1.0;
        for a in 0..lo.len() {
            vol *= hi[a] - lo[a];
        }
        if vol == 0.0 {
            return Ok(0.0);
        }
        Ok(integral / vol)
    }

    /// Integral over the whole grid.
    pub fn total(&self) -> f64 {
        let top: Vec<usize> = self.cshape.iter().map(|&n| n - 1).collect();
        self.corner(&top) * self.h.powi(self.dim() as i32)
    }
}

/// Average of the zero-extended grid function over a body.
///
/// Box-like bodies (including l^inf balls) are exact via the summed table:
/// the numerator is the exact in-grid mass and the denominator the closed-form
/// body volume, so mass outside the grid dilutes the average exactly as the
/// zero extension demands.
///
/// Metric balls use midpoint quadrature on a `subsample`-refined sublattice:
/// each cell of the bounding box is split into `subsample^n` subcells and a
/// subcell contributes iff its center lies in the (closed) body. The
/// denominator counts *all* contributing subcells, in-grid or not, so a
/// constant function averages to exactly that constant whenever the body
/// stays inside the grid, and out-of-grid nodes dilute the average like the
/// zero extension.
pub fn body_average(g: &GridFunction, table: &SummedTable, body: &BodySpec, subsample: usize) -> Result<f64> {
    body.validate()?;
    if body.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: body.dim() });
    }
    match body.kind {
        BodyKind::Box | BodyKind::BallInf => {
            let (lo, hi) = body.bounding_box();
            let integral = table.box_integral(&lo, &hi)?;
            Ok(integral / body.volume())
        }
        BodyKind::Ball1 | BodyKind::Ball2 => {
            if subsample == 0 {
                return Err(Error::InvalidParameter("subsample must be >= 1".into()));
            }
            let dim = g.dim();
            let (blo, bhi) = body.bounding_box();
            // Sub-lattice of spacing h/subsample covering the bounding box.
            let sub_h = g.h / subsample as f64;
            let mut lo_sub = vec![0i64; dim];
            let mut n_sub = vec![0usize; dim];
            for a in 0..dim {
                // Global subcell indices relative to the grid origin.
                let lo_f = ((blo[a] - g.origin[a]) / sub_h).floor();
                let hi_f = ((bhi[a] - g.origin[a]) / sub_h).ceil();
                lo_sub[a] = lo_f as i64;
                n_sub[a] = (hi_f - lo_f) as usize;
                if n_sub[a] == 0 {
                    n_sub[a] = 1;
                }
            }
            let strides = g.strides();
            let mut idx = vec![0usize; dim];
            let mut x = vec![0.0f64; dim];
            let mut inside_count = 0u64;
            let mut mass_sum = 0.0f64;
            loop {
                let mut in_grid = true;
                let mut lin = 0usize;
                for a in 0..dim {
                    let s = lo_sub[a] + idx[a] as i64;
                    x[a] = g.origin[a] + (s as f64 + 0.5) * sub_h;
                    let cell = s.div_euclid(subsample as i64);
                    if cell < 0 || cell as usize >= g.shape[a] {
                        in_grid = false;
                    } else {
                        lin += cell as usize * strides[a];
                    }
                }
                if body.contains(&x)? {
                    inside_count += 1;
                    if in_grid {
                        mass_sum += g.values[lin];
                    }
                }
                if !next_index(&mut idx, &n_sub) {
                    break;
                }
            }
            if inside_count == 0 {
                return Err(Error::DegenerateInput(
                    "body contains no quadrature nodes; increase subsample".into(),
                ));
            }
            Ok(mass_sum / inside_count as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(dim: usize, n: usize, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = vec![n; dim];
        let total: usize = shape.iter().product();
        let values: Vec<f64> = (0..total).map(|_| rng.gen_range(0.0..4.0)).collect();
        GridFunction::new(shape, vec![-1.0; dim], 2.0 / n as f64, values).unwrap()
    }

    /// Reference integral: clip the box against every cell.
    fn naive_box_integral(g: &GridFunction, lo: &[f64], hi: &[f64]) -> f64 {
        let mut total = 0.0;
        g.for_each_cell(|idx, lin| {
            let mut overlap = 1.0;
            for a in 0..g.dim() {
                let clo = g.origin[a] + idx[a] as f64 * g.h;
                let chi = clo + g.h;
                let w = (hi[a].min(chi) - lo[a].max(clo)).max(0.0);
                overlap *= w;
            }
            total += g.values[lin] * overlap;
        });
        total
    }

    #[test]
    fn corner_sums_match_direct_summation() {
        let g = random_grid(2, 5, 7);
        let t = SummedTable::new(&g);
        for j0 in 0..=5usize {
            for j1 in 0..=5usize {
                let mut s = 0.0;
                g.for_each_cell(|idx, lin| {
                    if idx[0] < j0 && idx[1] < j1 {
                        s += g.values[lin];
                    }
                });
                assert!((t.corner(&[j0, j1]) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_integral_exact_against_cell_clipping() {
        for dim in 1..=3usize {
            let g = random_grid(dim, 4, 11 + dim as u64);
            let t = SummedTable::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..50 {
                let mut lo = vec![0.0; dim];
                let mut hi = vec![0.0; dim];
                for a in 0..dim {
                    let x: f64 = rng.gen_range(-1.3..1.3);
                    let y: f64 = rng.gen_range(-1.3..1.3);
                    lo[a] = x.min(y);
                    hi[a] = x.max(y);
                }
                let exact = t.box_integral(&lo, &hi).unwrap();
                let naive = naive_box_integral(&g, &lo, &hi);
                assert!(
                    (exact - naive).abs() < 1e-12,
                    "dim {dim}: {exact} vs {naive}"
                );
            }
        }
    }

    #[test]
    fn clamping_realizes_zero_extension() {
        let g = random_grid(2, 4, 3);
        let t = SummedTable::new(&g);
        let full = t.box_integral(&[-10.0, -10.0], &[10.0, 10.0]).unwrap();
        assert!((full - g.mass()).abs() < 1e-12);
        assert!((full - t.total()).abs() < 1e-12);
    }

    #[test]
    fn box_integral_additive_across_a_cut() {
        let g = random_grid(2, 6, 21);
        let t = SummedTable::new(&g);
        let (lo, hi) = ([-0.7, -0.9], [0.8, 0.95]);
        let cut = 0.13;
        let whole = t.box_integral(&lo, &hi).unwrap();
        let left = t.box_integral(&lo, &[cut, hi[1]]).unwrap();
        let right = t.box_integral(&[cut, lo[1]], &hi).unwrap();
        assert!((whole - (left + right)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_boxes() {
        let g = random_grid(1, 4, 5);
        let t = SummedTable::new(&g);
        // Zero-width box: integral and average are zero by convention.
        assert_eq!(t.box_integral(&[0.25], &[0.25]).unwrap(), 0.0);
        assert_eq!(t.box_average(&[0.25], &[0.25]).unwrap(), 0.0);
        // Inverted box is an error.
        assert!(t.box_integral(&[0.5], &[0.25]).is_err());
    }

    #[test]
    fn box_average_of_constant_is_constant() {
        let g = GridFunction::constant(vec![8, 8], vec![0.0, 0.0], 0.125, 3.25).unwrap();
        let t = SummedTable::new(&g);
        let avg = t.box_average(&[0.1, 0.2], &[0.9, 0.55]).unwrap();
        assert!((avg - 3.25).abs() < 1e-12);
    }

    #[test]
    fn body_average_box_matches_table() {
        let g = random_grid(2, 6, 31);
        let t = SummedTable::new(&g);
        let body = BodySpec::new_box(vec![0.1, -0.2], vec![0.4, 0.3]).unwrap();
        let (lo, hi) = body.bounding_box();
        let want = t.box_integral(&lo, &hi).unwrap() / body.volume();
        let got = body_average(&g, &t, &body, 1).unwrap();
        assert!((want - got).abs() < 1e-12);
    }

    #[test]
    fn body_average_constant_over_interior_ball_is_exact() {
        let g = GridFunction::constant(vec![16, 16], vec![-1.0, -1.0], 0.125, 2.5).unwrap();
        let t = SummedTable::new(&g);
        let ball = BodySpec::new_ball(BodyKind::Ball2, vec![0.0, 0.0], 0.6).unwrap();
        for sub in [1usize, 2, 4] {
            let avg = body_average(&g, &t, &ball, sub).unwrap();
            assert!((avg - 2.5).abs() < 1e-12, "subsample {sub}: {avg}");
        }
    }

    #[test]
    fn body_average_ball_converges_with_subsample() {
        // One hot cell; the ball covers part of it, so the average tends to
        // (hot overlap volume) / |ball| as the subsample refines.
        let mut g = GridFunction::constant(vec![8, 8], vec![0.0, 0.0], 0.25, 0.0).unwrap();
        let hot = g.linear_index(&[4, 4]);
        g.values[hot] = 1.0;
        let t = SummedTable::new(&g);
        let ball = BodySpec::new_ball(BodyKind::Ball2, vec![1.0, 1.0], 0.5).unwrap();
        let coarse = body_average(&g, &t, &ball, 4).unwrap();
        let fine = body_average(&g, &t, &ball, 64).unwrap();
        // The hot cell [1, 1.25]^2 lies entirely inside the disc (farthest
        // corner at distance sqrt(0.125) < 0.5), so the exact average is
        // |cell| / |disc| = 0.0625 / (pi/4) = 1/(4 pi).
        let exact = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((fine - exact).abs() < 1e-3, "fine {fine} vs {exact}");
        assert!((coarse - exact).abs() < 1e-2, "coarse {coarse} vs {exact}");
    }

    #[test]
    fn ggrid_roundtrip_is_bit_exact() {
        let g = random_grid(2, 5, 77);
        let text = g.to_ggrid_string();
        let back = from_ggrid_str(&text).unwrap();
        assert_eq!(g.shape, back.shape);
        assert_eq!(g.origin, back.origin);
        assert_eq!(g.h, back.h);
        for (a, b) in g.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Re-serialization is byte-identical.
        assert_eq!(text, back.to_ggrid_string());
    }

    #[test]
    fn ggrid_parses_spec_layout() {
        let g = from_ggrid_str("2 2 3\n-1 0.5 0.25\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(g.shape, vec![2, 3]);
        assert_eq!(g.origin, vec![-1.0, 0.5]);
        assert_eq!(g.h, 0.25);
        assert_eq!(g.values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // Value line breaks are free-form.
        let same = from_ggrid_str("2 2 3\n-1 0.5 0.25\n1 2 3 4 5 6\n").unwrap();
        assert_eq!(g.values, same.values);
    }

    #[test]
    fn ggrid_rejects_malformed_input() {
        assert!(from_ggrid_str("").is_err());
        // Header shorter than the declared dimension.
        assert!(from_ggrid_str("2 4\n0 0 1\n0\n").is_err());
        // Wrong value count.
        assert!(from_ggrid_str("1 2\n0 1\n0\n").is_err());
        // Origin/spacing line too short.
        assert!(from_ggrid_str("2 2 2\n0 1\n0 0 0 0\n").is_err());
        // Non-numeric value.
        assert!(from_ggrid_str("1 1\n0 1\nx\n").is_err());
        // Zero dimension.
        assert!(from_ggrid_str("0\n1\n").is_err());
    }

    #[test]
    fn superlevel_counts_strict_exceedance() {
        let g =
            GridFunction::new(vec![2, 2], vec![0.0, 0.0], 0.5, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.superlevel_measure(-1.0), 1.0); // whole bbox
        assert!((g.superlevel_measure(0.0) - 0.75).abs() < 1e-15);
        assert!((g.superlevel_measure(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(g.superlevel_measure(3.0), 0.0); // strict: value 3 not counted
    }

    #[test]
    fn norms_on_indicators() {
        // Indicator of 3 cells of volume h^2 each.
        let mut g = GridFunction::constant(vec![4, 4], vec![0.0, 0.0], 0.5, 0.0).unwrap();
        for lin in [0usize, 5, 10] {
            g.values[lin] = 1.0;
        }
        let m = g.mass();
        assert!((m - 3.0 * 0.25).abs() < 1e-15);
        let l2 = g.norm_lp(2.0).unwrap();
        assert!((l2 - (3.0 * 0.25f64).sqrt()).abs() < 1e-15);
        assert!(g.norm_lp(0.5).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(GridFunction::new(vec![], vec![], 1.0, vec![]).is_err());
        assert!(GridFunction::new(vec![2], vec![0.0], 0.0, vec![0.0, 0.0]).is_err());
        assert!(GridFunction::new(vec![2], vec![0.0], 1.0, vec![0.0]).is_err());
        assert!(GridFunction::new(vec![2], vec![0.0], 1.0, vec![0.0, f64::NAN]).is_err());
        assert!(GridFunction::new(vec![2], vec![0.0, 0.0], 1.0, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn from_fn_samples_cell_centers() {
        let g = GridFunction::from_fn(vec![2, 2], vec![0.0, 0.0], 1.0, |x| x[0] + 10.0 * x[1])
            .unwrap();
        // Centers: (0.5,0.5), (0.5,1.5), (1.5,0.5), (1.5,1.5); axis 0 slowest.
        assert_eq!(g.values, vec![5.5, 15.5, 6.5, 16.5]);
    }
}
