//! Density-controlled box partitions.
//!
//! [`split_box`] cuts a box in two with a hyperplane chosen so that neither
//! part's average blows up (max child average at most `lambda_eff` times the
//! parent's) and neither part hogs the volume (max child fraction at most
//! `1/lambda_eff`). Iterating the split on the longest side yields a
//! [`FiltrationTree`] whose levels tile the root, refine one another, and have
//! uniformly shrinking diameters — the structural input to the certificate
//! inequalities in [`crate::bellman`]. [`verify_density`] re-checks all seven
//! defining properties of such a filtration against the raw grid data.

use crate::error::{check_exponent, Error, Result};
use crate::grid::{GridFunction, SummedTable};
use crate::operators::MaximalField;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<AxisBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch { expected: lo.len().max(1), got: hi.len() });
        }
        for (a, (&l, &u)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::InvalidRegion(format!(
                    "box side [{l}, {u}] on axis {a} is not ordered"
                )));
            }
        }
        Ok(AxisBox { lo, hi })
    }

    /// Cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<AxisBox> {
        AxisBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(&l, &u)| u - l).product()
    }

    /// Euclidean diameter (length of the main diagonal).
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Axis of a longest side; ties go to the lowest index.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        for a in 1..self.dim() {
            if self.side(a) > self.side(best) {
                best = a;
            }
        }
        best
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&c, (&l, &u))| c >= l - tol && c <= u + tol)
    }

    /// Whether `other` fits inside `self` up to `tol` per coordinate.
    pub fn contains_box(&self, other: &AxisBox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|a| other.lo[a] >= self.lo[a] - tol && other.hi[a] <= self.hi[a] + tol)
    }

    /// Splits along `axis` at `coord`, keeping the cut plane in both parts.
    pub fn split_at(&self, axis: usize, coord: f64) -> (AxisBox, AxisBox) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[axis] = coord;
        right.lo[axis] = coord;
        (left, right)
    }
}

/// How the cut coordinate was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    /// The two halves already average equally; cut at the midpoint.
    Midpoint,
    /// The average-difference function crossed zero before the volume cap;
    /// cut at the (bisection-refined) equalizing coordinate.
    Equalized,
    /// Averages never equalized; cut where the heavier-average part holds
    /// exactly a `1/lambda_eff` volume fraction.
    VolumeCapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInfo {
    pub axis: usize,
    pub coord: f64,
    pub kind: CutKind,
}

/// Average of `f` over a box, via the table (zero extension off-grid).
fn box_avg(table: &SummedTable, b: &AxisBox) -> Result<f64> {
    table.box_average(&b.lo, &b.hi)
}

/// Splits `region` by a hyperplane across its longest side so that
///
/// * `max(avg(P-), avg(P+)) <= lambda_eff * avg(P)`, and
/// * `max(|P-|, |P+|) <= |P| / lambda_eff`.
///
/// Starting from the midpoint, the cut moves toward the facet adjacent to the
/// smaller-average part until the averages equalize (root found by bisection)
/// or the larger-average part reaches the `1/lambda_eff` volume cap,
/// whichever comes first. Both postconditions are re-checked numerically.
pub fn split_box(
    g: &GridFunction,
    region: &AxisBox,
    lambda_eff: f64,
) -> Result<(AxisBox, AxisBox, CutInfo)> {
    let table = SummedTable::new(g);
    split_box_with(&table, region, lambda_eff)
}

/// [`split_box`] against a prebuilt summed table (used by the tree builder).
pub fn split_box_with(
    table: &SummedTable,
    region: &AxisBox,
    lambda_eff: f64,
) -> Result<(AxisBox, AxisBox, CutInfo)> {
    if region.dim() != table.dim() {
        return Err(Error::DimensionMismatch { expected: table.dim(), got: region.dim() });
    }
    if region.volume() <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "cannot split a box of volume {}",
            region.volume()
        )));
    }
    if !(lambda_eff.is_finite() && lambda_eff > 1.0 && lambda_eff <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "volume-cap ratio {lambda_eff} must lie in (1, 2]"
        )));
    }
    let axis = region.longest_axis();
    let side = region.side(axis);
    let lo = region.lo[axis];
    let parent_avg = box_avg(table, region)?;

    // Signed average difference lower-minus-upper as a function of the cut.
    let diff = |c: f64| -> Result<f64> {
        let (left, right) = region.split_at(axis, c);
        Ok(box_avg(table, &left)? - box_avg(table, &right)?)
    };

    let mid = lo + 0.5 * side;
    let d_mid = diff(mid)?;
    let scale = parent_avg.abs().max(1e-300);

    let cut = if d_mid.abs() <= 1e-12 * scale {
        CutInfo { axis, coord: mid, kind: CutKind::Midpoint }
    } else {
        // The cap coordinate leaves the larger-average part a 1/lambda_eff
        // volume fraction; it sits on the smaller-average part's side.
        let cap = if d_mid < 0.0 {
            lo + side * (1.0 - 1.0 / lambda_eff) // lower part smaller-average
        } else {
            lo + side / lambda_eff
        };
        let d_cap = diff(cap)?;
        if d_cap == 0.0 {
            CutInfo { axis, coord: cap, kind: CutKind::Equalized }
        } else if d_cap.signum() == d_mid.signum() {
            CutInfo { axis, coord: cap, kind: CutKind::VolumeCapped }
        } else {
            // Sign change between the cap and the midpoint: bisect.
            let (mut a, mut b) = if cap < mid { (cap, mid) } else { (mid, cap) };
            let (mut da, _db) = if cap < mid { (d_cap, d_mid) } else { (d_mid, d_cap) };
            while b - a > 1e-12 * side {
                let m = 0.5 * (a + b);
                let dm = diff(m)?;
                if dm == 0.0 {
                    a = m;
                    b = m;
                } else if dm.signum() == da.signum() {
                    a = m;
                    da = dm;
                } else {
                    b = m;
                }
            }
            CutInfo { axis, coord: 0.5 * (a + b), kind: CutKind::Equalized }
        }
    };

    let (minus, plus) = region.split_at(axis, cut.coord);
    // Re-check the two advertised postconditions on the actual parts.
    let frac = minus.volume().max(plus.volume()) / region.volume();
    if frac > 1.0 / lambda_eff + 1e-9 {
        return Err(Error::Inconsistent(format!(
            "split volume fraction {frac} exceeds 1/{lambda_eff}"
        )));
    }
    let worst_avg = box_avg(table, &minus)?.max(box_avg(table, &plus)?);
    if worst_avg > lambda_eff * parent_avg + 1e-9 * scale {
        return Err(Error::Inconsistent(format!(
            "split child average {worst_avg} exceeds {lambda_eff} * {parent_avg}"
        )));
    }
    Ok((minus, plus, cut))
}

/// When to stop refining a partition. At least one criterion is required.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Stop splitting nodes at this depth.
    pub max_depth: Option<usize>,
    /// Stop splitting once a node's diameter falls below this.
    pub min_diam: Option<f64>,
}

/// One node of a filtration tree. Statistics are against the grid the tree
/// was built from: `x` is the mean of `f`, `y` the mean of `f^p`, `z` the
/// largest mean along the chain from the root down to this node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub region: AxisBox,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Indices into the tree's node arena; empty for leaves.
    pub children: Vec<usize>,
    pub cut: Option<CutInfo>,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A nested family of box partitions of a root region, each level refining
/// the previous one, with child averages controlled by `lambda` and child
/// volumes by `1/lambda_eff`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiltrationTree {
    pub root: AxisBox,
    pub lambda: f64,
    /// `min(lambda, 2)`; the ratio the splitter actually enforces.
    pub lambda_eff: f64,
    /// Exponent used for the `y` statistics.
    pub p: f64,
    pub stop: StopRule,
    /// Node 0 is the root; children always follow their parent.
    pub nodes: Vec<Node>,
}

const MAX_NODES: usize = 4_000_000;

/// Recursively splits `root` against `g` until a stop criterion fires,
/// recording per-node statistics for exponent `p`.
pub fn build_filtration(
    g: &GridFunction,
    root: &AxisBox,
    lambda: f64,
    p: f64,
    stop: StopRule,
) -> Result<FiltrationTree> {
    check_exponent(p)?;
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density ratio {lambda} must exceed 1"
        )));
    }
    if stop.max_depth.is_none() && stop.min_diam.is_none() {
        return Err(Error::Config(
            "refusing to build an unbounded partition: set max_depth or min_diam".into(),
        ));
    }
    if let Some(d) = stop.min_diam {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("min_diam {d} must be positive")));
        }
    }
    if root.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: root.dim() });
    }
    if root.volume() <= 0.0 {
        return Err(Error::DegenerateInput("root box has zero volume".into()));
    }
    let lambda_eff = lambda.min(2.0);
    let table = SummedTable::new(g);
    let gp = g.map(|v| v.abs().powf(p))?;
    let table_p = SummedTable::new(&gp);

    let mut tree = FiltrationTree {
        root: root.clone(),
        lambda,
        lambda_eff,
        p,
        stop,
        nodes: Vec::new(),
    };
    let x0 = table.box_average(&root.lo, &root.hi)?;
    tree.nodes.push(Node {
        region: root.clone(),
        depth: 0,
        parent: None,
        children: Vec::new(),
        cut: None,
        x: x0,
        y: table_p.box_average(&root.lo, &root.hi)?,
        z: x0,
    });

    // Depth-first, lower part first: children end up contiguous and the
    // construction order is deterministic.
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let (region, depth, z_here) =
            (tree.nodes[id].region.clone(), tree.nodes[id].depth, tree.nodes[id].z);
        if let Some(d) = stop.max_depth {
            if depth >= d {
                continue;
            }
        }
        if let Some(dm) = stop.min_diam {
            if region.diameter() < dm {
                continue;
            }
        }
        if tree.nodes.len() + 2 > MAX_NODES {
            return Err(Error::Config(format!(
                "partition exceeded {MAX_NODES} nodes; tighten the stop rule"
            )));
        }
        let (minus, plus, cut) = split_box_with(&table, &region, lambda_eff)?;
        tree.nodes[id].cut = Some(cut);
        for part in [minus, plus] {
            let x = table.box_average(&part.lo, &part.hi)?;
            let y = table_p.box_average(&part.lo, &part.hi)?;
            let child = Node {
                region: part,
                depth: depth + 1,
                parent: Some(id),
                children: Vec::new(),
                cut: None,
                x,
                y,
                z: z_here.max(x),
            };
            let cid = tree.nodes.len();
            tree.nodes.push(child);
            tree.nodes[id].children.push(cid);
        }
        // Push in reverse so the lower part is processed first.
        let kids = tree.nodes[id].children.clone();
        for &c in kids.iter().rev() {
            stack.push(c);
        }
    }
    Ok(tree)
}

impl FiltrationTree {
    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty()).collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// The m-th partition level: nodes at depth `m` plus leaves that stopped
    /// earlier (a stopped leaf keeps representing itself on deeper levels, so
    /// every level tiles the root).
    pub fn level(&self, m: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                n.depth == m || (n.depth < m && n.children.is_empty())
            })
            .collect()
    }

    /// The maximal field of the tree's own body family: at each cell center
    /// of `g`, the largest node average along the chain of nodes containing
    /// that center (zero outside the root). Since `z` accumulates chain
    /// maxima, this is just the deepest containing node's `z`.
    pub fn maximal_field(&self, g: &GridFunction) -> Result<MaximalField> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: g.dim() });
        }
        let mut values = vec![0.0f64; g.cell_count()];
        g.for_each_cell(|idx, lin| {
            let c = g.cell_center(idx);
            if !self.root.contains_point(&c, 0.0) {
                return;
            }
            let mut node = 0usize;
            // Centers on a cut plane belong to both children; take the first.
            'descend: loop {
                for &k in &self.nodes[node].children {
                    if self.nodes[k].region.contains_point(&c, 0.0) {
                        node = k;
                        continue 'descend;
                    }
                }
                break;
            }
            values[lin] = self.nodes[node].z;
        });
        Ok(MaximalField {
            field: GridFunction::new(g.shape.clone(), g.origin.clone(), g.h, values)?,
            argmax: None,
        })
    }

    /// Serializes the nested `{box, cut_axis, cut_coord, x, y, z, children}`
    /// view of the tree.
    pub fn to_json(&self) -> String {
        fn value(tree: &FiltrationTree, id: usize) -> serde_json::Value {
            let n = &tree.nodes[id];
            serde_json::json!({
                "box": {"lo": n.region.lo, "hi": n.region.hi},
                "cut_axis": n.cut.as_ref().map(|c| c.axis),
                "cut_coord": n.cut.as_ref().map(|c| c.coord),
                "x": n.x,
                "y": n.y,
                "z": n.z,
                "children": n.children.iter().map(|&c| value(tree, c)).collect::<Vec<_>>(),
            })
        }
        serde_json::json!({
            "lambda": self.lambda,
            "lambda_eff": self.lambda_eff,
            "p": self.p,
            "root": value(self, 0),
        })
        .to_string()
    }

    /// Renders 2d partitions as an SVG of the leaf rectangles, shaded by
    /// their averages.
    pub fn to_svg(&self) -> Result<String> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.dim() });
        }
        let (w, h) = (self.root.side(0), self.root.side(1));
        let scale = 600.0 / w.max(h);
        let max_x = self.nodes.iter().map(|n| n.x).fold(0.0, f64::max).max(1e-300);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
            w * scale,
            h * scale,
            w * scale,
            h * scale
        );
        for &i in &self.leaves() {
            let n = &self.nodes[i];
            let shade = (255.0 * (1.0 - n.x / max_x)).round().clamp(0.0, 255.0) as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({shade},{shade},255)" stroke="black" stroke-width="0.5"/>"#,
                (n.region.lo[0] - self.root.lo[0]) * scale,
                (n.region.lo[1] - self.root.lo[1]) * scale,
                n.region.side(0) * scale,
                n.region.side(1) * scale,
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

/// Outcome of checking one defining property of a filtration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityItem {
    pub name: String,
    pub pass: bool,
    /// Worst signed violation found (<= 0 when the property holds).
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub items: Vec<DensityItem>,
    pub pass: bool,
}

impl DensityReport {
    pub fn item(&self, name: &str) -> Option<&DensityItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Re-verifies the seven defining properties of a density-controlled
/// filtration against raw grid data (averages are recomputed from `g`, not
/// trusted from the tree):
///
/// 1. level zero is exactly the root;
/// 2. every node is a valid box inside the root;
/// 3. every level tiles the root (volumes sum to the root volume);
/// 4. boxes in a level are almost disjoint (siblings meet only on the cut);
/// 5. each level refines the previous one (children tile their parent);
/// 6. sup of level diameters is nonincreasing (and below the stop diameter
///    at the bottom when one was set);
/// 7. no child average exceeds `lambda` times its parent's average.
///
/// Failures are recorded in the report, never raised as errors.
pub fn verify_density(tree: &FiltrationTree, g: &GridFunction, lambda: f64) -> Result<DensityReport> {
    if g.dim() != tree.dim() {
        return Err(Error::DimensionMismatch { expected: tree.dim(), got: g.dim() });
    }
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(Error::InvalidParameter(format!("density ratio {lambda} must exceed 1")));
    }
    let table = SummedTable::new(g);
    let avg = |b: &AxisBox| table.box_average(&b.lo, &b.hi);
    let root_vol = tree.root.volume();
    let diam_tol = 1e-9 * tree.root.diameter();
    let mut items = Vec::new();

    // 1. Level zero is the root alone.
    {
        let lvl0 = tree.level(0);
        let ok = lvl0 == vec![0]
            && tree.nodes[0].region == tree.root
            && tree.nodes[0].parent.is_none();
        items.push(DensityItem {
            name: "root-level".into(),
            pass: ok,
            worst: if ok { 0.0 } else { 1.0 },
            detail: format!("level 0 holds {} node(s)", lvl0.len()),
        });
    }

    // 2. Every node is a valid box inside the root.
    {
        let mut worst = 0.0f64;
        for n in &tree.nodes {
            let mut defect = 0.0f64;
            for a in 0..tree.dim() {
                defect = defect
                    .max(n.region.hi[a] - n.region.lo[a] - n.region.side(a)) // NaN guard
                    .max(tree.root.lo[a] - n.region.lo[a])
                    .max(n.region.hi[a] - tree.root.hi[a])
                    .max(n.region.lo[a] - n.region.hi[a]);
            }
            worst = worst.max(defect);
        }
        items.push(DensityItem {
            name: "membership".into(),
            pass: worst <= diam_tol,
            worst,
            detail: format!("{} nodes checked", tree.nodes.len()),
        });
    }

    // 3. Tiling: each level's volumes sum to the root volume.
    let depth = tree.max_depth();
    {
        let mut worst = 0.0f64;
        for m in 0..=depth {
            let v: f64 = tree.level(m).iter().map(|&i| tree.nodes[i].region.volume()).sum();
            worst = worst.max(((v - root_vol) / root_vol).abs());
        }
        items.push(DensityItem {
            name: "tiling".into(),
            pass: worst <= 1e-9,
            worst,
            detail: format!("levels 0..={depth}"),
        });
    }

    // 4. Almost disjoint: sibling interiors cannot overlap.
    {
        let mut worst = 0.0f64;
        for n in &tree.nodes {
            for (i, &a) in n.children.iter().enumerate() {
                for &b in &n.children[i + 1..] {
                    let (ra, rb) = (&tree.nodes[a].region, &tree.nodes[b].region);
                    let overlap: f64 = (0..tree.dim())
                        .map(|ax| (ra.hi[ax].min(rb.hi[ax]) - ra.lo[ax].max(rb.lo[ax])).max(0.0))
                        .product();
                    worst = worst.max(overlap / root_vol);
                }
            }
        }
        items.push(DensityItem {
            name: "almost-disjoint".into(),
            pass: worst <= 1e-12,
            worst,
            detail: "pairwise sibling overlap volume".into(),
        });
    }

    // 5. Refinement: children tile their parent exactly.
    {
        let mut worst = 0.0f64;
        for n in &tree.nodes {
            if n.children.is_empty() {
                continue;
            }
            let pv = n.region.volume();
            let cv: f64 = n.children.iter().map(|&c| tree.nodes[c].region.volume()).sum();
            worst = worst.max(((cv - pv) / pv).abs());
            for &c in &n.children {
                if !n.region.contains_box(&tree.nodes[c].region, diam_tol) {
                    worst = worst.max(1.0);
                }
            }
        }
        items.push(DensityItem {
            name: "refinement".into(),
            pass: worst <= 1e-9,
            worst,
            detail: "child volumes vs parent".into(),
        });
    }

    // 6. Diameter decay across levels.
    {
        let sup_diam: Vec<f64> = (0..=depth)
            .map(|m| {
                tree.level(m)
                    .iter()
                    .map(|&i| tree.nodes[i].region.diameter())
                    .fold(0.0, f64::max)
            })
            .collect();
        let mut worst = 0.0f64;
        for w in sup_diam.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        let mut pass = worst <= diam_tol;
        let mut detail = format!("sup diameters {sup_diam:?}");
        if let Some(dm) = tree.stop.min_diam {
            if tree.stop.max_depth.is_none() {
                let bottom = sup_diam.last().copied().unwrap_or(0.0);
                pass = pass && bottom < dm;
                let _ = write!(detail, "; terminal {bottom} vs stop {dm}");
            }
        }
        items.push(DensityItem { name: "diameter-decay".into(), pass, worst, detail });
    }

    // 7. Child averages stay below lambda times the parent average.
    {
        let mut worst = f64::NEG_INFINITY;
        let mut any = false;
        for n in &tree.nodes {
            if n.children.is_empty() {
                continue;
            }
            let pa = avg(&n.region)?;
            for &c in &n.children {
                let ca = avg(&tree.nodes[c].region)?;
                // Signed violation normalized by the parent average.
                let v = if pa > 0.0 {
                    ca / pa - lambda
                } else if ca > 1e-15 {
                    1.0
                } else {
                    -lambda
                };
                worst = worst.max(v);
                any = true;
            }
        }
        if !any {
            worst = -lambda; // single-node tree: vacuous pass
        }
        items.push(DensityItem {
            name: "average-control".into(),
            pass: worst <= 1e-9,
            worst,
            detail: format!("max child/parent average ratio minus {lambda}"),
        });
    }

    let pass = items.iter().all(|i| i.pass);
    Ok(DensityReport { items, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp_1d(n: usize) -> GridFunction {
        GridFunction::from_fn(vec![n], vec![0.0], 1.0 / n as f64, |x| x[0]).unwrap()
    }

    fn random_2d(n: usize, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..3.0)).collect();
        GridFunction::new(vec![n, n], vec![0.0, 0.0], 1.0 / n as f64, values).unwrap()
    }

    #[test]
    fn constant_splits_midpoint_into_dyadic_squares() {
        let g = GridFunction::constant(vec![16, 16], vec![0.0, 0.0], 1.0 / 16.0, 3.0).unwrap();
        let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let tree = build_filtration(&g, &root, 1.5, 2.0, StopRule {
            max_depth: Some(4),
            min_diam: None,
        })
        .unwrap();
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 16);
        for &i in &leaves {
            let n = &tree.nodes[i];
            assert!((n.region.side(0) - 0.25).abs() < 1e-12);
            assert!((n.region.side(1) - 0.25).abs() < 1e-12);
            assert!((n.x - 3.0).abs() < 1e-12);
            assert!((n.y - 9.0).abs() < 1e-9);
            assert!((n.z - 3.0).abs() < 1e-12);
            assert_eq!(tree.nodes[n.parent.unwrap()].cut.as_ref().unwrap().kind, CutKind::Midpoint);
        }
    }

    #[test]
    fn ramp_is_volume_capped_at_analytic_coordinate() {
        // Mean-difference never vanishes for the ramp, so the cut lands on
        // the cap: the larger-average (upper) part keeps a 1/1.5 fraction.
        let g = ramp_1d(300);
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let (minus, plus, cut) = split_box(&g, &root, 1.5).unwrap();
        assert_eq!(cut.kind, CutKind::VolumeCapped);
        assert!((cut.coord - 1.0 / 3.0).abs() < 1e-12, "coord {}", cut.coord);
        let t = SummedTable::new(&g);
        let am = t.box_average(&minus.lo, &minus.hi).unwrap();
        let ap = t.box_average(&plus.lo, &plus.hi).unwrap();
        // Midpoint sampling integrates a linear density exactly.
        assert!((am - 1.0 / 6.0).abs() < 1e-12, "lower avg {am}");
        assert!((ap - 2.0 / 3.0).abs() < 1e-12, "upper avg {ap}");
        assert!(ap <= 1.5 * 0.5 + 1e-12);
    }

    #[test]
    fn ramp_cap_at_two_is_the_midpoint() {
        let g = ramp_1d(256);
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let (minus, plus, cut) = split_box(&g, &root, 2.0).unwrap();
        assert!((cut.coord - 0.5).abs() < 1e-12);
        let t = SummedTable::new(&g);
        assert!((t.box_average(&minus.lo, &minus.hi).unwrap() - 0.25).abs() < 1e-12);
        assert!((t.box_average(&plus.lo, &plus.hi).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn equalizing_cut_is_found_by_bisection() {
        // f = (0, 4, 0, 3) on [0,1]: the lower side starts heavier at the
        // midpoint but the difference flips sign before the volume cap at
        // 2/3; the equal-average coordinate solves 1/c = 0.75/(1-c).
        let g =
            GridFunction::new(vec![4], vec![0.0], 0.25, vec![0.0, 4.0, 0.0, 3.0]).unwrap();
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let (minus, plus, cut) = split_box(&g, &root, 1.5).unwrap();
        assert_eq!(cut.kind, CutKind::Equalized);
        assert!((cut.coord - 4.0 / 7.0).abs() < 1e-9, "coord {}", cut.coord);
        let t = SummedTable::new(&g);
        let am = t.box_average(&minus.lo, &minus.hi).unwrap();
        let ap = t.box_average(&plus.lo, &plus.hi).unwrap();
        assert!((am - ap).abs() < 1e-9);
        assert!((am - 1.75).abs() < 1e-9);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let g = ramp_1d(8);
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(split_box(&g, &root, 1.0).is_err());
        assert!(split_box(&g, &root, 2.5).is_err());
        let degenerate = AxisBox::new(vec![0.3], vec![0.3]).unwrap();
        assert!(matches!(
            split_box(&g, &degenerate, 1.5),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn builder_requires_a_stop_rule_and_valid_lambda() {
        let g = random_2d(8, 5);
        let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
        assert!(matches!(
            build_filtration(&g, &root, 1.5, 2.0, StopRule::default()),
            Err(Error::Config(_))
        ));
        let stop = StopRule { max_depth: Some(2), min_diam: None };
        assert!(build_filtration(&g, &root, 1.0, 2.0, stop).is_err());
        assert!(build_filtration(&g, &root, 1.5, 0.9, stop).is_err());
    }

    #[test]
    fn built_tree_passes_verification_and_shrinks() {
        for seed in 0..5u64 {
            let g = random_2d(32, seed);
            let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
            let tree = build_filtration(&g, &root, 1.5, 2.0, StopRule {
                max_depth: None,
                min_diam: Some(1.0 / 16.0),
            })
            .unwrap();
            let report = verify_density(&tree, &g, 1.5).unwrap();
            assert!(report.pass, "{report:?}");
            for &i in &tree.leaves() {
                assert!(tree.nodes[i].region.diameter() < 1.0 / 16.0);
            }
            // Statistics invariants: z chains maxima down the tree.
            for n in &tree.nodes {
                assert!(n.z >= n.x - 1e-12);
                if let Some(p) = n.parent {
                    assert!((n.z - tree.nodes[p].z.max(n.x)).abs() < 1e-12);
                }
                assert!(n.y >= n.x.powi(2) - 1e-9); // Jensen
            }
        }
    }

    #[test]
    fn lambda_above_two_is_clamped() {
        let g = random_2d(16, 11);
        let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let tree = build_filtration(&g, &root, 8.0, 2.0, StopRule {
            max_depth: Some(3),
            min_diam: None,
        })
        .unwrap();
        assert_eq!(tree.lambda_eff, 2.0);
        assert!(verify_density(&tree, &g, 8.0).unwrap().pass);
        // The clamp only strengthens the volume cap.
        for n in &tree.nodes {
            if let Some(p) = n.parent {
                let frac = n.region.volume() / tree.nodes[p].region.volume();
                assert!(frac <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn every_level_tiles_the_root() {
        let g = random_2d(16, 3);
        let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let tree = build_filtration(&g, &root, 1.25, 2.0, StopRule {
            max_depth: Some(6),
            min_diam: Some(0.2),
        })
        .unwrap();
        for m in 0..=tree.max_depth() + 2 {
            let v: f64 = tree.level(m).iter().map(|&i| tree.nodes[i].region.volume()).sum();
            assert!((v - 1.0).abs() < 1e-12, "level {m} volume {v}");
        }
    }

    #[test]
    fn planted_average_violation_is_reported() {
        // All mass in [0, 0.1]: the child [0, 0.1] has average 10x the root.
        let g = GridFunction::from_fn(vec![100], vec![0.0], 0.01, |x| {
            if x[0] < 0.1 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let mut tree = FiltrationTree {
            root: root.clone(),
            lambda: 1.5,
            lambda_eff: 1.5,
            p: 2.0,
            stop: StopRule { max_depth: Some(1), min_diam: None },
            nodes: vec![Node {
                region: root,
                depth: 0,
                parent: None,
                children: vec![1, 2],
                cut: Some(CutInfo { axis: 0, coord: 0.1, kind: CutKind::Equalized }),
                x: 0.1,
                y: 0.1,
                z: 0.1,
            }],
        };
        for (lo, hi) in [(0.0, 0.1), (0.1, 1.0)] {
            let region = AxisBox::new(vec![lo], vec![hi]).unwrap();
            tree.nodes.push(Node {
                region,
                depth: 1,
                parent: Some(0),
                children: vec![],
                cut: None,
                x: 0.0,
                y: 0.0,
                z: 0.1,
            });
        }
        let report = verify_density(&tree, &g, 1.5).unwrap();
        assert!(!report.pass);
        let item = report.item("average-control").unwrap();
        assert!(!item.pass);
        // Child average 1.0 vs parent 0.1: ratio 10 vs allowed 1.5.
        assert!((item.worst - (10.0 - 1.5)).abs() < 1e-9, "worst {}", item.worst);
        // Structural items still pass.
        assert!(report.item("tiling").unwrap().pass);
        assert!(report.item("refinement").unwrap().pass);
    }

    #[test]
    fn single_node_tree_passes_vacuously() {
        let g = ramp_1d(16);
        let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let tree = build_filtration(&g, &root, 1.5, 2.0, StopRule {
            max_depth: Some(0),
            min_diam: None,
        })
        .unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(verify_density(&tree, &g, 1.5).unwrap().pass);
    }

    #[test]
    fn json_and_svg_exports_cover_the_tree() {
        let g = random_2d(16, 21);
        let root = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let tree = build_filtration(&g, &root, 1.5, 2.0, StopRule {
            max_depth: Some(3),
            min_diam: None,
        })
        .unwrap();
        let json: serde_json::Value = serde_json::from_str(&tree.to_json()).unwrap();
        assert_eq!(json["lambda"], 1.5);
        assert!(json["root"]["children"].as_array().map_or(0, |c| c.len()) == 2);
        let svg = tree.to_svg().unwrap();
        assert_eq!(svg.matches("<rect").count(), tree.leaves().len());
        // 1d trees have no picture.
        let g1 = ramp_1d(8);
        let r1 = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let t1 = build_filtration(&g1, &r1, 1.5, 2.0, StopRule {
            max_depth: Some(1),
            min_diam: None,
        })
        .unwrap();
        assert!(t1.to_svg().is_err());
    }

    #[test]
    fn cut_fraction_stays_in_the_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = 32;
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let g = GridFunction::new(vec![n], vec![0.0], 1.0 / n as f64, values).unwrap();
            let root = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
            for lambda_eff in [1.25, 1.5, 2.0] {
                let (minus, plus, cut) = split_box(&g, &root, lambda_eff).unwrap();
                let f = minus.volume().max(plus.volume());
                assert!(f <= 1.0 / lambda_eff + 1e-9, "fraction {f} at {lambda_eff}");
                assert!(cut.coord >= 1.0 - 1.0 / lambda_eff - 1e-9);
                assert!(cut.coord <= 1.0 / lambda_eff + 1e-9);
            }
        }
    }
}
