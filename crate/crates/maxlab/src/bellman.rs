//! The three-variable certificate function behind the norm lower bounds.
//!
//! For a box `Q`, write `x = ⟨f⟩_Q`, `y = ⟨f^p⟩_Q`, and `z` for the largest
//! average over enclosing boxes. The certificate function
//!
//! ```text
//! B(x, y, z) = z^p + C(p, lambda) * (y - x z^(p-1))_+,
//! C(p, lambda) = (lambda^p - 1) / (lambda^p - lambda)
//! ```
//!
//! satisfies a per-node averaging inequality on density-controlled
//! partitions ([`main_inequality_margin`]): splitting `Q` into parts whose
//! averages stay within a factor `lambda` can only increase the weighted
//! `B`-sum. Telescoping down a [`FiltrationTree`] and comparing with the
//! maximal field of the tree's own body family turns this into a verifiable
//! lower bound `⟨(Mf)^p⟩_S ≥ B(x_S, y_S, x_S)` ([`lemma_certificate`]),
//! whose constant-extraction form is `‖Mf‖_p ≥ C^(1/p) ‖f‖_p` on
//! vanishing-average exhaustions ([`theorem_constants`]).

use crate::error::{check_exponent, Error, Result};
use crate::grid::{GridFunction, SummedTable};
use crate::operators::MaximalField;
use crate::partition::{AxisBox, FiltrationTree};
use serde::{Deserialize, Serialize};

/// Statistics of a density over one partition node, together with the
/// exponent and density ratio they are certified against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanPoint {
    /// Mean of `f` over the node.
    pub x: f64,
    /// Mean of `f^p` over the node.
    pub y: f64,
    /// Largest mean of `f` over the node and its ancestors.
    pub z: f64,
    pub p: f64,
    pub lambda: f64,
}

impl BellmanPoint {
    pub fn new(x: f64, y: f64, z: f64, p: f64, lambda: f64) -> Result<BellmanPoint> {
        let pt = BellmanPoint { x, y, z, p, lambda };
        pt.validate()?;
        Ok(pt)
    }

    /// Domain check: `0 <= x <= z`, `y >= 0`, `p > 1`, `lambda > 1`.
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if !(self.lambda.is_finite() && self.lambda > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density ratio {} must exceed 1 (coefficient pole at 1)",
                self.lambda
            )));
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::InvalidParameter("non-finite certificate point".into()));
        }
        if self.x < 0.0 || self.y < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "averages x = {}, y = {} must be nonnegative",
                self.x, self.y
            )));
        }
        if self.x > self.z {
            return Err(Error::InvalidParameter(format!(
                "running maximum z = {} cannot fall below the node mean x = {}",
                self.z, self.x
            )));
        }
        Ok(())
    }
}

/// The coefficient `(lambda^p - 1) / (lambda^p - lambda)`.
pub fn coefficient(p: f64, lambda: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density ratio {lambda} must exceed 1 (coefficient pole at 1)"
        )));
    }
    let lp = lambda.powf(p);
    Ok((lp - 1.0) / (lp - lambda))
}

/// Evaluates `z^p + C(p, lambda) * (y - x z^(p-1))_+`.
pub fn bellman_eval(pt: &BellmanPoint) -> Result<f64> {
    pt.validate()?;
    let c = coefficient(pt.p, pt.lambda)?;
    Ok(pt.z.powf(pt.p) + c * (pt.y - pt.x * pt.z.powf(pt.p - 1.0)).max(0.0))
}

/// Signed gap between the chord of `s -> s^p` over `[1, lambda]` and the
/// curve itself: `(s^p - 1) - C(p, lambda) (s^p - s)`, which is nonnegative
/// on the whole interval by convexity. Computed over the common denominator
/// so both endpoints return exactly zero.
pub fn chord_margin(s: f64, p: f64, lambda: f64) -> Result<f64> {
    let c_den = {
        check_exponent(p)?;
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density ratio {lambda} must exceed 1"
            )));
        }
        lambda.powf(p) - lambda
    };
    if !(s >= 1.0 && s <= lambda) {
        return Err(Error::InvalidParameter(format!(
            "chord parameter {s} outside [1, {lambda}]"
        )));
    }
    let c_num = lambda.powf(p) - 1.0;
    Ok(((s.powf(p) - 1.0) * c_den - c_num * (s.powf(p) - s)) / c_den)
}

/// Signed slack in the per-node averaging inequality
/// `B(Q) <= sum of w_P B(P)` for a node split into weighted parts.
///
/// Input-consistency failures (weights not summing to one, averages not
/// aggregating, a child's running maximum below `max(x_P, z_Q)`, mixed
/// exponents) are reported as errors, distinct from a genuinely negative
/// margin. The density precondition `x_P <= lambda x_Q` is *not* enforced:
/// the contract `margin >= -1e-9` only applies when it holds, and probing
/// its necessity requires evaluating points that violate it.
pub fn main_inequality_margin(
    parent: &BellmanPoint,
    children: &[(f64, BellmanPoint)],
) -> Result<f64> {
    parent.validate()?;
    let b_parent = bellman_eval(parent)?;
    let (mut wsum, mut xsum, mut ysum, mut bsum) = (0.0, 0.0, 0.0, 0.0);
    for (w, pt) in children {
        pt.validate()?;
        if pt.p != parent.p || pt.lambda != parent.lambda {
            return Err(Error::Inconsistent(format!(
                "child certified at (p, lambda) = ({}, {}) against parent ({}, {})",
                pt.p, pt.lambda, parent.p, parent.lambda
            )));
        }
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::Inconsistent(format!("weight {w} must be positive")));
        }
        if pt.z < pt.x.max(parent.z) - 1e-12 * parent.z.max(1.0) {
            return Err(Error::Inconsistent(format!(
                "child running maximum {} below max(x_P, z_Q) = {}",
                pt.z,
                pt.x.max(parent.z)
            )));
        }
        wsum += w;
        xsum += w * pt.x;
        ysum += w * pt.y;
        bsum += w * bellman_eval(pt)?;
    }
    if (wsum - 1.0).abs() > 1e-12 {
        return Err(Error::Inconsistent(format!("weights sum to {wsum}, not 1")));
    }
    if (xsum - parent.x).abs() > 1e-9 * parent.x.abs().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "children aggregate to mean {xsum}, parent has {}",
            parent.x
        )));
    }
    if (ysum - parent.y).abs() > 1e-9 * parent.y.abs().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "children aggregate to power mean {ysum}, parent has {}",
            parent.y
        )));
    }
    Ok(bsum - b_parent)
}

/// All internal nodes of a tree as weighted inequality instances, certified
/// at the tree's own exponent and density ratio.
pub fn filtration_instances(
    tree: &FiltrationTree,
) -> Vec<(BellmanPoint, Vec<(f64, BellmanPoint)>)> {
    let point = |i: usize| {
        let n = &tree.nodes[i];
        BellmanPoint { x: n.x, y: n.y, z: n.z, p: tree.p, lambda: tree.lambda }
    };
    tree.nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.children.is_empty())
        .map(|(i, n)| {
            let vol = n.region.volume();
            let kids = n
                .children
                .iter()
                .map(|&c| (tree.nodes[c].region.volume() / vol, point(c)))
                .collect();
            (point(i), kids)
        })
        .collect()
}

/// A verified instance of the lower-bound certificate on one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub node_id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// `⟨(Mf)^p⟩_S` for the partition's body family joined with `mq`.
    pub lhs: f64,
    /// `B(x_S, y_S, z_S)` with `z_S = x_S` (the root has no ancestors).
    pub rhs: f64,
    /// `lhs - rhs`; nonnegative up to partition-resolution error.
    pub margin: f64,
}

/// Certifies `⟨(Mf)^p⟩_S >= B(x_S, y_S, x_S)` on the root `s` of `tree`.
///
/// The left side is integrated exactly: each leaf carries the running
/// maximum `z` of its chain, the supplied field `mq` refines it below the
/// leaf scale, and `max(z_leaf, mq)^p` is summed over the leaf-cell overlap
/// pieces (off-grid parts of a leaf contribute `z_leaf^p`, matching the
/// zero extension of `f`). The field must live on the same grid as `g` and
/// the tree must enforce at least the requested density ratio; otherwise
/// the inputs describe a different family and are rejected.
pub fn lemma_certificate(
    g: &GridFunction,
    s: &AxisBox,
    tree: &FiltrationTree,
    p: f64,
    lambda: f64,
    mq: &MaximalField,
) -> Result<Certificate> {
    check_exponent(p)?;
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density ratio {lambda} must exceed 1"
        )));
    }
    if g.dim() != s.dim() || g.dim() != tree.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: s.dim() });
    }
    let fld = &mq.field;
    if fld.shape != g.shape || fld.origin != g.origin || fld.h != g.h {
        return Err(Error::Config(
            "maximal field lives on a different grid than the density".into(),
        ));
    }
    let tol = 1e-9 * (1.0 + tree.root.diameter());
    if !(0..s.dim()).all(|a| {
        (s.lo[a] - tree.root.lo[a]).abs() <= tol && (s.hi[a] - tree.root.hi[a]).abs() <= tol
    }) {
        return Err(Error::Config("partition tree is not rooted at the given region".into()));
    }
    if lambda < tree.lambda_eff - 1e-12 {
        return Err(Error::Config(format!(
            "partition only enforces density ratio {}; cannot certify at {lambda}",
            tree.lambda_eff
        )));
    }

    let table = SummedTable::new(g);
    let gp = g.map(|v| v.abs().powf(p))?;
    let table_p = SummedTable::new(&gp);
    let x_s = table.box_average(&s.lo, &s.hi)?;
    let y_s = table_p.box_average(&s.lo, &s.hi)?;
    let root_pt = BellmanPoint { x: x_s, y: y_s, z: x_s, p, lambda };
    let rhs = bellman_eval(&root_pt)?;

    // Exact integral of max(z_leaf, mq)^p over each leaf.
    let dim = g.dim();
    let strides = g.strides();
    let mut acc = 0.0f64;
    for leaf in tree.leaves() {
        let node = &tree.nodes[leaf];
        let region = &node.region;
        let zp = node.z.powf(p);
        let mut covered = 0.0f64;
        // Index ranges of grid cells meeting the leaf box.
        let mut lo_idx = vec![0usize; dim];
        let mut hi_idx = vec![0usize; dim];
        let mut empty = false;
        for a in 0..dim {
            let lo = ((region.lo[a] - g.origin[a]) / g.h).floor().max(0.0) as usize;
            let hi = (((region.hi[a] - g.origin[a]) / g.h).ceil().max(0.0) as usize)
                .min(g.shape[a]);
            lo_idx[a] = lo.min(g.shape[a]);
            hi_idx[a] = hi;
            empty |= lo_idx[a] >= hi_idx[a];
        }
        if !empty {
            let mut idx = lo_idx.clone();
            'cells: loop {
                let mut vol = 1.0f64;
                let mut lin = 0usize;
                for a in 0..dim {
                    let c_lo = g.origin[a] + idx[a] as f64 * g.h;
                    let c_hi = c_lo + g.h;
                    vol *= (region.hi[a].min(c_hi) - region.lo[a].max(c_lo)).max(0.0);
                    lin += idx[a] * strides[a];
                }
                if vol > 0.0 {
                    acc += vol * node.z.max(fld.values[lin]).powf(p);
                    covered += vol;
                }
                // Odometer over the index sub-box.
                for a in (0..dim).rev() {
                    idx[a] += 1;
                    if idx[a] < hi_idx[a] {
                        continue 'cells;
                    }
                    idx[a] = lo_idx[a];
                }
                break;
            }
        }
        acc += (region.volume() - covered).max(0.0) * zp;
    }
    let lhs = acc / s.volume();
    Ok(Certificate { node_id: 0, x: x_s, y: y_s, z: x_s, lhs, rhs, margin: lhs - rhs })
}

/// The closed-form norm-increase constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// `((lambda^p - 1)/(lambda^p - lambda))^(1/p)` for a density ratio
    /// `lambda`; nonincreasing in `lambda`.
    pub general: f64,
    /// `(p/(p-1))^(1/p)`, the `lambda -> 1` limit (uncentered boxes).
    pub limit: f64,
    /// The general constant at `lambda = 2^n`, the ratio enforced by
    /// half-splitting boxes in dimension `n`.
    pub dyadic: f64,
}

/// The norm-increase constant for density ratio `lambda`.
pub fn general_constant(p: f64, lambda: f64) -> Result<f64> {
    Ok(coefficient(p, lambda)?.powf(1.0 / p))
}

/// The `lambda -> 1` limiting constant `(p/(p-1))^(1/p)`.
pub fn limit_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok((p / (p - 1.0)).powf(1.0 / p))
}

/// Evaluates all three constants; the dyadic value goes through the same
/// code path as the general one at `lambda = 2^n`, so the substitution
/// identity holds bitwise.
pub fn theorem_constants(p: f64, lambda: f64, n: u32) -> Result<TheoremConstants> {
    if n == 0 || n > 1023 {
        return Err(Error::InvalidParameter(format!(
            "dimension {n} outside the supported range 1..=1023"
        )));
    }
    Ok(TheoremConstants {
        general: general_constant(p, lambda)?,
        limit: limit_constant(p)?,
        dyadic: general_constant(p, 2.0f64.powi(n as i32))?,
    })
}
