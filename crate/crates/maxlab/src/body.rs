//! Geometric bodies over which maximal averages are taken.
//!
//! A [`BodySpec`] is an axis-aligned box or a metric ball (in the l^1, l^2 or
//! l^inf norm) with a center and per-axis half-widths. Balls are isotropic:
//! all half-widths must agree and play the role of the radius. Membership is
//! *closed* (boundary points belong to the body), matching the convention
//! used throughout the crate for extracting covers and locating cell centers
//! inside shrunken bodies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The shape of an averaging body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    /// Axis-aligned box with independent half-widths per axis.
    Box,
    /// l^1 (cross-polytope) ball.
    Ball1,
    /// Euclidean ball.
    Ball2,
    /// l^inf ball, i.e. a cube.
    BallInf,
}

/// A concrete averaging body: shape, center and half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub kind: BodyKind,
    pub center: Vec<f64>,
    /// Per-axis half-widths. For ball kinds all entries equal the radius.
    pub half_widths: Vec<f64>,
}

impl BodySpec {
    /// Axis-aligned box with the given center and half-widths.
    pub fn new_box(center: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        let b = BodySpec { kind: BodyKind::Box, center, half_widths };
        b.validate()?;
        Ok(b)
    }

    /// Cube (equal half-widths) centered at `center`.
    pub fn cube(center: Vec<f64>, half: f64) -> Result<Self> {
        let n = center.len();
        Self::new_box(center, vec![half; n])
    }

    /// Isotropic ball of the given kind and radius.
    pub fn new_ball(kind: BodyKind, center: Vec<f64>, radius: f64) -> Result<Self> {
        if kind == BodyKind::Box {
            return Err(Error::InvalidBody(
                "use new_box for box bodies; new_ball is for metric balls".into(),
            ));
        }
        let n = center.len();
        let b = BodySpec { kind, center, half_widths: vec![radius; n] };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Checks internal consistency: matching dimensions, finite center,
    /// strictly positive half-widths, isotropy for balls.
    pub fn validate(&self) -> Result<()> {
        let n = self.center.len();
        if n == 0 {
            return Err(Error::InvalidBody("zero-dimensional body".into()));
        }
        if self.half_widths.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.half_widths.len() });
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBody("non-finite center coordinate".into()));
        }
        for &r in &self.half_widths {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidBody(format!("half-width {r} must be positive")));
            }
        }
        if self.kind != BodyKind::Box {
            let r0 = self.half_widths[0];
            if self.half_widths.iter().any(|&r| r != r0) {
                return Err(Error::InvalidBody("ball bodies must be isotropic".into()));
            }
        }
        Ok(())
    }

    /// Radius of a ball body; errors for boxes with unequal half-widths.
    pub fn radius(&self) -> Result<f64> {
        let r0 = self.half_widths[0];
        if self.half_widths.iter().any(|&r| r != r0) {
            return Err(Error::InvalidBody("anisotropic body has no single radius".into()));
        }
        Ok(r0)
    }

    /// The concentric body scaled by `factor` about its own center.
    pub fn dilate(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dilation factor {factor} must be positive and finite"
            )));
        }
        let mut out = self.clone();
        for r in &mut out.half_widths {
            *r *= factor;
        }
        Ok(out)
    }

    /// Exact Lebesgue volume from the closed-form formulas.
    pub fn volume(&self) -> f64 {
        let n = self.dim();
        match self.kind {
            BodyKind::Box | BodyKind::BallInf => {
                self.half_widths.iter().map(|r| 2.0 * r).product()
            }
            BodyKind::Ball2 => {
                let r = self.half_widths[0];
                unit_ball2_volume(n) * r.powi(n as i32)
            }
            BodyKind::Ball1 => {
                let r = self.half_widths[0];
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                (2f64).powi(n as i32) / fact * r.powi(n as i32)
            }
        }
    }

    /// Closed membership test: boundary points count as inside.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let inside = match self.kind {
            BodyKind::Box | BodyKind::BallInf => self
                .center
                .iter()
                .zip(&self.half_widths)
                .zip(x)
                .all(|((&c, &r), &xi)| (xi - c).abs() <= r),
            BodyKind::Ball2 => {
                let r = self.half_widths[0];
                let d2: f64 =
                    self.center.iter().zip(x).map(|(&c, &xi)| (xi - c) * (xi - c)).sum();
                d2 <= r * r
            }
            BodyKind::Ball1 => {
                let r = self.half_widths[0];
                let d1: f64 = self.center.iter().zip(x).map(|(&c, &xi)| (xi - c).abs()).sum();
                d1 <= r
            }
        };
        Ok(inside)
    }

    /// Tight axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().zip(&self.half_widths).map(|(&c, &r)| c - r).collect();
        let hi = self.center.iter().zip(&self.half_widths).map(|(&c, &r)| c + r).collect();
        (lo, hi)
    }

    /// Characteristic size: the largest half-width (circumradius of the
    /// bounding box in the l^inf norm). Used to order ladder scales.
    pub fn size(&self) -> f64 {
        self.half_widths.iter().cloned().fold(0.0, f64::max)
    }
}

/// Volume of the unit Euclidean ball in dimension `n`, via the two-step
/// recursion v_n = v_{n-2} * 2*pi / n with v_0 = 1, v_1 = 2 (exact in the
/// reals; avoids a gamma-function dependency).
pub fn unit_ball2_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball2_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}
