//! Local leaf segments in the eigen-coordinate chart.

use serde::{Deserialize, Serialize};

use super::shadowing::solve_leaf_offset;
use crate::dynamics::{reduce_lift, HyperbolicMap};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::torus::TorusPoint;

/// Distance from the chart point at which a point is declared off-leaf.
pub const LEAF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Unstable,
    Stable,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Unstable => Side::Stable,
            Side::Stable => Side::Unstable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half: f64) -> Self {
        Self { lo: -half, hi: half }
    }

    /// Open-interval membership.
    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn length(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) }
    }
}

/// A piece of `W^side_base`, parametrized by the eigen-coordinate along
/// `side` of the displacement from `base`. For linear maps the chart is
/// `t ↦ base + t·e_side`, which is arclength since `e_side` is a unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafSegment {
    base: TorusPoint,
    side: Side,
    range: Interval,
}

impl LeafSegment {
    pub fn new(base: TorusPoint, side: Side, range: Interval) -> Result<Self> {
        if !(range.lo <= 0.0 && 0.0 <= range.hi) {
            return Err(Error::Invalid(format!("leaf range [{}, {}] does not contain 0", range.lo, range.hi)));
        }
        Ok(Self { base, side, range })
    }

    pub fn base(&self) -> TorusPoint {
        self.base
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn range(&self) -> Interval {
        self.range
    }

    /// Displacement from the base to the chart point `t`.
    pub fn offset(&self, map: &HyperbolicMap, t: f64) -> Result<Vec2> {
        leaf_offset(map, &self.base, self.side, t)
    }

    pub fn point(&self, map: &HyperbolicMap, t: f64) -> Result<TorusPoint> {
        if t.is_nan() || t < self.range.lo || t > self.range.hi {
            return Err(Error::Invalid(format!("leaf parameter {t} outside [{}, {}]", self.range.lo, self.range.hi)));
        }
        Ok(TorusPoint::from_lift(self.base.lift() + self.offset(map, t)?))
    }

    /// Chart coordinate of a point on the leaf through the base; fails with
    /// `NotOnLeaf` if `z` is farther than [`LEAF_TOL`] from the leaf.
    pub fn coordinate(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<f64> {
        leaf_coordinate(map, &self.base, self.side, z)
    }

    /// Membership in the open segment.
    pub fn contains(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<bool> {
        match self.coordinate(map, z) {
            Ok(t) => Ok(self.range.contains(t)),
            Err(Error::NotOnLeaf { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

pub(crate) fn along(map: &HyperbolicMap, side: Side) -> (Vec2, Vec2) {
    let e = map.eigen();
    match side {
        Side::Unstable => (e.e_u, e.dual_u),
        Side::Stable => (e.e_s, e.dual_s),
    }
}

pub fn leaf_offset(map: &HyperbolicMap, base: &TorusPoint, side: Side, t: f64) -> Result<Vec2> {
    solve_leaf_offset(map, base.lift(), t, side == Side::Unstable, None)
}

pub fn leaf_coordinate(map: &HyperbolicMap, base: &TorusPoint, side: Side, z: &TorusPoint) -> Result<f64> {
    let d = base.displacement_to(z);
    let (_, row) = along(map, side);
    let t = row.dot(d);
    let gap = (leaf_offset(map, base, side, t)? - d).norm();
    if gap > LEAF_TOL {
        return Err(Error::NotOnLeaf { offset: gap });
    }
    Ok(t)
}

/// Distances `d(f^k x, f^k y)` for `k = 0..=n`, where `y` is the chart
/// point `t` on the stable leaf of `x` (iterating forward) or on the
/// unstable leaf (iterating backward).
///
/// In f64 the unstable component of a contracting pair offset is rounding
/// noise amplified by `λ_u^k`, which swamps `λ^k d` after about 15 steps.
/// For perturbed maps the offset is therefore re-projected onto the leaf of
/// the current base point after every step, keeping its along-leaf
/// coordinate.
pub fn leaf_pair_distances(map: &HyperbolicMap, x: &TorusPoint, side: Side, t: f64, n: usize) -> Result<Vec<f64>> {
    let eig = *map.eigen();
    if map.is_linear() {
        let rate = match side {
            Side::Stable => eig.lambda_s.abs(),
            Side::Unstable => 1.0 / eig.lambda_u.abs(),
        };
        return Ok((0..=n).map(|k| t.abs() * rate.powi(k as i32)).collect());
    }
    let unstable = side == Side::Unstable;
    let (_, row) = along(map, side);
    let (_, cross_row) = along(map, side.other());
    let mut b = x.lift();
    let mut o = solve_leaf_offset(map, b, t, unstable, None)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(o.norm());
    for _ in 0..n {
        let stepped = if unstable {
            let pre = reduce_lift(map.inverse_lift(b)?);
            let off = map.offset_backward(pre, o)?;
            b = pre;
            off
        } else {
            let off = map.offset_forward(b, o);
            b = reduce_lift(map.forward_lift(b));
            off
        };
        o = solve_leaf_offset(map, b, row.dot(stepped), unstable, Some(cross_row.dot(stepped)))?;
        out.push(o.norm());
    }
    Ok(out)
}
