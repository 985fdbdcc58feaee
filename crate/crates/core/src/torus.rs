//! Points of the flat 2-torus and its quotient metric.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::Vec2;

/// Tolerance for point equality on the torus.
pub const POINT_EQ_TOL: f64 = 1e-12;

/// A point of ℝ²/ℤ², stored with both coordinates reduced into `[0, 1)`.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

#[inline]
pub fn reduce_unit(t: f64) -> f64 {
    let r = t - t.floor();
    // -1e-18 reduces to 1.0 after rounding
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap into `[-0.5, 0.5)`.
#[inline]
pub fn wrap_centered(t: f64) -> f64 {
    let r = t - (t + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

impl TorusPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1: reduce_unit(x1), x2: reduce_unit(x2) }
    }

    pub const ORIGIN: TorusPoint = TorusPoint { x1: 0.0, x2: 0.0 };

    pub fn from_lift(v: Vec2) -> Self {
        Self::new(v.x, v.y)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    /// The representative in `[0,1)²`.
    pub fn lift(&self) -> Vec2 {
        Vec2::new(self.x1, self.x2)
    }

    /// The representative of `self` nearest to the lifted point `reference`.
    pub fn lift_near(&self, reference: Vec2) -> Vec2 {
        let d = Vec2::new(wrap_centered(self.x1 - reference.x), wrap_centered(self.x2 - reference.y));
        reference + d
    }

    /// Minimal-image displacement `to - self`.
    pub fn displacement_to(&self, to: &TorusPoint) -> Vec2 {
        Vec2::new(wrap_centered(to.x1 - self.x1), wrap_centered(to.x2 - self.x2))
    }

    pub fn translate(&self, v: Vec2) -> TorusPoint {
        TorusPoint::new(self.x1 + v.x, self.x2 + v.y)
    }

    pub fn approx_eq(&self, other: &TorusPoint, tol: f64) -> bool {
        torus_distance(self, other) <= tol
    }
}

impl PartialEq for TorusPoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, POINT_EQ_TOL)
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

impl From<TorusPoint> for [f64; 2] {
    fn from(p: TorusPoint) -> Self {
        [p.x1, p.x2]
    }
}

impl From<[f64; 2]> for TorusPoint {
    fn from(v: [f64; 2]) -> Self {
        TorusPoint::new(v[0], v[1])
    }
}

/// Flat quotient distance: Euclidean norm of the nearest integer translate
/// of the coordinate difference.
pub fn torus_distance(p: &TorusPoint, q: &TorusPoint) -> f64 {
    p.displacement_to(q).norm()
}
