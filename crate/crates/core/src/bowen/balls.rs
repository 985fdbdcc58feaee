//! Bowen balls: two-sided, forward, and leafwise.

use serde::{Deserialize, Serialize};

use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::hyperbolic::{leaf_coordinate, Interval, LeafSegment, Side};
use crate::linalg::Vec2;
use crate::torus::{wrap_centered, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// `B_{n,m}`: times `−n < k < m`.
    TwoSided,
    /// `B_m = B_{1,m}`: times `0 ≤ k < m`.
    Forward,
    /// `B^u_m`: on the unstable leaf of the center, times `0 ≤ k < m`.
    LeafUnstable,
    /// `B^s_n`: on the stable leaf of the center, times `0 ≤ k < n` backward.
    LeafStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BowenBallSpec {
    pub center: TorusPoint,
    /// Backward depth.
    pub n: usize,
    /// Forward depth.
    pub m: usize,
    pub r: f64,
    pub flavor: Flavor,
}

impl BowenBallSpec {
    pub fn new(center: TorusPoint, n: usize, m: usize, r: f64, flavor: Flavor) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Invalid("Bowen ball depths must be positive".into()));
        }
        if flavor == Flavor::Forward && n != 1 {
            return Err(Error::Invalid("forward Bowen balls have backward depth 1".into()));
        }
        if !(r > 0.0 && r < 0.5) {
            return Err(Error::Invalid(format!("Bowen ball radius {r} outside (0, 0.5)")));
        }
        Ok(Self { center, n, m, r, flavor })
    }

    pub fn two_sided(center: TorusPoint, n: usize, m: usize, r: f64) -> Result<Self> {
        Self::new(center, n, m, r, Flavor::TwoSided)
    }

    pub fn forward(center: TorusPoint, m: usize, r: f64) -> Result<Self> {
        Self::new(center, 1, m, r, Flavor::Forward)
    }

    pub fn leaf_unstable(center: TorusPoint, m: usize, r: f64) -> Result<Self> {
        Self::new(center, 1, m, r, Flavor::LeafUnstable)
    }

    pub fn leaf_stable(center: TorusPoint, n: usize, r: f64) -> Result<Self> {
        Self::new(center, n, 1, r, Flavor::LeafStable)
    }

    /// Leafwise ball of depth `depth` on the given side.
    pub fn leaf(center: TorusPoint, side: Side, depth: usize, r: f64) -> Result<Self> {
        match side {
            Side::Unstable => Self::leaf_unstable(center, depth, r),
            Side::Stable => Self::leaf_stable(center, depth, r),
        }
    }

    /// `(forward steps, backward steps)` constrained beyond `k = 0`.
    fn steps(&self) -> (usize, usize) {
        match self.flavor {
            Flavor::TwoSided => (self.m - 1, self.n - 1),
            Flavor::Forward | Flavor::LeafUnstable => (self.m - 1, 0),
            Flavor::LeafStable => (0, self.n - 1),
        }
    }

    fn leaf_side(&self) -> Option<Side> {
        match self.flavor {
            Flavor::LeafUnstable => Some(Side::Unstable),
            Flavor::LeafStable => Some(Side::Stable),
            _ => None,
        }
    }
}

fn wrap(v: Vec2) -> Vec2 {
    Vec2::new(wrap_centered(v.x), wrap_centered(v.y))
}

/// `max_k d(f^k z, f^k c)` over `−back ≤ k ≤ fwd`, where `w = z − c` on
/// the lift. Stops early once the running maximum reaches `limit`.
pub(crate) fn window_max(map: &HyperbolicMap, c: Vec2, w: Vec2, fwd: usize, back: usize, limit: f64) -> Result<f64> {
    let mut worst = wrap(w).norm();
    if worst >= limit {
        return Ok(worst);
    }
    let (mut b, mut o) = (c, wrap(w));
    for _ in 0..fwd {
        let (nb, no) = map.step_pair_forward(b, o);
        b = nb;
        o = wrap(no);
        worst = worst.max(o.norm());
        if worst >= limit {
            return Ok(worst);
        }
    }
    let (mut b, mut o) = (c, wrap(w));
    for _ in 0..back {
        let (nb, no) = map.step_pair_backward(b, o)?;
        b = nb;
        o = wrap(no);
        worst = worst.max(o.norm());
        if worst >= limit {
            return Ok(worst);
        }
    }
    Ok(worst)
}

/// `r − max_k d(f^k z, f^k c)`: positive iff `z` is in the ball. The
/// maximum is only followed until it exceeds `r + slack`. Leaf flavors fail
/// with `NotOnLeaf` when `z` is off the center's leaf.
pub fn ball_margin_with_slack(map: &HyperbolicMap, spec: &BowenBallSpec, z: &TorusPoint, slack: f64) -> Result<f64> {
    if let Some(side) = spec.leaf_side() {
        leaf_coordinate(map, &spec.center, side, z)?;
    }
    let (fwd, back) = spec.steps();
    let w = spec.center.displacement_to(z);
    Ok(spec.r - window_max(map, spec.center.lift(), w, fwd, back, spec.r + slack)?)
}

pub fn ball_margin(map: &HyperbolicMap, spec: &BowenBallSpec, z: &TorusPoint) -> Result<f64> {
    ball_margin_with_slack(map, spec, z, 0.0)
}

/// Strict-inequality membership.
pub fn contains(map: &HyperbolicMap, spec: &BowenBallSpec, z: &TorusPoint) -> Result<bool> {
    Ok(ball_margin(map, spec, z)? > 0.0)
}

/// Width below which a boundary case is treated as undecidable: solver
/// tolerance for perturbed maps, rounding for linear ones.
pub fn membership_pad(map: &HyperbolicMap) -> f64 {
    if map.is_linear() {
        1e-12
    } else {
        1e-6
    }
}

/// Chart interval (in the chart of `seg`) of the leafwise ball of the given
/// depth around the point `t` of `seg`. For linear maps this is
/// `t ± r·|λ|^{-(depth-1)}`; otherwise the two ends are found by bisection.
pub fn leaf_ball_interval(map: &HyperbolicMap, seg: &LeafSegment, t: f64, depth: usize, r: f64) -> Result<Interval> {
    let eig = map.eigen();
    let side = seg.side();
    if map.is_linear() {
        let rate = match side {
            Side::Unstable => eig.lambda_u.abs(),
            Side::Stable => 1.0 / eig.lambda_s.abs(),
        };
        let half = r / rate.powi(depth as i32 - 1);
        return Ok(Interval::new(t - half, t + half));
    }
    let base = seg.base();
    let center_off = seg.offset(map, t)?;
    let center = TorusPoint::from_lift(base.lift() + center_off);
    let (fwd, back) = match side {
        Side::Unstable => (depth - 1, 0),
        Side::Stable => (0, depth - 1),
    };
    let inside = |s: f64| -> Result<bool> {
        let o = seg.offset(map, s)?;
        let w = o - center_off;
        Ok(window_max(map, center.lift(), w, fwd, back, r)? < r)
    };
    let far = 4.0 * eig.projection_norm() * r;
    let mut ends = [0.0; 2];
    for (slot, sign) in ends.iter_mut().zip([-1.0, 1.0]) {
        let (mut lo, mut hi) = (0.0, far);
        for _ in 0..56 {
            let mid = 0.5 * (lo + hi);
            if inside(t + sign * mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *slot = t + sign * lo;
    }
    Ok(Interval::new(ends[0], ends[1]))
}
