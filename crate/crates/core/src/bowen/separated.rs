//! Maximal `(n,r)`-separated sets on a leaf segment.

use serde::{Deserialize, Serialize};

use super::balls::window_max;
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::hyperbolic::{leaf_coordinate, LeafSegment, Side};
use crate::potential::Direction;
use crate::record::{Tally, VerificationRecord};
use crate::torus::TorusPoint;

/// Grid spacing is `r / (GRID_REFINEMENT · λ_u^n)`.
pub const GRID_REFINEMENT: f64 = 10.0;
const MAX_GRID: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSet {
    /// Chart parameters of the chosen points, ascending.
    pub params: Vec<f64>,
    pub points: Vec<TorusPoint>,
    pub grid_size: usize,
    pub grid_spacing: f64,
}

impl SeparatedSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Depth-`n` ball on the leaf through `center`, iterating in `direction`.
#[derive(Debug, Clone, Copy)]
struct LeafBall {
    center: TorusPoint,
    side: Side,
    forward: usize,
    backward: usize,
    r: f64,
}

impl LeafBall {
    fn new(center: TorusPoint, side: Side, direction: Direction, n: usize, r: f64) -> Self {
        let (forward, backward) = match direction {
            Direction::Forward => (n - 1, 0),
            Direction::Backward => (0, n - 1),
        };
        Self { center, side, forward, backward, r }
    }

    fn contains(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<bool> {
        leaf_coordinate(map, &self.center, self.side, z)?;
        let w = self.center.displacement_to(z);
        Ok(window_max(map, self.center.lift(), w, self.forward, self.backward, self.r)? < self.r)
    }
}

/// Greedy maximal `(n,r)`-separated subset of the closed segment, using the
/// leafwise balls natural to the side (forward for unstable, backward for
/// stable leaves).
pub fn maximal_separated_set(map: &HyperbolicMap, leaf: &LeafSegment, n: usize, r: f64) -> Result<SeparatedSet> {
    let direction = match leaf.side() {
        Side::Unstable => Direction::Forward,
        Side::Stable => Direction::Backward,
    };
    maximal_separated_set_iterating(map, leaf, n, r, direction)
}

/// As [`maximal_separated_set`] with an explicit iteration direction.
///
/// Candidates are the points of a uniform grid on the segment, visited in
/// ascending parameter order; a candidate is kept unless it lies in the ball
/// of an already kept point. The result is audited on the same grid for
/// separation, covering at `r`, and disjointness of the `r/2` balls.
pub fn maximal_separated_set_iterating(
    map: &HyperbolicMap,
    leaf: &LeafSegment,
    n: usize,
    r: f64,
    direction: Direction,
) -> Result<SeparatedSet> {
    if n == 0 || !(r > 0.0) {
        return Err(Error::Invalid("separated sets need n ≥ 1 and r > 0".into()));
    }
    let range = leaf.range();
    let lambda_u = map.eigen().lambda_u.abs();
    let spacing = r / (GRID_REFINEMENT * lambda_u.powi(n as i32));
    let cells = (range.length() / spacing).ceil().max(1.0);
    if cells as usize > MAX_GRID {
        return Err(Error::Invalid(format!("audit grid of {cells} points is too large")));
    }
    let count = cells as usize + 1;
    let spacing = range.length() / cells;
    let params: Vec<f64> =
        (0..count).map(|j| if j + 1 == count { range.hi } else { range.lo + j as f64 * spacing }).collect();
    let points: Vec<TorusPoint> = params.iter().map(|&t| leaf.point(map, t)).collect::<Result<_>>()?;
    let ball = |c: TorusPoint, radius: f64| LeafBall::new(c, leaf.side(), direction, n, radius);

    let mut chosen: Vec<usize> = Vec::new();
    let mut balls: Vec<LeafBall> = Vec::new();
    for (j, z) in points.iter().enumerate() {
        // balls are intervals around their centers and candidates ascend, so
        // only the most recent center can reach the candidate
        let covered = match balls.last() {
            Some(b) => b.contains(map, z)?,
            None => false,
        };
        if !covered {
            chosen.push(j);
            balls.push(ball(*z, r));
        }
    }

    // audit: separation between neighbours, covering, r/2 disjointness
    for w in chosen.windows(2) {
        let (a, b) = (w[0], w[1]);
        if ball(points[a], r).contains(map, &points[b])? || ball(points[b], r).contains(map, &points[a])? {
            return Err(Error::SeparatedSetAuditFailed(format!("points {a} and {b} are not separated")));
        }
    }
    let halves: Vec<LeafBall> = chosen.iter().map(|&j| ball(points[j], r / 2.0)).collect();
    let mut k = 0;
    for (j, z) in points.iter().enumerate() {
        while k + 1 < chosen.len() && chosen[k + 1] <= j {
            k += 1;
        }
        let neighbours = [Some(k), (k + 1 < chosen.len()).then_some(k + 1), k.checked_sub(1)];
        let mut cover = false;
        let mut half_hits = 0;
        for idx in neighbours.into_iter().flatten() {
            if balls[idx].contains(map, z)? {
                cover = true;
            }
            if halves[idx].contains(map, z)? {
                half_hits += 1;
            }
        }
        if !cover {
            return Err(Error::SeparatedSetAuditFailed(format!("grid point {j} is not covered")));
        }
        if half_hits > 1 {
            return Err(Error::SeparatedSetAuditFailed(format!("half-radius balls overlap at grid point {j}")));
        }
    }
    Ok(SeparatedSet {
        params: chosen.iter().map(|&j| params[j]).collect(),
        points: chosen.iter().map(|&j| points[j]).collect(),
        grid_size: count,
        grid_spacing: spacing,
    })
}

/// Relative tolerance on the per-step count growth.
pub const GROWTH_TOL: f64 = 0.1;

/// Counts of maximal separated sets on `leaf` for each depth of `n_range`
/// (ascending, consecutive), audited on the grid, with each consecutive
/// count ratio compared against `λ_u`. An audit failure is a violation.
pub fn separated_growth_check(
    map: &HyperbolicMap,
    leaf: &LeafSegment,
    r: f64,
    n_range: &[usize],
) -> Result<VerificationRecord> {
    if n_range.len() < 2 || n_range.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::Invalid("separated growth needs at least two consecutive depths".into()));
    }
    let lambda_u = map.eigen().lambda_u.abs();
    let mut counts = Vec::with_capacity(n_range.len());
    let mut audit_failures = Vec::new();
    for &n in n_range {
        match maximal_separated_set(map, leaf, n, r) {
            Ok(set) => counts.push(set.len()),
            Err(Error::SeparatedSetAuditFailed(msg)) => {
                audit_failures.push(format!("n = {n}: {msg}"));
                counts.push(0);
            }
            Err(e) => return Err(e),
        }
    }
    let mut tally = Tally::default();
    let ratios: Vec<f64> = counts.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    for q in &ratios {
        tally.observe(GROWTH_TOL - (q / lambda_u - 1.0).abs(), false);
    }
    for _ in &audit_failures {
        tally.observe(f64::NEG_INFINITY, true);
    }
    Ok(VerificationRecord::new("separated-growth")
        .with_param("r", r)
        .with_param("side", format!("{:?}", leaf.side()))
        .with_param("n_range", n_range.to_vec())
        .with_param("counts", counts)
        .with_param("growth_ratios", ratios)
        .with_param("lambda_u", lambda_u)
        .with_param("audit_failures", audit_failures)
        .with_tally(tally))
}
