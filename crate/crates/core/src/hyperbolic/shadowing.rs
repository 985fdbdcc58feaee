//! Finite-window shadowing: a point `z` lies on the local stable leaf of
//! `x` when the unstable eigen-coordinate of `f^N z − f^N x` vanishes, up
//! to an error of order `λ^{2N}`. Same for the unstable leaf with `f^{-N}`.

use crate::dynamics::{reduce_lift, HyperbolicMap};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Offsets larger than this along a window mean the iterate left the
/// region where the lift is meaningful.
const OFFSET_GUARD: f64 = 0.45;
const NEWTON_ITER: usize = 30;
const STEP_TOL: f64 = 1e-13;
/// Final step size above which the solve is reported as divergent.
const ACCEPT_TOL: f64 = 1e-10;

/// Window length at which `λ^{2N}` drops below `1e-16`.
pub fn window_length(map: &HyperbolicMap) -> usize {
    let lambda = map.eigen().lambda_s.abs();
    let n = (16.0 * std::f64::consts::LN_10 / (2.0 * -lambda.ln())).ceil();
    (n as usize).clamp(4, 40)
}

fn schedule(n_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [1, 2, 4, 7, 11, 16, 22, 29, 37].into_iter().filter(|&n| n < n_max).collect();
    out.push(n_max);
    out
}

/// Reduced orbit `b_0, …, b_{n-1}` of a point, forward or backward.
#[derive(Debug, Clone)]
pub(crate) struct Orbit {
    bases: Vec<Vec2>,
    forward: bool,
}

impl Orbit {
    pub fn new(map: &HyperbolicMap, start: Vec2, len: usize, forward: bool) -> Result<Self> {
        let mut bases = Vec::with_capacity(len + 1);
        let mut b = reduce_lift(start);
        bases.push(b);
        for _ in 0..len {
            b = if forward { reduce_lift(map.forward_lift(b)) } else { reduce_lift(map.inverse_lift(b)?) };
            bases.push(b);
        }
        Ok(Self { bases, forward })
    }

    pub fn len(&self) -> usize {
        self.bases.len() - 1
    }
}

/// Result of propagating an offset along an orbit window.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Propagated {
    /// Offset after `n` steps.
    pub offset: Vec2,
    /// Derivative of the final offset with respect to the initial one.
    pub jacobian: Mat2,
    /// Largest offset norm seen along the window (including step 0).
    pub max_norm: f64,
}

pub(crate) fn propagate(map: &HyperbolicMap, orbit: &Orbit, offset: Vec2, n: usize) -> Result<Propagated> {
    debug_assert!(n <= orbit.len());
    let mut off = offset;
    let mut jac = Mat2::IDENTITY;
    let mut max_norm = off.norm();
    for k in 0..n {
        if orbit.forward {
            let b = orbit.bases[k];
            let df = map.jacobian(b + off);
            off = map.offset_forward(b, off);
            jac = df.mul(&jac);
        } else {
            let pre = orbit.bases[k + 1];
            off = map.offset_backward(pre, off)?;
            let dfi = map
                .jacobian(pre + off)
                .inverse()
                .ok_or_else(|| Error::BracketDivergence("singular derivative".into()))?;
            jac = dfi.mul(&jac);
        }
        let norm = off.norm();
        if !norm.is_finite() || norm > OFFSET_GUARD {
            return Err(Error::BracketDivergence(format!("offset {norm:.3e} left the window at step {}", k + 1)));
        }
        max_norm = max_norm.max(norm);
    }
    Ok(Propagated { offset: off, jacobian: jac, max_norm })
}

/// `row · J` as a vector.
fn row_times(row: Vec2, j: &Mat2) -> Vec2 {
    Vec2::new(row.x * j.a + row.y * j.c, row.x * j.b + row.y * j.d)
}

/// Offset `o` (relative to `x`) of the point `[x,y]`, given `w = y − x` on
/// the lift and an initial guess.
pub(crate) fn solve_bracket_offset(map: &HyperbolicMap, x: Vec2, w: Vec2, seed: Vec2) -> Result<(Vec2, f64)> {
    let eig = *map.eigen();
    let n_max = window_length(map);
    let fwd = Orbit::new(map, x, n_max, true)?;
    let bwd = Orbit::new(map, x + w, n_max, false)?;
    let mut o = seed;
    let mut shadow = 0.0;
    for n in schedule(n_max) {
        let mut last = f64::INFINITY;
        for _ in 0..NEWTON_ITER {
            let ps = propagate(map, &fwd, o, n)?;
            let pu = propagate(map, &bwd, o - w, n)?;
            let gs = row_times(eig.dual_u, &ps.jacobian);
            let gu = row_times(eig.dual_s, &pu.jacobian);
            let jac = Mat2::new(gs.x, gs.y, gu.x, gu.y);
            let rhs = Vec2::new(eig.dual_u.dot(ps.offset), eig.dual_s.dot(pu.offset));
            let step = jac.solve(rhs).ok_or_else(|| Error::BracketDivergence("singular shadowing Jacobian".into()))?;
            o = o - step;
            last = step.max_abs();
            shadow = ps.max_norm.max(pu.max_norm);
            if !last.is_finite() {
                return Err(Error::BracketDivergence("non-finite Newton step".into()));
            }
            if last <= STEP_TOL {
                break;
            }
        }
        if n == n_max && last > ACCEPT_TOL {
            return Err(Error::BracketDivergence(format!("Newton step {last:.3e} after {NEWTON_ITER} iterations")));
        }
    }
    Ok((o, shadow))
}

/// Point at chart coordinate `t` on the local unstable (`unstable = true`)
/// or stable leaf of `base`, as an offset from `base`. A good guess for the
/// transverse coordinate skips the continuation stages.
pub(crate) fn solve_leaf_offset(
    map: &HyperbolicMap,
    base: Vec2,
    t: f64,
    unstable: bool,
    guess: Option<f64>,
) -> Result<Vec2> {
    let eig = *map.eigen();
    let (along, across, row) = if unstable { (eig.e_u, eig.e_s, eig.dual_s) } else { (eig.e_s, eig.e_u, eig.dual_u) };
    if map.is_linear() {
        return Ok(along * t);
    }
    let n_max = window_length(map);
    let orbit = Orbit::new(map, base, n_max, !unstable)?;
    let mut c = guess.unwrap_or(0.0);
    let stages = if guess.is_some() { vec![n_max] } else { schedule(n_max) };
    for n in stages {
        let mut last = f64::INFINITY;
        for _ in 0..NEWTON_ITER {
            let o = along * t + across * c;
            let p = propagate(map, &orbit, o, n)?;
            let g = row_times(row, &p.jacobian).dot(across);
            if g == 0.0 || !g.is_finite() {
                return Err(Error::BracketDivergence("degenerate leaf Jacobian".into()));
            }
            let step = row.dot(p.offset) / g;
            c -= step;
            last = step.abs();
            if last <= STEP_TOL {
                break;
            }
        }
        if n == n_max && last > ACCEPT_TOL {
            return Err(Error::BracketDivergence(format!("leaf Newton step {last:.3e}")));
        }
    }
    Ok(along * t + across * c)
}
