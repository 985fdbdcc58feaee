//! The bracket `[x,y] = W^s_x ∩ W^u_y` and checks of its algebra.

use rayon::prelude::*;

use super::constants::HyperbolicConstants;
use super::shadowing::{propagate, solve_bracket_offset, Orbit};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::record::{Tally, VerificationRecord};
use crate::sampling::{uniform_in_disc, uniform_point, SampleStream};
use crate::torus::{torus_distance, TorusPoint};

/// `[x,y]` for `d(x,y) ≤ eps`.
pub fn bracket(
    map: &HyperbolicMap,
    x: &TorusPoint,
    y: &TorusPoint,
    consts: &HyperbolicConstants,
) -> Result<TorusPoint> {
    let d = torus_distance(x, y);
    if d > consts.eps {
        return Err(Error::BracketUndefined { distance: d, eps: consts.eps });
    }
    let (o, shadow) = bracket_offset(map, x, y)?;
    if shadow >= consts.delta {
        return Err(Error::BracketDivergence(format!("shadowing distance {shadow:.3e} reached delta")));
    }
    Ok(TorusPoint::from_lift(x.lift() + o))
}

/// `[x,y] − x` on the lift, plus the largest shadowing distance over the
/// solver window (zero for linear maps, where the closed form is used).
pub(crate) fn bracket_offset(map: &HyperbolicMap, x: &TorusPoint, y: &TorusPoint) -> Result<(Vec2, f64)> {
    let w = x.displacement_to(y);
    let eig = map.eigen();
    let closed = eig.e_s * eig.dual_s.dot(w);
    if map.is_linear() {
        return Ok((closed, closed.norm().max((closed - w).norm())));
    }
    solve_bracket_offset(map, x.lift(), w, closed)
}

/// The bracket computed by the shadowing solver for any map, optionally
/// seeded with a guess for `[x,y]` (the linear closed form otherwise).
pub fn bracket_shadowing(
    map: &HyperbolicMap,
    x: &TorusPoint,
    y: &TorusPoint,
    seed: Option<&TorusPoint>,
) -> Result<TorusPoint> {
    let w = x.displacement_to(y);
    let seed = match seed {
        Some(s) => x.displacement_to(s),
        None => map.eigen().e_s * map.eigen().dual_s.dot(w),
    };
    let (o, _) = solve_bracket_offset(map, x.lift(), w, seed)?;
    Ok(TorusPoint::from_lift(x.lift() + o))
}

/// Tolerance for the equivariance and composition laws.
pub fn bracket_law_tolerance(map: &HyperbolicMap) -> f64 {
    if map.is_linear() {
        1e-12
    } else {
        1e-6
    }
}

fn pair_stays_close(map: &HyperbolicMap, x: &TorusPoint, v: Vec2, n: usize, limit: f64) -> bool {
    let Ok(orbit) = Orbit::new(map, x.lift(), n, true) else { return false };
    match propagate(map, &orbit, v, n) {
        Ok(p) => p.max_norm <= limit,
        Err(_) => false,
    }
}

struct LawSample {
    equivariance: f64,
    composition: f64,
}

fn law_sample(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    n: usize,
    stream: &SampleStream,
    i: u64,
) -> Result<LawSample> {
    let mut rng = stream.rng(i);
    // Draw until the pair stays eps1-close for n steps.
    let radius = consts.eps1 / map.eigen().lambda_u.abs().powi(n as i32);
    let (x, y) = loop {
        let x = uniform_point(&mut rng);
        let v = uniform_in_disc(&mut rng, radius);
        if pair_stays_close(map, &x, v, n, consts.eps1) {
            break (x, x.translate(v));
        }
    };
    let z = bracket(map, &x, &y, consts)?;
    let fz = map.apply(&z, n as i32)?;
    let rhs = bracket(map, &map.apply(&x, n as i32)?, &map.apply(&y, n as i32)?, consts)?;
    let equivariance = torus_distance(&fz, &rhs);

    // Composition: four points near x so that all five brackets exist.
    let near = consts.eps / (4.0 * (consts.q + 1.0));
    let (xp, yp) = loop {
        let xp = x.translate(uniform_in_disc(&mut rng, near));
        let yp = x.translate(uniform_in_disc(&mut rng, near));
        if torus_distance(&xp, &yp) <= consts.eps && torus_distance(&x, &yp) <= consts.eps {
            break (xp, yp);
        }
    };
    let a = bracket(map, &x, &y, consts)?;
    let b = bracket(map, &xp, &yp, consts)?;
    let lhs = bracket(map, &a, &b, consts)?;
    let rhs = bracket(map, &x, &yp, consts)?;
    Ok(LawSample { equivariance, composition: torus_distance(&lhs, &rhs) })
}

/// Samples admissible pairs and records the largest discrepancies of
/// `f^n[x,y] = [f^n x, f^n y]` and `[[x,y],[x',y']] = [x,y']`.
pub fn bracket_law_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    n: usize,
    sample_count: usize,
    seed: u64,
) -> VerificationRecord {
    let tol = bracket_law_tolerance(map);
    let stream = SampleStream::new(seed, "bracket-law");
    let results: Vec<Result<LawSample>> =
        (0..sample_count as u64).into_par_iter().map(|i| law_sample(map, consts, n, &stream, i)).collect();
    let mut tally = Tally::default();
    let (mut max_eq, mut max_comp, mut failures) = (0.0f64, 0.0f64, 0u64);
    for r in &results {
        match r {
            Ok(s) => {
                max_eq = max_eq.max(s.equivariance);
                max_comp = max_comp.max(s.composition);
                tally.observe(tol - s.equivariance.max(s.composition), false);
            }
            Err(_) => {
                failures += 1;
                tally.observe(f64::NEG_INFINITY, true);
            }
        }
    }
    VerificationRecord::new("bracket-law")
        .with_param("n", n)
        .with_param("tolerance", tol)
        .with_param("max_equivariance", max_eq)
        .with_param("max_composition", max_comp)
        .with_param("solver_failures", failures)
        .with_param("linear", map.is_linear())
        .with_tally(tally)
}
