//! Sampled checks of the Bowen-ball identities and the inclusions relating
//! two-sided balls to products of leafwise balls.

use rand::Rng;
use rayon::prelude::*;

use super::balls::{ball_margin_with_slack, membership_pad, BowenBallSpec};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::hyperbolic::bracket::bracket_offset;
use crate::hyperbolic::{bracket, leaf_offset, HyperbolicConstants, Side};
use crate::record::{Tally, VerificationRecord};
use crate::sampling::{symmetric, uniform_in_disc, SampleStream};
use crate::torus::TorusPoint;

const MAX_DRAWS: usize = 100_000;

/// Samples points near `q` and compares membership in `B_{n,m}(q,r)` with
/// membership of `f^{-(n-1)} z` in `B_{m+n-1}(f^{-(n-1)} q, r)`. Points whose
/// margin is within the membership pad of zero on either side are skipped.
pub fn conjugation_identity_check(
    map: &HyperbolicMap,
    q: &TorusPoint,
    n: usize,
    m: usize,
    r: f64,
    sample_count: usize,
    seed: u64,
) -> Result<VerificationRecord> {
    let lhs_spec = BowenBallSpec::two_sided(*q, n, m, r)?;
    let q_back = map.apply(q, -(n as i32 - 1))?;
    let rhs_spec = BowenBallSpec::forward(q_back, m + n - 1, r)?;
    let pad = membership_pad(map);
    let stream = SampleStream::new(seed, "conjugation-identity");
    let outcomes: Vec<Result<Option<(bool, f64)>>> = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng(i);
            // half the samples concentrated where the ball actually is
            let z = if i % 2 == 0 {
                q.translate(uniform_in_disc(&mut rng, 1.5 * r))
            } else {
                let e = map.eigen();
                let a = e.lambda_u.abs().powi(m as i32 - 1);
                let b = e.lambda_s.abs().powi(n as i32 - 1);
                q.translate(e.from_coords(symmetric(&mut rng, 1.5 * r / a), symmetric(&mut rng, 1.5 * r * b)))
            };
            let lhs = ball_margin_with_slack(map, &lhs_spec, &z, 1.0)?;
            let rhs = ball_margin_with_slack(map, &rhs_spec, &map.apply(&z, -(n as i32 - 1))?, 1.0)?;
            if lhs.abs() < pad || rhs.abs() < pad {
                return Ok(None);
            }
            let disagree = (lhs > 0.0) != (rhs > 0.0);
            let margin = if disagree { -(lhs - rhs).abs() / r } else { lhs.abs().min(rhs.abs()) / r };
            Ok(Some((disagree, margin)))
        })
        .collect();
    let mut tally = Tally::default();
    let mut skipped = 0u64;
    for o in outcomes {
        match o? {
            None => skipped += 1,
            Some((disagree, margin)) => tally.observe(margin, disagree),
        }
    }
    Ok(VerificationRecord::new("conjugation-identity")
        .with_param("n", n)
        .with_param("m", m)
        .with_param("r", r)
        .with_param("q", vec![q.x1(), q.x2()])
        .with_param("boundary_skipped", skipped)
        .with_tally(tally))
}

/// Checks the hypotheses for two-sided-in-product inclusion; returns the
/// failed conditions.
fn ball_in_product_hypotheses(consts: &HyperbolicConstants, d_xy: f64, r: f64, r1: f64) -> Vec<String> {
    let mut bad = Vec::new();
    if !(r > 0.0 && r < consts.eps1) {
        bad.push(format!("r = {r} not in (0, eps1 = {})", consts.eps1));
    }
    if !(r1 > 0.0 && r1 < r) {
        bad.push(format!("r1 = {r1} not in (0, r)"));
    }
    if !(consts.omega(r1) < r) {
        bad.push(format!("omega(r1) = {} is not below r", consts.omega(r1)));
    }
    let lhs = consts.c * consts.q * d_xy + r1;
    if !(lhs < consts.eps1) {
        bad.push(format!("C·Q·d(x,y) + r1 = {lhs} is not below eps1"));
    }
    bad
}

fn product_in_ball_hypotheses(consts: &HyperbolicConstants, d_xy: f64, r: f64) -> Vec<String> {
    let mut bad = Vec::new();
    let cq = consts.c * consts.q;
    if !(r > 0.0 && r < consts.eps1 / (cq + 1.0)) {
        bad.push(format!("r = {r} not in (0, eps1/(CQ+1))"));
    }
    let lhs = cq * d_xy + (cq + 1.0) * r;
    if !(lhs < consts.eps1) {
        bad.push(format!("C·Q·d(x,y) + (CQ+1)·r = {lhs} is not below eps1"));
    }
    if !consts.r2(r).is_finite() {
        bad.push("r2 = ω(Cω(r)) is outside the tabulated domain".into());
    }
    bad
}

/// Half-widths in eigen-coordinates of a box around the center containing
/// `B_{n,m}(·, r)`; exact for linear maps with an orthonormal eigenbasis,
/// padded otherwise.
pub(crate) fn ball_box(map: &HyperbolicMap, consts: &HyperbolicConstants, n: usize, m: usize, r: f64) -> (f64, f64) {
    let e = map.eigen();
    if map.is_linear() {
        let q = e.projection_norm();
        (q * r / e.lambda_u.abs().powi(m as i32 - 1), q * r * e.lambda_s.abs().powi(n as i32 - 1))
    } else {
        let s = 2.0 * consts.c * consts.q * r;
        (s * consts.lambda.powi(m as i32 - 1), s * consts.lambda.powi(n as i32 - 1))
    }
}

/// Draws a point of `B_{n,m}(center, r)` by rejection from the box.
pub(crate) fn sample_in_ball<R: Rng>(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    spec: &BowenBallSpec,
    rng: &mut R,
) -> Result<TorusPoint> {
    let (a, b) = ball_box(map, consts, spec.n, spec.m, spec.r);
    let e = map.eigen();
    for _ in 0..MAX_DRAWS {
        let z = spec.center.translate(e.from_coords(symmetric(rng, a), symmetric(rng, b)));
        if ball_margin_with_slack(map, spec, &z, 0.0)? > 0.0 {
            return Ok(z);
        }
    }
    Err(Error::Invalid("rejection sampling of a Bowen ball did not terminate".into()))
}

/// Draws a point of the leafwise ball `B^side_depth(center, r)`.
fn sample_on_leaf<R: Rng>(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    center: &TorusPoint,
    side: Side,
    depth: usize,
    r: f64,
    rng: &mut R,
) -> Result<TorusPoint> {
    let spec = BowenBallSpec::leaf(*center, side, depth, r)?;
    let e = map.eigen();
    let half = if map.is_linear() {
        let rate = match side {
            Side::Unstable => e.lambda_u.abs(),
            Side::Stable => 1.0 / e.lambda_s.abs(),
        };
        r / rate.powi(depth as i32 - 1)
    } else {
        2.0 * consts.c * r * consts.lambda.powi(depth as i32 - 1)
    };
    for _ in 0..MAX_DRAWS {
        let t = symmetric(rng, half);
        let z = center.translate(leaf_offset(map, center, side, t)?);
        if ball_margin_with_slack(map, &spec, &z, 0.0)? > 0.0 {
            return Ok(z);
        }
    }
    Err(Error::Invalid("rejection sampling of a leaf ball did not terminate".into()))
}

/// Options shared by the inclusion checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionOptions {
    pub sample_count: usize,
    pub seed: u64,
    /// Fail with `HypothesisUnsatisfied` instead of running when the
    /// hypotheses do not hold.
    pub enforce_hypotheses: bool,
}

impl Default for InclusionOptions {
    fn default() -> Self {
        Self { sample_count: 10_000, seed: 0, enforce_hypotheses: true }
    }
}

/// Default inner radius: `ω^{-1}(r/2)`, so that `ω(r₁) < r` with room.
pub fn default_r1(consts: &HyperbolicConstants, r: f64) -> f64 {
    consts.omega.inverse(r / 2.0)
}

/// Samples `z ∈ B_{n,m}([x,y], r₁)` and checks `[z,x] ∈ B^u_m(x,r)` and
/// `[y,z] ∈ B^s_n(y,r)`.
#[allow(clippy::too_many_arguments)]
pub fn ball_in_product_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    x: &TorusPoint,
    y: &TorusPoint,
    n: usize,
    m: usize,
    r: f64,
    r1: Option<f64>,
    opts: &InclusionOptions,
) -> Result<VerificationRecord> {
    let r1 = r1.unwrap_or_else(|| default_r1(consts, r));
    let d_xy = crate::torus::torus_distance(x, y);
    let bad = ball_in_product_hypotheses(consts, d_xy, r, r1);
    if opts.enforce_hypotheses && !bad.is_empty() {
        return Err(Error::HypothesisUnsatisfied(bad.join("; ")));
    }
    let q = bracket(map, x, y, consts)?;
    let ball = BowenBallSpec::two_sided(q, n, m, r1)?;
    let bu = BowenBallSpec::leaf_unstable(*x, m, r)?;
    let bs = BowenBallSpec::leaf_stable(*y, n, r)?;
    let pad = membership_pad(map);
    let stream = SampleStream::new(opts.seed, "inclusion-two-sided-in-product");
    let margins: Vec<Result<f64>> = (0..opts.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng(i);
            let z = sample_in_ball(map, consts, &ball, &mut rng)?;
            let (Ok((ou, _)), Ok((os, _))) = (bracket_offset(map, &z, x), bracket_offset(map, y, &z)) else {
                return Ok(f64::NEG_INFINITY);
            };
            let zu = z.translate(ou);
            let zs = y.translate(os);
            let mu = match ball_margin_with_slack(map, &bu, &zu, 1.0) {
                Ok(v) => v,
                Err(Error::NotOnLeaf { .. }) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            let ms = match ball_margin_with_slack(map, &bs, &zs, 1.0) {
                Ok(v) => v,
                Err(Error::NotOnLeaf { .. }) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            Ok(mu.min(ms) / r)
        })
        .collect();
    let mut tally = Tally::default();
    for m in margins {
        let m = m?;
        tally.observe_padded(m, pad / r);
    }
    Ok(VerificationRecord::new("inclusion-two-sided-in-product")
        .with_param("n", n)
        .with_param("m", m)
        .with_param("r", r)
        .with_param("r1", r1)
        .with_param("d_xy", d_xy)
        .with_param("hypotheses_hold", bad.is_empty())
        .with_param("hypothesis_failures", bad)
        .with_tally(tally))
}

/// Samples `x' ∈ B^u_m(x,r)`, `y' ∈ B^s_n(y,r)` and checks
/// `[x',y'] ∈ B_{n,m}([x,y], ω(Cω(r)))`.
#[allow(clippy::too_many_arguments)]
pub fn product_in_ball_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    x: &TorusPoint,
    y: &TorusPoint,
    n: usize,
    m: usize,
    r: f64,
    opts: &InclusionOptions,
) -> Result<VerificationRecord> {
    let d_xy = crate::torus::torus_distance(x, y);
    let bad = product_in_ball_hypotheses(consts, d_xy, r);
    if opts.enforce_hypotheses && !bad.is_empty() {
        return Err(Error::HypothesisUnsatisfied(bad.join("; ")));
    }
    let r2 = consts.r2(r);
    let q = bracket(map, x, y, consts)?;
    let target = BowenBallSpec::two_sided(q, n, m, r2.min(0.49))?;
    let pad = membership_pad(map);
    let stream = SampleStream::new(opts.seed, "inclusion-product-in-two-sided");
    let margins: Vec<Result<f64>> = (0..opts.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng(i);
            let (xp, yp) = if i == 0 {
                (*x, *y)
            } else {
                (
                    sample_on_leaf(map, consts, x, Side::Unstable, m, r, &mut rng)?,
                    sample_on_leaf(map, consts, y, Side::Stable, n, r, &mut rng)?,
                )
            };
            let Ok((o, _)) = bracket_offset(map, &xp, &yp) else { return Ok(f64::NEG_INFINITY) };
            let z = xp.translate(o);
            Ok(ball_margin_with_slack(map, &target, &z, 1.0)? / r2)
        })
        .collect();
    let mut tally = Tally::default();
    for m in margins {
        let m = m?;
        tally.observe_padded(m, pad / r2);
    }
    Ok(VerificationRecord::new("inclusion-product-in-two-sided")
        .with_param("n", n)
        .with_param("m", m)
        .with_param("r", r)
        .with_param("r2", r2)
        .with_param("d_xy", d_xy)
        .with_param("hypotheses_hold", bad.is_empty())
        .with_param("hypothesis_failures", bad)
        .with_tally(tally))
}

/// Chains both inclusions: every `z ∈ B_{n,m}([x,y], r₁)` must satisfy
/// `z = [[z,x],[y,z]] ∈ B_{n,m}([x,y], r₂)`.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    x: &TorusPoint,
    y: &TorusPoint,
    n: usize,
    m: usize,
    r: f64,
    opts: &InclusionOptions,
) -> Result<VerificationRecord> {
    let r1 = default_r1(consts, r);
    let d_xy = crate::torus::torus_distance(x, y);
    let mut bad = ball_in_product_hypotheses(consts, d_xy, r, r1);
    bad.extend(product_in_ball_hypotheses(consts, d_xy, r));
    if opts.enforce_hypotheses && !bad.is_empty() {
        return Err(Error::HypothesisUnsatisfied(bad.join("; ")));
    }
    let r2 = consts.r2(r);
    let q = bracket(map, x, y, consts)?;
    let inner = BowenBallSpec::two_sided(q, n, m, r1)?;
    let outer = BowenBallSpec::two_sided(q, n, m, r2.min(0.49))?;
    let pad = membership_pad(map);
    let stream = SampleStream::new(opts.seed, "inclusion-sandwich");
    let margins: Vec<Result<f64>> = (0..opts.sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng(i);
            let z = sample_in_ball(map, consts, &inner, &mut rng)?;
            let (Ok((ou, _)), Ok((os, _))) = (bracket_offset(map, &z, x), bracket_offset(map, y, &z)) else {
                return Ok(f64::NEG_INFINITY);
            };
            let a = z.translate(ou);
            let b = y.translate(os);
            let Ok((o, _)) = bracket_offset(map, &a, &b) else { return Ok(f64::NEG_INFINITY) };
            let rebuilt = a.translate(o);
            let recon = crate::torus::torus_distance(&rebuilt, &z);
            Ok((ball_margin_with_slack(map, &outer, &rebuilt, 1.0)? / r2).min(1.0 - recon / pad.max(1e-9)))
        })
        .collect();
    let mut tally = Tally::default();
    for m in margins {
        let m = m?;
        tally.observe_padded(m, pad / r2);
    }
    Ok(VerificationRecord::new("inclusion-sandwich")
        .with_param("n", n)
        .with_param("m", m)
        .with_param("r", r)
        .with_param("r1", r1)
        .with_param("r2", r2)
        .with_param("hypotheses_hold", bad.is_empty())
        .with_tally(tally))
}
