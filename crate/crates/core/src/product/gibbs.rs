//! Gibbs bounds for leaf measures (`K₁`) and for bracket sets of leafwise
//! Bowen balls (`K₀`).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::leaf_measure::Restriction;
use crate::bowen::leaf_ball_interval;
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::gibbs::{
    linear_part, ratios_stabilize, sup_stabilizes, DepthStats, EmpiricalMeasure, SamplingOptions, RESOLUTION_ATOMS,
};
use crate::hyperbolic::bracket::bracket_offset;
use crate::hyperbolic::{leaf_disc_interval, make_rectangle, HyperbolicConstants, Interval, LeafSegment, Side};
use crate::potential::{birkhoff_sum, Direction, Potential};
use crate::record::{Tally, VerificationRecord};
use crate::sampling::{uniform_point, SampleStream};
use crate::torus::torus_distance;

const CONTAINMENT_TRIES: usize = 64;

fn within(inner: &Interval, outer: &Interval) -> bool {
    inner.lo >= outer.lo && inner.hi <= outer.hi
}

fn sin_angle(map: &HyperbolicMap) -> f64 {
    let c = map.eigen().cos_angle();
    (1.0 - c * c).sqrt()
}

fn expansion(map: &HyperbolicMap) -> f64 {
    map.eigen().lambda_u.abs()
}

/// Folds per-sample observations (a list per depth) into per-depth stats.
fn collect_stats(mut stats: Vec<DepthStats>, rows: Vec<Vec<Vec<Option<f64>>>>) -> Vec<DepthStats> {
    for row in rows {
        for (d, cell) in stats.iter_mut().zip(row) {
            if d.included {
                for ratio in cell {
                    d.observe(ratio);
                }
            }
        }
    }
    stats
}

fn log_tally(stats: &[&DepthStats], k: f64, tally: &mut Tally) {
    for d in stats {
        tally.observe_padded(k.ln() - d.max_ratio.ln().abs().max(d.min_ratio.ln().abs()), 1e-12);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafGibbsEstimate {
    pub k1: f64,
    pub stabilized: bool,
    pub unstable: Vec<DepthStats>,
    pub stable: Vec<DepthStats>,
    /// Samples for which no center with the ball inside the leaf was found.
    pub uncontained: usize,
    pub record: VerificationRecord,
}

fn leaf_hypotheses(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    rest: &Restriction,
    r_bar1: f64,
    r_bar2: f64,
) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    let limit = consts.leaf_radius_limit();
    if !(0.0 < r_bar1 && r_bar1 <= r_bar2 && r_bar2 < limit) {
        bad.push(format!("need 0 < r̄1 ≤ r̄2 < ε₁/(2CQ+1) = {limit:.6}, got {r_bar1}, {r_bar2}"));
    }
    if !(consts.r2(r_bar2) < consts.r0) {
        bad.push(format!("ω(Cω(r̄2)) = {:.6} is not below r₀ = {}", consts.r2(r_bar2), consts.r0));
    }
    let q = rest.measure.rect.q();
    for side in [Side::Unstable, Side::Stable] {
        let v = rest.leaf_measure(side).leaf.range();
        let inner = leaf_disc_interval(map, &q, side, r_bar1)?;
        let outer = leaf_disc_interval(map, &q, side, r_bar2)?;
        let slack = 1e-12;
        if !(v.lo <= inner.lo + slack
            && v.hi >= inner.hi - slack
            && v.lo >= outer.lo - slack
            && v.hi <= outer.hi + slack)
        {
            bad.push(format!("{side:?} leaf of the rectangle is not sandwiched between the r̄1 and r̄2 leaf balls"));
        }
    }
    Ok(bad)
}

/// Empirical `K₁`: ratios `μ^u(B^u_m(x,ρ))·e^{mP − S_mφ(x)}` on `V^u_q` and
/// the mirror `μ^s(B^s_n(y,ρ))·e^{nP − S⁻_nφ(y)}` on `V^s_q`, for
/// `ρ ∈ {r̄1, r̄2}` and balls contained in the leaf.
#[allow(clippy::too_many_arguments)]
pub fn leafwise_gibbs_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    rest: &Restriction,
    r_bar1: f64,
    r_bar2: f64,
    depths: &[usize],
    opts: SamplingOptions,
) -> Result<LeafGibbsEstimate> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(Error::Invalid("depths must be positive and non-empty".into()));
    }
    let bad = leaf_hypotheses(map, consts, rest, r_bar1, r_bar2)?;
    if !bad.is_empty() {
        return Err(Error::HypothesisUnsatisfied(bad.join("; ")));
    }
    let pressure = mu.pressure();
    let lam = expansion(&linear_part(map)?);
    let atoms = rest.measure.len() as f64;
    let stream = SampleStream::new(opts.seed, "leaf-gibbs");
    let mut uncontained = 0;
    let mut sides = Vec::new();
    for side in [Side::Unstable, Side::Stable] {
        let leaf = rest.leaf_measure(side);
        let seg = leaf.leaf;
        let range = seg.range();
        let direction = match side {
            Side::Unstable => Direction::Forward,
            Side::Stable => Direction::Backward,
        };
        // expected atom count of the thinner ball under a uniform marginal
        let stats: Vec<DepthStats> = depths
            .iter()
            .map(|&m| {
                let len = 2.0 * r_bar1 / lam.powi(m as i32 - 1);
                DepthStats::new(m, len, atoms * len / range.length() >= RESOLUTION_ATOMS)
            })
            .collect();
        let sub = stream.child(match side {
            Side::Unstable => "unstable",
            Side::Stable => "stable",
        });
        let rows: Vec<(Vec<Vec<Option<f64>>>, usize)> = (0..opts.sample_count as u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = sub.rng(s);
                let mut row = Vec::with_capacity(depths.len());
                let mut missed = 0;
                for &m in depths {
                    let mut cell = Vec::with_capacity(2);
                    for rho in [r_bar1, r_bar2] {
                        let mut found = None;
                        for _ in 0..CONTAINMENT_TRIES {
                            let t = rng.random_range(range.lo..range.hi);
                            let iv = leaf_ball_interval(map, &seg, t, m, rho)?;
                            if within(&iv, &range) {
                                found = Some((t, iv));
                                break;
                            }
                        }
                        let Some((t, iv)) = found else {
                            missed += 1;
                            continue;
                        };
                        let x = seg.point(map, t)?;
                        let mass = leaf.mass_open(&iv);
                        let sum = birkhoff_sum(map, phi, &x, m, direction)?;
                        cell.push((mass > 0.0).then(|| mass * (m as f64 * pressure - sum).exp()));
                    }
                    row.push(cell);
                }
                Ok((row, missed))
            })
            .collect::<Result<_>>()?;
        uncontained += rows.iter().map(|r| r.1).sum::<usize>();
        sides.push(collect_stats(stats, rows.into_iter().map(|r| r.0).collect()));
    }
    let stable = sides.pop().unwrap_or_default();
    let unstable = sides.pop().unwrap_or_default();
    let inc_u: Vec<&DepthStats> = unstable.iter().filter(|d| d.included && d.has_ratios()).collect();
    let inc_s: Vec<&DepthStats> = stable.iter().filter(|d| d.included && d.has_ratios()).collect();
    let k1 = inc_u.iter().chain(inc_s.iter()).map(|d| d.sup).fold(1.0, f64::max);
    let stabilized = ratios_stabilize(&inc_u) && ratios_stabilize(&inc_s);
    let mut tally = Tally::default();
    log_tally(&inc_u, k1, &mut tally);
    log_tally(&inc_s, k1, &mut tally);
    let record = VerificationRecord::new("leaf-gibbs")
        .with_param("K1", k1)
        .with_param("r_bar1", r_bar1)
        .with_param("r_bar2", r_bar2)
        .with_param("pressure", pressure)
        .with_param("included_unstable", inc_u.iter().map(|d| d.n).collect::<Vec<_>>())
        .with_param("included_stable", inc_s.iter().map(|d| d.n).collect::<Vec<_>>())
        .with_param("sup_unstable", inc_u.iter().map(|d| d.sup).collect::<Vec<_>>())
        .with_param("sup_stable", inc_s.iter().map(|d| d.sup).collect::<Vec<_>>())
        .with_param("zero_mass_balls", unstable.iter().chain(&stable).map(|d| d.zero_mass).sum::<usize>())
        .with_param("uncontained", uncontained)
        .with_param("stabilized", stabilized)
        .with_param("sup_stabilized", sup_stabilizes(&inc_u) && sup_stabilizes(&inc_s))
        .with_tally(tally)
        .fail_unless(stabilized);
    Ok(LeafGibbsEstimate { k1, stabilized, unstable, stable, uncontained, record })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductGibbsEstimate {
    pub r: f64,
    pub k0: f64,
    pub stabilized: bool,
    /// Stats grouped by total depth `n + m` (stored in `DepthStats::n`).
    pub by_total: Vec<DepthStats>,
    pub record: VerificationRecord,
}

/// Empirical `K₀(r)`: ratios
/// `μ([B^u_m(x,r), B^s_n(y,r)])·e^{mP − S_mφ(x)}·e^{nP − S⁻_nφ(y)}` for `x`,
/// `y` on the two leaves through a random `q`, close enough for the
/// bracket-set bound. `totals` lists the values of `n + m` (each ≥ 2); each
/// sample splits a total at random.
pub fn product_gibbs_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    r: f64,
    totals: &[usize],
    opts: SamplingOptions,
) -> Result<ProductGibbsEstimate> {
    if totals.is_empty() || totals.iter().any(|&t| t < 2) {
        return Err(Error::Invalid("totals n + m must be at least 2".into()));
    }
    let cq = consts.c * consts.q;
    let mut bad = Vec::new();
    if !(r > 0.0 && r < consts.eps1 / (cq + 1.0)) {
        bad.push(format!("r = {r} is not in (0, ε₁/(CQ+1))"));
    }
    if !(consts.r2(r) < consts.r0) {
        bad.push(format!("ω(Cω(r)) = {:.6} is not below r₀", consts.r2(r)));
    }
    if !bad.is_empty() {
        return Err(Error::HypothesisUnsatisfied(bad.join("; ")));
    }
    let pressure = mu.pressure();
    let lin = linear_part(map)?;
    let lam = expansion(&lin);
    let sin = sin_angle(&lin);
    let floor_atoms = mu.len() as f64;
    let stats: Vec<DepthStats> = totals
        .iter()
        .map(|&t| {
            let area = 4.0 * r * r * sin / lam.powi(t as i32 - 2);
            DepthStats::new(t, area, area * floor_atoms >= RESOLUTION_ATOMS)
        })
        .collect();
    let slack = consts.eps1 - (cq + 1.0) * r;
    let delta = r.min(0.45 * slack / cq);
    let chart_r = r.min(0.5 * consts.rectangle_limit());
    let search = consts.r2(r) * (1.0 + 1e-9) + 1e-12;
    let stream = SampleStream::new(opts.seed, "product-gibbs");
    let rows: Vec<Vec<Vec<Option<f64>>>> = (0..opts.sample_count as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.rng(s);
            let q = uniform_point(&mut rng);
            let rect = make_rectangle(map, consts, q, chart_r)?;
            // leaf charts through q, wide enough for x, y and their balls
            let wide = Interval::symmetric(consts.eps);
            let (wu, ws) = (LeafSegment::new(q, Side::Unstable, wide)?, LeafSegment::new(q, Side::Stable, wide)?);
            let (a, b) = (rng.random_range(-delta..delta), rng.random_range(-delta..delta));
            let x = wu.point(map, a)?;
            let y = ws.point(map, b)?;
            let mut row = Vec::with_capacity(totals.len());
            if cq * torus_distance(&x, &y) + (cq + 1.0) * r >= consts.eps1 {
                row.resize(totals.len(), Vec::new());
                return Ok(row);
            }
            let p = x.translate(bracket_offset(map, &x, &y)?.0);
            let candidates: Vec<(f64, f64, f64)> = mu
                .atoms_near(&p, search)
                .into_iter()
                .map(|i| {
                    let (tu, ts) = rect.raw_coordinates(map, &mu.points()[i as usize])?;
                    Ok((tu, ts, mu.weights()[i as usize]))
                })
                .collect::<Result<_>>()?;
            for &t in totals {
                let n = 1 + rng.random_range(0..t - 1);
                let m = t - n;
                let iu = leaf_ball_interval(map, &wu, a, m, r)?;
                let is = leaf_ball_interval(map, &ws, b, n, r)?;
                let mass: f64 = candidates.iter().filter(|c| iu.contains(c.0) && is.contains(c.1)).map(|c| c.2).sum();
                let sx = birkhoff_sum(map, phi, &x, m, Direction::Forward)?;
                let sy = birkhoff_sum(map, phi, &y, n, Direction::Backward)?;
                let ratio = (mass > 0.0).then(|| mass * (t as f64 * pressure - sx - sy).exp());
                row.push(vec![ratio]);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let by_total = collect_stats(stats, rows);
    let included: Vec<&DepthStats> = by_total.iter().filter(|d| d.included && d.has_ratios()).collect();
    let k0 = included.iter().map(|d| d.sup).fold(1.0, f64::max);
    let stabilized = ratios_stabilize(&included);
    let mut tally = Tally::default();
    log_tally(&included, k0, &mut tally);
    let record = VerificationRecord::new("product-gibbs")
        .with_param("K0", k0)
        .with_param("r", r)
        .with_param("pressure", pressure)
        .with_param("included_totals", included.iter().map(|d| d.n).collect::<Vec<_>>())
        .with_param("excluded_totals", by_total.iter().filter(|d| !d.included).map(|d| d.n).collect::<Vec<_>>())
        .with_param("sup_by_total", included.iter().map(|d| d.sup).collect::<Vec<_>>())
        .with_param("zero_mass_balls", by_total.iter().map(|d| d.zero_mass).sum::<usize>())
        .with_param("stabilized", stabilized)
        .with_param("sup_stabilized", sup_stabilizes(&included))
        .with_tally(tally)
        .fail_unless(stabilized);
    Ok(ProductGibbsEstimate { r, k0, stabilized, by_total, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::gibbs_measure;
    use crate::hyperbolic::ConstantsConfig;
    use crate::product::restrict_and_project;
    use crate::torus::TorusPoint;

    fn cat() -> (HyperbolicMap, HyperbolicConstants) {
        let m = HyperbolicMap::cat();
        let c = HyperbolicConstants::linear(&m, &ConstantsConfig::default()).unwrap();
        (m, c)
    }

    #[test]
    fn leaf_ratios_for_lebesgue() {
        let (map, consts) = cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&map, &phi, 16).unwrap();
        let r = 0.02;
        let rect = make_rectangle(&map, &consts, TorusPoint::new(0.37, 0.58), r).unwrap();
        let rest = restrict_and_project(&map, &mu, &rect).unwrap();
        let opts = SamplingOptions { sample_count: 60, seed: 1 };
        let est = leafwise_gibbs_check(&map, &consts, &phi, &mu, &rest, r / 2.0, r, &(1..=8).collect::<Vec<_>>(), opts)
            .unwrap();
        assert!(est.stabilized, "{:?}", est.record);
        // length oracle: μ^u(B^u_m(x,ρ)) ≈ μ(R)·ρλ^{1−m}/r and e^{mP} ≈ λ^m,
        // so the ratio is ≈ μ(R)·λ·ρ/r for every m
        let lam = map.eigen().lambda_u;
        let full = rest.measure.mass * lam;
        for d in est.unstable.iter().chain(&est.stable).filter(|d| d.included && d.has_ratios()) {
            // at m = 1 only the smaller radius fits inside the leaf
            let top = if d.n == 1 { 0.5 * full } else { full };
            assert!((d.max_ratio / top - 1.0).abs() < 0.2, "m={} max {} vs {top}", d.n, d.max_ratio);
            assert!((d.min_ratio / (0.5 * full) - 1.0).abs() < 0.2, "m={} min {} vs {}", d.n, d.min_ratio, 0.5 * full);
        }
        // unstable and stable mirrors agree for the symmetric cat map
        let su = est.unstable.iter().filter(|d| d.included && d.has_ratios()).map(|d| d.sup).fold(1.0, f64::max);
        let ss = est.stable.iter().filter(|d| d.included && d.has_ratios()).map(|d| d.sup).fold(1.0, f64::max);
        assert!((su / ss - 1.0).abs() < 0.2, "{su} vs {ss}");
    }

    #[test]
    fn leaf_hypotheses_enforced() {
        let (map, consts) = cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&map, &phi, 10).unwrap();
        let rect = make_rectangle(&map, &consts, TorusPoint::new(0.37, 0.58), 0.02).unwrap();
        let rest = restrict_and_project(&map, &mu, &rect).unwrap();
        let opts = SamplingOptions { sample_count: 4, seed: 1 };
        // rectangle radius outside [r̄1, r̄2]
        let err = leafwise_gibbs_check(&map, &consts, &phi, &mu, &rest, 0.005, 0.01, &[1, 2], opts);
        assert!(matches!(err, Err(Error::HypothesisUnsatisfied(_))));
        let err = leafwise_gibbs_check(&map, &consts, &phi, &mu, &rest, 0.01, 0.03, &[1, 2], opts);
        assert!(matches!(err, Err(Error::HypothesisUnsatisfied(_))));
    }

    #[test]
    fn bracket_box_ratio_for_lebesgue() {
        let (map, consts) = cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&map, &phi, 16).unwrap();
        let r = 0.02;
        let opts = SamplingOptions { sample_count: 40, seed: 2 };
        let est = product_gibbs_check(&map, &consts, &phi, &mu, r, &(2..=9).collect::<Vec<_>>(), opts).unwrap();
        assert!(est.stabilized, "{:?}", est.record);
        // box-area oracle: 4r²λ^{2−t}·e^{tP}
        let lam = map.eigen().lambda_u;
        for d in est.by_total.iter().filter(|d| d.included && d.has_ratios()) {
            let oracle = 4.0 * r * r * lam.powi(2 - d.n as i32) * (d.n as f64 * mu.pressure()).exp();
            assert!((d.max_ratio / oracle - 1.0).abs() < 0.25, "t={} {} vs {oracle}", d.n, d.max_ratio);
            assert!((d.min_ratio / oracle - 1.0).abs() < 0.25, "t={} {} vs {oracle}", d.n, d.min_ratio);
        }
    }

    #[test]
    fn product_hypotheses_enforced() {
        let (map, consts) = cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&map, &phi, 8).unwrap();
        let err = product_gibbs_check(&map, &consts, &phi, &mu, 0.04, &[2, 3], SamplingOptions::default());
        assert!(matches!(err, Err(Error::HypothesisUnsatisfied(_))));
        assert!(product_gibbs_check(&map, &consts, &phi, &mu, 0.01, &[1], SamplingOptions::default()).is_err());
    }
}
