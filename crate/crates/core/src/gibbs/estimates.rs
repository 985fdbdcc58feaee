//! Empirical Gibbs and Bowen constants: `K(r)` from ball masses and `L(r)`
//! from Birkhoff-sum oscillation on Bowen balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::EmpiricalMeasure;
use crate::bowen::inclusion::sample_in_ball;
use crate::bowen::{linear_ball_area, BowenBallSpec};
use crate::dynamics::{HyperbolicMap, Perturbation};
use crate::error::{Error, Result};
use crate::hyperbolic::HyperbolicConstants;
use crate::potential::{birkhoff_sum, Direction, Potential, PotentialKind};
use crate::record::{Tally, VerificationRecord};
use crate::sampling::{uniform_point, SampleStream};
use crate::torus::TorusPoint;

/// Minimum expected atom count in a ball before its mass is trusted.
pub const RESOLUTION_ATOMS: f64 = 25.0;
/// Allowed growth of the tail sup over the head sup.
pub const STABILIZATION_FACTOR: f64 = 1.2;
/// Slack added to `log(K(ζ)K(r+ζ))` when checking `L(r)`.
pub const BOWEN_SLACK: f64 = 0.1;

/// `max(tail) ≤ 1.2·max(head)`, with head the first third and tail the
/// last third of the sequence. Fewer than three values never stabilize.
pub fn stabilizes(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let third = values.len().div_ceil(3);
    let head = values[..third].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = values[values.len() - third..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    tail <= STABILIZATION_FACTOR * head
}

/// Same test for sequences that grow towards their limit: the tail third
/// is compared with the first two thirds.
pub fn stabilizes_increasing(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let third = values.len().div_ceil(3);
    let split = values.len() - third;
    let head = values[..split].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = values[split..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    tail <= STABILIZATION_FACTOR * head
}

/// `S_1φ(x), …, S_{n_max}φ(x)` along the forward orbit.
pub(crate) fn birkhoff_prefix(map: &HyperbolicMap, phi: &Potential, x: &TorusPoint, n_max: usize) -> Result<Vec<f64>> {
    if let PotentialKind::Constant { value } = phi.kind() {
        return Ok((1..=n_max).map(|n| value * n as f64).collect());
    }
    let orbit = map.orbit(x, n_max, false)?;
    let mut acc = 0.0;
    Ok(orbit
        .iter()
        .map(|p| {
            acc += phi.eval(p);
            acc
        })
        .collect())
}

/// `μ(B_n(x,r))·e^{nP − S_nφ(x)}` for `n = 1..=n_max`; `None` where the
/// ball holds no atom.
pub fn gibbs_ratios(
    map: &HyperbolicMap,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    x: &TorusPoint,
    r: f64,
    n_max: usize,
    pressure: f64,
) -> Result<Vec<Option<f64>>> {
    let masses = mu.forward_ball_masses(map, x, r, n_max)?;
    let sums = birkhoff_prefix(map, phi, x, n_max)?;
    Ok((1..=n_max)
        .map(|n| {
            let m = masses[n - 1];
            (m > 0.0).then(|| m * (n as f64 * pressure - sums[n - 1]).exp())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { sample_count: 100, seed: 0 }
    }
}

/// Per-depth statistics of the Gibbs ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub n: usize,
    /// Lebesgue area of the ball for the linear part of the map.
    pub linear_area: f64,
    /// False when the depth sits below the resolution floor.
    pub included: bool,
    /// Sup of `max(ratio, 1/ratio)`.
    pub sup: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Sampled balls without any atom.
    pub zero_mass: usize,
}

impl DepthStats {
    pub fn new(n: usize, linear_area: f64, included: bool) -> Self {
        Self { n, linear_area, included, sup: 1.0, min_ratio: f64::INFINITY, max_ratio: 0.0, zero_mass: 0 }
    }

    /// Folds one ratio in; `None` is an empty ball.
    pub fn observe(&mut self, ratio: Option<f64>) {
        match ratio {
            None => self.zero_mass += 1,
            Some(q) => {
                self.min_ratio = self.min_ratio.min(q);
                self.max_ratio = self.max_ratio.max(q);
                self.sup = self.sup.max(q.max(1.0 / q));
            }
        }
    }

    pub fn has_ratios(&self) -> bool {
        self.max_ratio > 0.0
    }

    pub fn merge(&mut self, other: &DepthStats) {
        self.min_ratio = self.min_ratio.min(other.min_ratio);
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.sup = self.sup.max(other.sup);
        self.zero_mass += other.zero_mass;
    }
}

/// Thirds test applied to each side of the two-sided bound: the sup of the
/// ratio and the sup of its inverse must both settle.
pub fn ratios_stabilize(depths: &[&DepthStats]) -> bool {
    let upper: Vec<f64> = depths.iter().map(|d| d.max_ratio).collect();
    let lower: Vec<f64> = depths.iter().map(|d| 1.0 / d.min_ratio).collect();
    stabilizes(&upper) && stabilizes(&lower)
}

/// Thirds test on the per-depth sup of `max(ratio, 1/ratio)` alone.
pub fn sup_stabilizes(depths: &[&DepthStats]) -> bool {
    stabilizes(&depths.iter().map(|d| d.sup).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConstantEstimate {
    pub r: f64,
    pub k: f64,
    pub pressure: f64,
    pub stabilized: bool,
    pub depths: Vec<DepthStats>,
    pub record: VerificationRecord,
}

pub(crate) fn linear_part(map: &HyperbolicMap) -> Result<HyperbolicMap> {
    if map.is_linear() {
        Ok(map.clone())
    } else {
        HyperbolicMap::new(map.matrix(), Perturbation::none())
    }
}

/// Empirical `K(r)` over uniformly sampled centers and the depths of
/// `n_range`; `pressure_offset` shifts `P` for falsification probes.
pub fn gibbs_constant_estimate(
    map: &HyperbolicMap,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    r: f64,
    n_range: &[usize],
    opts: SamplingOptions,
    pressure_offset: f64,
) -> Result<GibbsConstantEstimate> {
    let n_max = *n_range.iter().max().ok_or_else(|| Error::Invalid("empty n range".into()))?;
    if n_range.contains(&0) {
        return Err(Error::Invalid("depths must be positive".into()));
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::Invalid(format!("radius {r} outside (0, 0.5)")));
    }
    if mu.period() <= n_max {
        return Err(Error::Invalid(format!("measure period {} must exceed the largest depth {n_max}", mu.period())));
    }
    let pressure = mu.pressure() + pressure_offset;
    let lin = linear_part(map)?;
    let floor = RESOLUTION_ATOMS / mu.len() as f64;
    let mut depths: Vec<DepthStats> = n_range
        .iter()
        .map(|&n| {
            let area = linear_ball_area(&lin, 1, n, r)?;
            Ok(DepthStats::new(n, area, area >= floor))
        })
        .collect::<Result<_>>()?;

    let stream = SampleStream::new(opts.seed, "gibbs-constant");
    let ratios: Vec<Vec<Option<f64>>> = (0..opts.sample_count as u64)
        .into_par_iter()
        .map(|s| {
            let x = uniform_point(&mut stream.rng(s));
            gibbs_ratios(map, phi, mu, &x, r, n_max, pressure)
        })
        .collect::<Result<_>>()?;

    let mut tally = Tally::default();
    for row in &ratios {
        for d in depths.iter_mut().filter(|d| d.included) {
            d.observe(row[d.n - 1]);
        }
    }
    let included: Vec<&DepthStats> = depths.iter().filter(|d| d.included && d.has_ratios()).collect();
    let k = included.iter().map(|d| d.sup).fold(1.0, f64::max);
    for row in &ratios {
        for d in &included {
            if let Some(q) = row[d.n - 1] {
                // log-slack of the ratio inside [1/K, K]
                tally.observe_padded(k.ln() - q.ln().abs(), 1e-12);
            }
        }
    }
    let sups: Vec<f64> = included.iter().map(|d| d.sup).collect();
    // a wrong P tilts the ratios by e^{n·offset}, which only one side sees
    let upper: Vec<f64> = included.iter().map(|d| d.max_ratio).collect();
    let lower: Vec<f64> = included.iter().map(|d| 1.0 / d.min_ratio).collect();
    let stabilized = ratios_stabilize(&included);
    let zero_mass: usize = depths.iter().map(|d| d.zero_mass).sum();
    let record = VerificationRecord::new("gibbs-constant")
        .with_param("r", r)
        .with_param("K", k)
        .with_param("pressure", pressure)
        .with_param("pressure_offset", pressure_offset)
        .with_param("measure_period", mu.period())
        .with_param("atoms", mu.len())
        .with_param("included_n", included.iter().map(|d| d.n).collect::<Vec<_>>())
        .with_param("excluded_n", depths.iter().filter(|d| !d.included).map(|d| d.n).collect::<Vec<_>>())
        .with_param("sup_by_n", sups.clone())
        .with_param("max_ratio_by_n", upper)
        .with_param("max_inverse_ratio_by_n", lower)
        .with_param("zero_mass_balls", zero_mass)
        .with_param("stabilized", stabilized)
        .with_param("sup_stabilized", sup_stabilizes(&included))
        .with_tally(tally)
        .fail_unless(stabilized);
    Ok(GibbsConstantEstimate { r, k, pressure, stabilized, depths, record })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenPropertyEstimate {
    pub r: f64,
    /// Sup over depths of the per-depth sups.
    pub l: f64,
    pub by_n: Vec<(usize, f64)>,
    pub stabilized: bool,
    /// `log(K(ζ)K(r+ζ)) + slack` when the K-estimates were supplied.
    pub bound: Option<f64>,
    pub record: VerificationRecord,
}

/// Sup of `|S_nφ(x) − S_nφ(y)|` over sampled `x` and `y ∈ B_n(x,r)`.
/// With `k_pair = (K(ζ), K(r+ζ))` the estimate is also checked against
/// `log(K(ζ)K(r+ζ)) + 0.1`.
pub fn bowen_constant_estimate(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    phi: &Potential,
    r: f64,
    n_range: &[usize],
    opts: SamplingOptions,
    k_pair: Option<(f64, f64)>,
) -> Result<BowenPropertyEstimate> {
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(Error::Invalid("depths must be positive and non-empty".into()));
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::Invalid(format!("radius {r} outside (0, 0.5)")));
    }
    let stream = SampleStream::new(opts.seed, "bowen-property");
    let by_n: Vec<(usize, f64)> = n_range
        .iter()
        .map(|&n| {
            let sub = stream.child(&format!("n{n}"));
            let sup = (0..opts.sample_count as u64)
                .into_par_iter()
                .map(|s| {
                    let mut rng = sub.rng(s);
                    let x = uniform_point(&mut rng);
                    let spec = BowenBallSpec::forward(x, n, r)?;
                    let y = sample_in_ball(map, consts, &spec, &mut rng)?;
                    let sx = birkhoff_sum(map, phi, &x, n, Direction::Forward)?;
                    let sy = birkhoff_sum(map, phi, &y, n, Direction::Forward)?;
                    Ok((sx - sy).abs())
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok((n, sup))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = by_n.iter().map(|p| p.1).collect();
    let l = values.iter().copied().fold(0.0, f64::max);
    // L ≡ 0 is trivially stable
    let stabilized = l == 0.0 || stabilizes_increasing(&values);
    let bound = k_pair.map(|(a, b)| (a * b).ln() + BOWEN_SLACK);
    let within = bound.is_none_or(|b| l <= b);
    let mut record = VerificationRecord::new("bowen-property")
        .with_param("r", r)
        .with_param("L", l)
        .with_param("n_range", n_range.to_vec())
        .with_param("sup_by_n", values)
        .with_param("stabilized", stabilized);
    let mut tally = Tally::default();
    if let (Some(b), Some((kz, krz))) = (bound, k_pair) {
        record.set_param("K_zeta", kz);
        record.set_param("K_r_plus_zeta", krz);
        record.set_param("bound", b);
        tally.observe(b - l, false);
    } else {
        tally.observe(0.0, false);
    }
    tally.samples = (opts.sample_count * n_range.len()) as u64;
    let record = record.with_tally(tally).fail_unless(stabilized && within);
    Ok(BowenPropertyEstimate { r, l, by_n, stabilized, bound, record })
}

/// Full chain for one radius: `K(ζ)` and `K(r+ζ)` with `ζ = r₀ − r` from
/// the measure, then `L(r)` checked against them.
pub fn bowen_property_check(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    r: f64,
    n_range: &[usize],
    opts: SamplingOptions,
) -> Result<(BowenPropertyEstimate, GibbsConstantEstimate, GibbsConstantEstimate)> {
    let r0 = consts.r0;
    if !(r > 0.0 && r < r0) {
        return Err(Error::Invalid(format!("radius {r} must lie in (0, r0 = {r0})")));
    }
    let zeta = r0 - r;
    let k_zeta = gibbs_constant_estimate(map, phi, mu, zeta, n_range, opts, 0.0)?;
    let k_outer = gibbs_constant_estimate(map, phi, mu, r + zeta, n_range, opts, 0.0)?;
    let mut est = bowen_constant_estimate(map, consts, phi, r, n_range, opts, Some((k_zeta.k, k_outer.k)))?;
    est.record.set_param("zeta", zeta);
    Ok((est, k_zeta, k_outer))
}

/// `(r, value)` row of a constants table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsDiagnostics {
    #[serde(rename = "P_est")]
    pub p_est: f64,
    #[serde(rename = "K_table")]
    pub k_table: Vec<TableEntry>,
    #[serde(rename = "L_table")]
    pub l_table: Vec<TableEntry>,
    pub n_range: Vec<usize>,
}

impl GibbsDiagnostics {
    /// K values at least 1, L values nonnegative, everything finite.
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_est.is_finite()
            && self.k_table.iter().all(|e| e.value.is_finite() && e.value >= 1.0)
            && self.l_table.iter().all(|e| e.value.is_finite() && e.value >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("diagnostics out of range".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::gibbs_measure;
    use crate::hyperbolic::ConstantsConfig;

    fn depths(k: usize) -> Vec<usize> {
        (1..=k).collect()
    }

    #[test]
    fn stabilization_thirds() {
        assert!(stabilizes(&[2.0, 3.0, 3.0, 3.1, 3.5, 3.4]));
        assert!(!stabilizes(&[2.0, 2.0, 3.0, 3.0, 3.0, 3.0]));
        assert!(!stabilizes(&[1.0, 1.0]));
        assert!(stabilizes_increasing(&[0.1, 0.3, 0.45, 0.5, 0.52, 0.52]));
        assert!(!stabilizes_increasing(&[0.1, 0.2, 0.3]));
    }

    #[test]
    fn lebesgue_ratio_stabilizes() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&cat, &phi, 14).unwrap();
        let opts = SamplingOptions { sample_count: 20, seed: 1 };
        let est = gibbs_constant_estimate(&cat, &phi, &mu, 0.05, &depths(10), opts, 0.0).unwrap();
        assert!(est.stabilized, "{:?}", est.record);
        assert!(est.record.pass);
        let included: Vec<_> = est.depths.iter().filter(|d| d.included).collect();
        assert!(included.len() >= 5);
        // oracle: ratio ≈ area·e^{nP}, nearly independent of the center
        for d in &included {
            let oracle = d.linear_area * (d.n as f64 * est.pressure).exp();
            assert!((d.max_ratio / oracle - 1.0).abs() < 0.15, "n={} {} vs {oracle}", d.n, d.max_ratio);
            assert!((d.min_ratio / oracle - 1.0).abs() < 0.15);
        }
    }

    #[test]
    fn wrong_pressure_breaks_stabilization() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::cosine(0.5);
        let mu = gibbs_measure(&cat, &phi, 14).unwrap();
        let opts = SamplingOptions { sample_count: 30, seed: 2 };
        let good = gibbs_constant_estimate(&cat, &phi, &mu, 0.08, &depths(10), opts, 0.0).unwrap();
        assert!(good.stabilized, "{:?}", good.record);
        let bad = gibbs_constant_estimate(&cat, &phi, &mu, 0.08, &depths(10), opts, 0.1).unwrap();
        assert!(!bad.stabilized && !bad.record.pass, "{:?}", bad.record);
    }

    #[test]
    fn fixed_point_center_stays_within_k() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::cosine(0.5);
        let mu = gibbs_measure(&cat, &phi, 14).unwrap();
        let opts = SamplingOptions { sample_count: 40, seed: 4 };
        let est = gibbs_constant_estimate(&cat, &phi, &mu, 0.08, &depths(6), opts, 0.0).unwrap();
        let ratios = gibbs_ratios(&cat, &phi, &mu, &TorusPoint::ORIGIN, 0.08, 6, est.pressure).unwrap();
        for d in est.depths.iter().filter(|d| d.included) {
            let q = ratios[d.n - 1].unwrap();
            // a fixed point is a fresh center: allow the sampling gap
            assert!(q <= 1.5 * est.k && q >= 1.0 / (1.5 * est.k), "n={} q={q} K={}", d.n, est.k);
        }
    }

    #[test]
    fn period_must_exceed_depths() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::constant(0.0);
        let mu = gibbs_measure(&cat, &phi, 6).unwrap();
        assert!(gibbs_constant_estimate(&cat, &phi, &mu, 0.05, &depths(6), SamplingOptions::default(), 0.0).is_err());
    }

    #[test]
    fn constant_potential_has_zero_bowen_constant() {
        let cat = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&cat, &ConstantsConfig::default()).unwrap();
        let est = bowen_constant_estimate(
            &cat,
            &consts,
            &Potential::constant(1.3),
            0.05,
            &depths(6),
            SamplingOptions { sample_count: 50, seed: 0 },
            None,
        )
        .unwrap();
        assert_eq!(est.l, 0.0);
        assert!(est.record.pass);
    }

    #[test]
    fn cosine_bowen_constant_stabilizes_below_series_bound() {
        let cat = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&cat, &ConstantsConfig::default()).unwrap();
        let phi = Potential::cosine(0.5);
        let r = 0.05;
        let est = bowen_constant_estimate(
            &cat,
            &consts,
            &phi,
            r,
            &depths(12),
            SamplingOptions { sample_count: 300, seed: 7 },
            None,
        )
        .unwrap();
        assert!(est.stabilized, "{:?}", est.by_n);
        // series oracle: at time k the offset is below r(λ^k + λ^{n-1-k})
        // in eigen-norm, so the sum is under 2·Lip·Q·r/(1 − λ)
        let lambda = cat.eigen().lambda_s.abs();
        let series = 2.0 * phi.lipschitz() * consts.q * r / (1.0 - lambda);
        assert!(est.l <= series, "{} vs {series}", est.l);
    }

    #[test]
    fn stable_leaf_pairs_obey_contraction_series() {
        let cat = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&cat, &ConstantsConfig::default()).unwrap();
        let phi = Potential::cosine(0.5);
        let e = *cat.eigen();
        let stream = SampleStream::new(9, "stable-leaf-series");
        for s in 0..200 {
            let mut rng = stream.rng(s);
            let x = uniform_point(&mut rng);
            let t = crate::sampling::symmetric(&mut rng, 0.05);
            let y = x.translate(e.e_s * t);
            let bound = phi.lipschitz() * consts.c * t.abs() / (1.0 - consts.lambda);
            for n in [1, 5, 10, 20] {
                let d = birkhoff_sum(&cat, &phi, &x, n, Direction::Forward).unwrap()
                    - birkhoff_sum(&cat, &phi, &y, n, Direction::Forward).unwrap();
                assert!(d.abs() <= bound * (1.0 + 1e-9) + 1e-12, "n={n}: {d} vs {bound}");
            }
        }
    }

    #[test]
    fn bowen_chain_holds_for_cosine() {
        let cat = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&cat, &ConstantsConfig::default()).unwrap();
        let phi = Potential::cosine(0.5);
        let mu = gibbs_measure(&cat, &phi, 14).unwrap();
        let opts = SamplingOptions { sample_count: 40, seed: 3 };
        let (l, kz, ko) = bowen_property_check(&cat, &consts, &phi, &mu, 0.05, &depths(10), opts).unwrap();
        assert!(kz.k >= 1.0 && ko.k >= 1.0);
        assert!(l.l <= l.bound.unwrap(), "{} vs {:?}", l.l, l.bound);
        assert!(l.record.pass, "{:?}", l.record);
    }

    #[test]
    fn diagnostics_serialize() {
        let d = GibbsDiagnostics {
            p_est: 0.96,
            k_table: vec![TableEntry { r: 0.05, value: 40.0 }],
            l_table: vec![TableEntry { r: 0.05, value: 0.4 }],
            n_range: vec![1, 2, 3],
        };
        d.validate().unwrap();
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["K_table"][0]["value"], 40.0);
        assert!(json.get("P_est").is_some());
        let bad = GibbsDiagnostics { l_table: vec![TableEntry { r: 0.05, value: -1.0 }], ..d };
        assert!(bad.validate().is_err());
    }
}
