//! Hyperbolicity constants `(C, λ, δ, ε, Q, ε₁, r₀, ω)` and their audits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bracket::bracket_offset;
use super::leaf::{leaf_pair_distances, Side};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::record::{Tally, VerificationRecord};
use crate::sampling::{symmetric, uniform_in_disc, uniform_point, SampleStream};

/// Relative slack allowed in audits for floating-point rounding.
const ROUNDING: f64 = 1e-9;
const OMEGA_SAFETY: f64 = 1.5;

/// Monotone piecewise-linear modulus `ω`, tabulated on increasing radii.
/// Below the first radius it is interpolated towards `ω(0) = 0`; above the
/// last radius it is unknown and evaluates to `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct OmegaTable {
    points: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for OmegaTable {
    type Error = Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("empty omega table".into()));
        }
        for w in points.windows(2) {
            if !(w[1][0] > w[0][0]) || w[1][1] < w[0][1] {
                return Err(Error::Invalid("omega table must be increasing in r and nondecreasing in ω".into()));
            }
        }
        if points.iter().any(|p| !(p[0] > 0.0 && p[1] > 0.0) || !p[1].is_finite()) {
            return Err(Error::Invalid("omega table entries must be positive".into()));
        }
        Ok(Self { points })
    }
}

impl From<OmegaTable> for Vec<[f64; 2]> {
    fn from(t: OmegaTable) -> Self {
        t.points
    }
}

/// `count` radii spaced logarithmically over `[r_min, r_max]`.
pub fn log_grid(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

impl OmegaTable {
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::try_from(points)
    }

    pub fn linear(slope: f64, radii: &[f64]) -> Result<Self> {
        Self::try_from(radii.iter().map(|&r| [r, slope * r]).collect::<Vec<_>>())
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn max_radius(&self) -> f64 {
        self.points[self.points.len() - 1][0]
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let first = self.points[0];
        if r <= first[0] {
            return first[1] * r / first[0];
        }
        for w in self.points.windows(2) {
            let ([r0, v0], [r1, v1]) = (w[0], w[1]);
            if r <= r1 {
                return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
            }
        }
        f64::INFINITY
    }

    /// Largest `r` with `ω(r) ≤ target`, within the tabulated domain.
    pub fn inverse(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        let first = self.points[0];
        if target <= first[1] {
            return first[0] * target / first[1];
        }
        let mut best = first[0];
        for w in self.points.windows(2) {
            let ([r0, v0], [r1, v1]) = (w[0], w[1]);
            if target >= v1 {
                best = r1;
            } else if target >= v0 {
                best = if v1 > v0 { r0 + (r1 - r0) * (target - v0) / (v1 - v0) } else { r1 };
                break;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicConstants {
    #[serde(rename = "C")]
    pub c: f64,
    pub lambda: f64,
    pub delta: f64,
    pub eps: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub eps1: f64,
    pub r0: f64,
    #[serde(rename = "omega_table")]
    pub omega: OmegaTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstantsConfig {
    pub delta: f64,
    pub eps: f64,
    pub r0: f64,
    /// `ε₁` is this fraction of `δ / (max(C, ‖Df‖)·Q)`, capped at `ε`.
    pub eps1_safety: f64,
    /// Forward/backward steps in the contraction audit.
    pub horizon: usize,
    pub omega_grid: usize,
    /// Samples used to estimate constants of perturbed maps.
    pub estimate_samples: usize,
    pub contraction_samples: usize,
    pub bracket_samples: usize,
    pub omega_samples: usize,
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            eps: 0.1,
            r0: 0.1,
            eps1_safety: 0.9,
            horizon: 20,
            omega_grid: 24,
            estimate_samples: 2000,
            contraction_samples: 10_000,
            bracket_samples: 10_000,
            omega_samples: 100_000,
            seed: 0,
        }
    }
}

impl ConstantsConfig {
    /// Small sample counts, for tests and quick runs.
    pub fn quick() -> Self {
        Self {
            estimate_samples: 400,
            contraction_samples: 200,
            bracket_samples: 500,
            omega_samples: 2000,
            ..Self::default()
        }
    }
}

impl HyperbolicConstants {
    /// Closed-form constants of a linear automorphism: leaves are straight
    /// lines, so `C = 1`, `λ = |λ_s|`, and the bracket moves each
    /// eigen-coordinate independently.
    pub fn linear(map: &HyperbolicMap, cfg: &ConstantsConfig) -> Result<Self> {
        let eig = map.eigen();
        let q = eig.projection_norm().max(1.0);
        let slope = q * (2.0 + 2.0 * eig.cos_angle()).sqrt();
        let radii = log_grid(cfg.eps * 1e-4, cfg.eps, cfg.omega_grid);
        Self::assemble(map, cfg, 1.0, eig.lambda_s.abs(), q, OmegaTable::linear(slope, &radii)?)
    }

    fn assemble(
        map: &HyperbolicMap,
        cfg: &ConstantsConfig,
        c: f64,
        lambda: f64,
        q: f64,
        omega: OmegaTable,
    ) -> Result<Self> {
        let eps1 = cfg.eps.min(cfg.eps1_safety * cfg.delta / (c.max(map.df_norm()) * q));
        let out = Self { c, lambda, delta: cfg.delta, eps: cfg.eps, q, eps1, r0: cfg.r0, omega };
        out.validate(map)?;
        Ok(out)
    }

    pub fn validate(&self, map: &HyperbolicMap) -> Result<()> {
        let positive = [self.c, self.lambda, self.delta, self.eps, self.q, self.eps1, self.r0];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid("hyperbolicity constants must be positive and finite".into()));
        }
        if self.c < 1.0 || self.q < 1.0 || self.lambda >= 1.0 {
            return Err(Error::Invalid(format!(
                "need C ≥ 1, Q ≥ 1, λ < 1 (got {}, {}, {})",
                self.c, self.q, self.lambda
            )));
        }
        if self.eps1 > self.eps {
            return Err(Error::Invalid("eps1 exceeds eps".into()));
        }
        let lhs = self.c.max(map.df_norm()) * self.q * self.eps1;
        if lhs >= self.delta {
            return Err(Error::Invalid(format!("max(C,|Df|)·Q·eps1 = {lhs} is not below delta")));
        }
        Ok(())
    }

    pub fn omega(&self, r: f64) -> f64 {
        self.omega.eval(r)
    }

    /// `r₂ = ω(C·ω(r))`.
    pub fn r2(&self, r: f64) -> f64 {
        self.omega(self.c * self.omega(r))
    }

    /// Largest admissible rectangle radius `ε / (2(Q+1))` (exclusive).
    pub fn rectangle_limit(&self) -> f64 {
        self.eps / (2.0 * (self.q + 1.0))
    }

    /// Bound `ε₁ / (2CQ + 1)` on leaf-Gibbs radii.
    pub fn leaf_radius_limit(&self) -> f64 {
        self.eps1 / (2.0 * self.c * self.q + 1.0)
    }
}

struct ContractionSample {
    /// `max_k d_k / (λ^k d_0)`.
    worst_ratio: f64,
    /// `d_n / d_0` at the horizon.
    rate_at_horizon: f64,
}

fn contraction_sample(
    map: &HyperbolicMap,
    lambda: f64,
    cfg: &ConstantsConfig,
    stream: &SampleStream,
    i: u64,
) -> Result<Vec<ContractionSample>> {
    let mut rng = stream.rng(i);
    let x = uniform_point(&mut rng);
    let mut t = symmetric(&mut rng, cfg.eps);
    if t == 0.0 {
        t = cfg.eps / 2.0;
    }
    let mut out = Vec::with_capacity(2);
    for side in [Side::Stable, Side::Unstable] {
        let d = leaf_pair_distances(map, &x, side, t, cfg.horizon)?;
        let worst = d.iter().enumerate().skip(1).map(|(k, dk)| dk / (lambda.powi(k as i32) * d[0])).fold(0.0, f64::max);
        out.push(ContractionSample { worst_ratio: worst, rate_at_horizon: d[cfg.horizon] / d[0] });
    }
    Ok(out)
}

struct BracketSample {
    /// `max(d([x,y],x), d([x,y],y)) / d(x,y)`.
    ratio: f64,
}

fn bracket_q_sample(map: &HyperbolicMap, eps: f64, stream: &SampleStream, i: u64) -> Result<BracketSample> {
    let mut rng = stream.rng(i);
    let x = uniform_point(&mut rng);
    let w = uniform_in_disc(&mut rng, eps);
    let (o, _) = bracket_offset(map, &x, &x.translate(w))?;
    let ratio = o.norm().max((o - w).norm()) / w.norm();
    Ok(BracketSample { ratio })
}

/// `d([x,y],[x',y'])` for a random quadruple at radius `r`; `near_sup` pushes
/// the perturbations towards the boundary of the `r`-discs.
fn omega_sample(map: &HyperbolicMap, eps: f64, r: f64, near_sup: bool, stream: &SampleStream, i: u64) -> Result<f64> {
    let mut rng = stream.rng(i);
    loop {
        let x = uniform_point(&mut rng);
        let w = uniform_in_disc(&mut rng, eps);
        let (a, b) = if near_sup {
            let ang_a = std::f64::consts::TAU * rng.random::<f64>();
            let ang_b = std::f64::consts::TAU * rng.random::<f64>();
            let rho = r * (1.0 - 1e-3 * rng.random::<f64>());
            (
                crate::linalg::Vec2::new(ang_a.cos(), ang_a.sin()) * rho,
                crate::linalg::Vec2::new(ang_b.cos(), ang_b.sin()) * rho,
            )
        } else {
            (uniform_in_disc(&mut rng, r), uniform_in_disc(&mut rng, r))
        };
        let wp = w + b - a;
        if wp.norm() > eps {
            continue;
        }
        let (o, _) = bracket_offset(map, &x, &x.translate(w))?;
        let xp = x.translate(a);
        let (op, _) = bracket_offset(map, &xp, &xp.translate(wp))?;
        return Ok((a + op - o).norm());
    }
}

fn collect<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Vec<Result<T>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

fn empirical_constants(map: &HyperbolicMap, cfg: &ConstantsConfig) -> Result<HyperbolicConstants> {
    let stream = SampleStream::new(cfg.seed, "constants-estimate");
    let m = cfg.estimate_samples.max(10);
    let contraction = collect(m, |i| contraction_sample(map, 1.0, cfg, &stream.child("contraction"), i));
    let contraction: Vec<ContractionSample> =
        contraction.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    let rate = contraction.iter().map(|s| s.rate_at_horizon).fold(0.0, f64::max);
    let lambda = (rate.powf(1.0 / cfg.horizon as f64) * 1.02).min(0.99);
    // recompute the ratios against the chosen λ
    let again = collect(m, |i| contraction_sample(map, lambda, cfg, &stream.child("contraction"), i));
    let c =
        again.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().map(|s| s.worst_ratio).fold(1.0, f64::max)
            * 1.05;

    let q = collect(m, |i| bracket_q_sample(map, cfg.eps, &stream.child("q"), i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .iter()
        .map(|s| s.ratio)
        .fold(1.0, f64::max)
        * 1.1;

    let radii = log_grid(cfg.eps * 1e-4, cfg.eps, cfg.omega_grid);
    let per_radius = (m / 4).max(50);
    let mut points = Vec::with_capacity(radii.len());
    let mut running: f64 = 0.0;
    for (j, &r) in radii.iter().enumerate() {
        let s = stream.child(&format!("omega-{j}"));
        let sup = collect(per_radius, |i| omega_sample(map, cfg.eps, r, true, &s, i))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        running = running.max(sup * OMEGA_SAFETY);
        points.push([r, running]);
    }
    HyperbolicConstants::assemble(map, cfg, c, lambda, q, OmegaTable::from_points(points)?)
}

/// Audits a constants bundle against fresh samples. Each returned record
/// carries zero violations iff the corresponding property held everywhere.
pub fn audit_constants(
    map: &HyperbolicMap,
    consts: &HyperbolicConstants,
    cfg: &ConstantsConfig,
) -> Vec<VerificationRecord> {
    let stream = SampleStream::new(cfg.seed, "constants-audit");
    let mut records = Vec::new();

    let mut tally = Tally::default();
    let acfg = ConstantsConfig { eps: consts.eps, ..cfg.clone() };
    for r in collect(cfg.contraction_samples, |i| {
        contraction_sample(map, consts.lambda, &acfg, &stream.child("contraction"), i)
    }) {
        match r {
            Ok(samples) => {
                for s in samples {
                    tally.observe(1.0 + ROUNDING - s.worst_ratio / consts.c, false);
                }
            }
            Err(_) => tally.observe(f64::NEG_INFINITY, true),
        }
    }
    records.push(
        VerificationRecord::new("constants-contraction")
            .with_param("C", consts.c)
            .with_param("lambda", consts.lambda)
            .with_param("horizon", cfg.horizon)
            .with_tally(tally),
    );

    let mut tally = Tally::default();
    for r in collect(cfg.bracket_samples, |i| bracket_q_sample(map, consts.eps, &stream.child("q"), i)) {
        match r {
            Ok(s) => tally.observe(1.0 + ROUNDING - s.ratio / consts.q, false),
            Err(_) => tally.observe(f64::NEG_INFINITY, true),
        }
    }
    records.push(VerificationRecord::new("constants-bracket-distance").with_param("Q", consts.q).with_tally(tally));

    let (lo, hi) = (consts.omega.points()[0][0], consts.omega.max_radius());
    let s = stream.child("omega");
    let results = collect(cfg.omega_samples, |i| {
        let r = (lo.ln() + (hi.ln() - lo.ln()) * s.child("radius").rng(i).random::<f64>()).exp();
        omega_sample(map, consts.eps, r, i % 2 == 0, &s, i).map(|d| (r, d))
    });
    let mut tally = Tally::default();
    for r in results {
        match r {
            Ok((r, d)) => tally.observe(1.0 - d / consts.omega(r), false),
            Err(_) => tally.observe(f64::NEG_INFINITY, true),
        }
    }
    records.push(
        VerificationRecord::new("constants-omega").with_param("r_min", lo).with_param("r_max", hi).with_tally(tally),
    );

    let lhs = consts.c.max(map.df_norm()) * consts.q * consts.eps1;
    let mut tally = Tally::default();
    tally.observe(1.0 - lhs / consts.delta, false);
    records.push(
        VerificationRecord::new("constants-eps1")
            .with_param("eps1", consts.eps1)
            .with_param("df_norm", map.df_norm())
            .with_tally(tally),
    );
    records
}

/// Constants for `map` (closed form for linear maps, sampled otherwise),
/// together with the audit records that certify them.
pub fn estimate_constants(
    map: &HyperbolicMap,
    cfg: &ConstantsConfig,
) -> Result<(HyperbolicConstants, Vec<VerificationRecord>)> {
    let consts = if map.is_linear() { HyperbolicConstants::linear(map, cfg)? } else { empirical_constants(map, cfg)? };
    let records = audit_constants(map, &consts, cfg);
    let failed: Vec<&str> = records.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::ConstantsAuditFailed(failed.join(", ")));
    }
    Ok((consts, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_closed_form_constants() {
        let cat = HyperbolicMap::cat();
        let c = HyperbolicConstants::linear(&cat, &ConstantsConfig::default()).unwrap();
        assert_eq!(c.c, 1.0);
        assert!((c.lambda - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((c.q - 1.0).abs() < 1e-12);
        assert!((c.omega(0.01) - 2f64.sqrt() * 0.01).abs() < 1e-15);
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((c.eps1 - 0.9 * 0.2 / lu).abs() < 1e-15);
    }

    #[test]
    fn cat_map_constants_pass_audit() {
        let cat = HyperbolicMap::cat();
        let (_, recs) = estimate_constants(&cat, &ConstantsConfig::quick()).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.pass && r.violations == 0));
    }

    #[test]
    fn perturbed_constants_pass_fresh_audit() {
        let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let cfg = ConstantsConfig::quick();
        let (c, _) = estimate_constants(&map, &cfg).unwrap();
        assert!(c.lambda > 0.38 && c.lambda < 0.45, "{}", c.lambda);
        assert!(c.c >= 1.0 && c.c < 2.0);
        assert!(c.q >= 1.0 && c.q < 1.5);
        let fresh = ConstantsConfig { seed: 99, ..cfg };
        assert!(audit_constants(&map, &c, &fresh).iter().all(|r| r.pass));
    }

    #[test]
    fn too_small_omega_is_caught() {
        let cat = HyperbolicMap::cat();
        let cfg = ConstantsConfig::quick();
        let mut c = HyperbolicConstants::linear(&cat, &cfg).unwrap();
        c.omega = OmegaTable::linear(1.0, &log_grid(1e-5, 0.1, 8)).unwrap();
        let recs = audit_constants(&cat, &c, &cfg);
        assert!(!recs.iter().find(|r| r.check == "constants-omega").unwrap().pass);
    }

    #[test]
    fn omega_table_interpolation_and_inverse() {
        let t = OmegaTable::from_points(vec![[0.01, 0.02], [0.1, 0.3]]).unwrap();
        assert_eq!(t.eval(0.005), 0.01);
        assert!((t.eval(0.055) - 0.16).abs() < 1e-15);
        assert_eq!(t.eval(0.2), f64::INFINITY);
        assert!((t.inverse(0.16) - 0.055).abs() < 1e-15);
        assert_eq!(t.inverse(1.0), 0.1);
        assert!(OmegaTable::from_points(vec![[0.1, 0.3], [0.2, 0.1]]).is_err());
    }

    #[test]
    fn constants_serialize_with_exact_field_names() {
        let c = HyperbolicConstants::linear(&HyperbolicMap::cat(), &ConstantsConfig::default()).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["C", "Q", "delta", "eps", "eps1", "lambda", "omega_table", "r0"]);
        let back: HyperbolicConstants = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    proptest::proptest! {
        #[test]
        fn omega_is_monotone(a in 0.0..0.1f64, b in 0.0..0.1f64) {
            let c = HyperbolicConstants::linear(&HyperbolicMap::cat(), &ConstantsConfig::default()).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(c.omega(lo) <= c.omega(hi));
        }
    }
}
