//! Run configuration, read from TOML with dotted sections.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::dynamics::{HyperbolicMap, Perturbation, PerturbationTerm};
use crate::error::{Error, Result};
use crate::hyperbolic::ConstantsConfig;
use crate::linalg::IntMat2;
use crate::potential::Potential;
use crate::torus::TorusPoint;

/// Depth lists accept `[1, 2, 3]` or an inclusive range string `"1..10"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Depths(pub Vec<usize>);

impl Depths {
    pub fn inclusive(lo: usize, hi: usize) -> Self {
        Self((lo..=hi).collect())
    }
}

impl<'de> Deserialize<'de> for Depths {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<usize>),
            Range(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Depths(v)),
            Raw::Range(s) => {
                let (a, b) = s
                    .split_once("..")
                    .ok_or_else(|| serde::de::Error::custom(format!("expected \"lo..hi\", got {s:?}")))?;
                let parse = |t: &str| t.trim().parse::<usize>().map_err(serde::de::Error::custom);
                let (lo, hi) = (parse(a)?, parse(b.trim_start_matches('='))?);
                if lo > hi {
                    return Err(serde::de::Error::custom(format!("empty range {s:?}")));
                }
                Ok(Depths::inclusive(lo, hi))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub matrix: IntMat2,
    /// Amplitude of the perturbation; zero gives the linear map.
    pub perturbation: f64,
    /// Displacement terms; the default is `(sin 2πx₁, sin 2πx₁)`.
    pub terms: Option<Vec<PerturbationTerm>>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { matrix: IntMat2([[2, 1], [1, 1]]), perturbation: 0.0, terms: None }
    }
}

impl MapConfig {
    pub fn build(&self) -> Result<HyperbolicMap> {
        let mut p = Perturbation::standard(self.perturbation);
        if let Some(terms) = &self.terms {
            p.terms = terms.clone();
        }
        if p.is_trivial() {
            p = Perturbation::none();
        }
        HyperbolicMap::new(self.matrix, p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// Period of the orbits carrying the empirical measure.
    pub period: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self { period: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Rectangle radius for the leaf, product and density checks.
    pub r: f64,
    /// Leaf radii; default `r/2` and `r`.
    pub r_bar1: Option<f64>,
    pub r_bar2: Option<f64>,
    /// Base point of the rectangle.
    pub q: [f64; 2],
    /// Bowen-ball radius of the Gibbs constant estimate.
    pub gibbs_r: f64,
    /// Radius of the Bowen-property estimate.
    pub bowen_r: f64,
    pub n_range: Depths,
    /// Leaf depths.
    pub m_range: Depths,
    /// Total depths `n + m` of the bracket-product estimate.
    pub totals: Depths,
    pub grid_resolution: usize,
    pub sample_count: usize,
    pub union_samples: usize,
    /// Depth of the separated sets in the product-set sandwich.
    pub sandwich_depth: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            r: 0.02,
            r_bar1: None,
            r_bar2: None,
            q: [0.37, 0.58],
            gibbs_r: 0.05,
            bowen_r: 0.02,
            n_range: Depths::inclusive(1, 10),
            m_range: Depths::inclusive(1, 10),
            totals: Depths::inclusive(2, 12),
            grid_resolution: 8,
            sample_count: 100,
            union_samples: 200,
            sandwich_depth: 5,
        }
    }
}

impl GeometryConfig {
    pub fn r_bar(&self) -> (f64, f64) {
        (self.r_bar1.unwrap_or(self.r / 2.0), self.r_bar2.unwrap_or(self.r))
    }

    pub fn base_point(&self) -> TorusPoint {
        TorusPoint::new(self.q[0], self.q[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BracketConfig {
    /// Iterate used in the equivariance law.
    pub n: usize,
    pub samples: usize,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self { n: 3, samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InclusionConfig {
    pub samples: usize,
    pub n: usize,
    pub m: usize,
    /// Radius for the two-sided ball inside the bracket product.
    pub r_outer: f64,
    /// Radius for the bracket product inside the two-sided ball.
    pub r_inner: f64,
    /// `y − x` for the pair of base points (`x` is the rectangle base).
    pub offset: [f64; 2],
}

impl Default for InclusionConfig {
    fn default() -> Self {
        Self { samples: 10_000, n: 5, m: 5, r_outer: 0.05, r_inner: 0.02, offset: [0.006, -0.008] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatedConfig {
    pub r: f64,
    pub n_range: Depths,
}

impl Default for SeparatedConfig {
    fn default() -> Self {
        Self { r: 0.02, n_range: Depths::inclusive(4, 10) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Added to the estimated pressure in the Gibbs constant estimate.
    #[serde(alias = "P_offset")]
    pub pressure_offset: f64,
}

impl Default for Overrides {
    fn default() -> Self {
        Self { pressure_offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<String>,
    pub map: MapConfig,
    pub potentials: Vec<Potential>,
    pub measure: MeasureConfig,
    pub geometry: GeometryConfig,
    pub bracket: BracketConfig,
    pub inclusions: InclusionConfig,
    pub separated: SeparatedConfig,
    pub constants: ConstantsConfig,
    pub overrides: Overrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            map: MapConfig::default(),
            potentials: vec![Potential::constant(0.0)],
            measure: MeasureConfig::default(),
            geometry: GeometryConfig::default(),
            bracket: BracketConfig::default(),
            inclusions: InclusionConfig::default(),
            separated: SeparatedConfig::default(),
            constants: ConstantsConfig::default(),
            overrides: Overrides::default(),
        }
    }
}

/// Unreadable, unparsable or out-of-range configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn depths_ok(name: &str, d: &Depths, bad: &mut Vec<String>) {
    if d.0.is_empty() || d.0.contains(&0) {
        bad.push(format!("{name} must be a non-empty list of positive depths"));
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Range checks that do not depend on the map; each check validates its
    /// own hypotheses later.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let (rb1, rb2) = g.r_bar();
        let mut bad = Vec::new();
        for (name, v) in [
            ("geometry.r", g.r),
            ("geometry.r_bar1", rb1),
            ("geometry.r_bar2", rb2),
            ("geometry.gibbs_r", g.gibbs_r),
            ("geometry.bowen_r", g.bowen_r),
            ("inclusions.r_outer", self.inclusions.r_outer),
            ("inclusions.r_inner", self.inclusions.r_inner),
            ("separated.r", self.separated.r),
        ] {
            if !(v > 0.0 && v < 0.5) {
                bad.push(format!("{name} = {v} must lie in (0, 0.5)"));
            }
        }
        depths_ok("geometry.n_range", &g.n_range, &mut bad);
        depths_ok("geometry.m_range", &g.m_range, &mut bad);
        depths_ok("separated.n_range", &self.separated.n_range, &mut bad);
        if g.totals.0.is_empty() || g.totals.0.iter().any(|&t| t < 2) {
            bad.push("geometry.totals must be a non-empty list of depths ≥ 2".into());
        }
        if g.grid_resolution == 0 || g.sample_count == 0 {
            bad.push("geometry.grid_resolution and geometry.sample_count must be positive".into());
        }
        if self.measure.period == 0 {
            bad.push("measure.period must be positive".into());
        }
        if self.bracket.n == 0 || self.bracket.samples == 0 || self.inclusions.samples == 0 {
            bad.push("bracket and inclusion sample counts and depths must be positive".into());
        }
        if self.inclusions.n == 0 || self.inclusions.m == 0 || g.sandwich_depth == 0 {
            bad.push("inclusion and sandwich depths must be positive".into());
        }
        if self.potentials.is_empty() {
            bad.push("at least one potential is required".into());
        }
        if !g.q.iter().chain(&self.inclusions.offset).all(|v| v.is_finite())
            || !self.overrides.pressure_offset.is_finite()
        {
            bad.push("coordinates and offsets must be finite".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(bad.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_sections_and_ranges() {
        let text = r#"
seed = 7
[map]
perturbation = 0.01
[[potentials]]
kind = "trigonometric"
terms = [{ freq = [1, 0], cos_coeff = 0.5 }]
[geometry]
n_range = "1..8"
m_range = [1, 2, 3]
[overrides]
P_offset = 0.1
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.geometry.n_range.0, (1..=8).collect::<Vec<_>>());
        assert_eq!(cfg.geometry.m_range.0, vec![1, 2, 3]);
        assert_eq!(cfg.potentials, vec![Potential::cosine(0.5)]);
        assert_eq!(cfg.overrides.pressure_offset, 0.1);
        assert!(!cfg.map.build().unwrap().is_linear());
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(RunConfig::from_toml_str("seed = \"x\"").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[geometry]\nr = -0.1").is_err());
        assert!(RunConfig::from_toml_str("[geometry]\nn_range = \"5..2\"").is_err());
        assert!(RunConfig::from_toml_str("potentials = []").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
