//! Potentials `φ: 𝕋² → ℝ` and their Birkhoff sums.

use serde::{Deserialize, Serialize};

use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::torus::{reduce_unit, TorusPoint};

const TWO_PI: f64 = std::f64::consts::TAU;
const SUP_GRID: usize = 512;

/// `cos_coeff · cos(2π⟨freq, x⟩) + sin_coeff · sin(2π⟨freq, x⟩)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: [i64; 2],
    #[serde(default)]
    pub cos_coeff: f64,
    #[serde(default)]
    pub sin_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    Constant {
        value: f64,
    },
    Trigonometric {
        terms: Vec<TrigTerm>,
    },
    /// Periodic bilinear interpolation of `values` on a `size × size` grid,
    /// row-major with `values[i * size + j]` at `(i/size, j/size)`.
    GridInterpolated {
        size: usize,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialKind", into = "PotentialKind")]
pub struct Potential {
    kind: PotentialKind,
    sup_norm: f64,
}

impl TryFrom<PotentialKind> for Potential {
    type Error = Error;
    fn try_from(kind: PotentialKind) -> Result<Self> {
        Potential::new(kind)
    }
}

impl From<Potential> for PotentialKind {
    fn from(p: Potential) -> Self {
        p.kind
    }
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        if let PotentialKind::GridInterpolated { size, values } = &kind {
            if *size == 0 || values.len() != size * size {
                return Err(Error::Invalid(format!("grid potential needs {size}×{size} values, got {}", values.len())));
            }
        }
        if let PotentialKind::Trigonometric { terms } = &kind {
            if terms.iter().any(|t| !t.cos_coeff.is_finite() || !t.sin_coeff.is_finite()) {
                return Err(Error::Invalid("non-finite trigonometric coefficient".into()));
            }
        }
        let mut p = Self { kind, sup_norm: 0.0 };
        p.sup_norm = match &p.kind {
            PotentialKind::Constant { value } => value.abs(),
            // bilinear interpolation attains its extrema at the nodes
            PotentialKind::GridInterpolated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            PotentialKind::Trigonometric { .. } => p.grid_sup(),
        };
        Ok(p)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PotentialKind::Constant { value }).expect("constant potential")
    }

    /// `amplitude · cos(2π x₁)`.
    pub fn cosine(amplitude: f64) -> Self {
        Self::new(PotentialKind::Trigonometric {
            terms: vec![TrigTerm { freq: [1, 0], cos_coeff: amplitude, sin_coeff: 0.0 }],
        })
        .expect("cosine potential")
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, PotentialKind::Constant { .. })
    }

    /// `‖φ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    fn grid_sup(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..SUP_GRID {
            for j in 0..SUP_GRID {
                let p = TorusPoint::new(i as f64 / SUP_GRID as f64, j as f64 / SUP_GRID as f64);
                best = best.max(self.eval(&p).abs());
            }
        }
        best
    }

    /// Lipschitz constant for the flat metric.
    pub fn lipschitz(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant { .. } => 0.0,
            PotentialKind::Trigonometric { terms } => terms
                .iter()
                .map(|t| TWO_PI * (t.freq[0] as f64).hypot(t.freq[1] as f64) * t.cos_coeff.hypot(t.sin_coeff))
                .sum(),
            PotentialKind::GridInterpolated { size, values } => {
                let n = *size;
                let mut slope: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let v = values[i * n + j];
                        let right = values[((i + 1) % n) * n + j];
                        let up = values[i * n + (j + 1) % n];
                        slope = slope.max((right - v).abs()).max((up - v).abs());
                    }
                }
                slope * n as f64 * std::f64::consts::SQRT_2
            }
        }
    }

    pub fn eval(&self, p: &TorusPoint) -> f64 {
        match &self.kind {
            PotentialKind::Constant { value } => *value,
            PotentialKind::Trigonometric { terms } => terms
                .iter()
                .map(|t| {
                    let arg = TWO_PI * (t.freq[0] as f64 * p.x1() + t.freq[1] as f64 * p.x2());
                    let (s, c) = arg.sin_cos();
                    t.cos_coeff * c + t.sin_coeff * s
                })
                .sum(),
            PotentialKind::GridInterpolated { size, values } => {
                let n = *size;
                let (gx, gy) = (p.x1() * n as f64, p.x2() * n as f64);
                let (i0, j0) = (gx.floor() as usize % n, gy.floor() as usize % n);
                let (fx, fy) = (gx - gx.floor(), gy - gy.floor());
                let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
                let v = |i: usize, j: usize| values[i * n + j];
                (1.0 - fx) * ((1.0 - fy) * v(i0, j0) + fy * v(i0, j1)) + fx * ((1.0 - fy) * v(i1, j0) + fy * v(i1, j1))
            }
        }
    }

    pub fn eval_lift(&self, v: Vec2) -> f64 {
        self.eval(&TorusPoint::new(reduce_unit(v.x), reduce_unit(v.y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// `S_nφ(p) = Σ_{k<n} φ(f^k p)` or, backward, `S_n^-φ(p) = Σ_{k<n} φ(f^{-k} p)`.
/// Backward sums iterate `f⁻¹` directly.
pub fn birkhoff_sum(
    map: &HyperbolicMap,
    phi: &Potential,
    p: &TorusPoint,
    n: usize,
    direction: Direction,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("Birkhoff sum needs n >= 1".into()));
    }
    if let PotentialKind::Constant { value } = phi.kind() {
        return Ok(*value * n as f64);
    }
    let mut q = *p;
    let mut sum = 0.0;
    for k in 0..n {
        if k > 0 {
            q = match direction {
                Direction::Forward => map.forward(&q),
                Direction::Backward => map.backward(&q)?,
            };
        }
        sum += phi.eval(&q);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_sums() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::constant(0.7);
        let p = TorusPoint::new(0.2, 0.9);
        for d in [Direction::Forward, Direction::Backward] {
            assert_eq!(birkhoff_sum(&cat, &phi, &p, 9, d).unwrap(), 0.7 * 9.0);
        }
        assert!(birkhoff_sum(&cat, &phi, &p, 0, Direction::Forward).is_err());
    }

    #[test]
    fn single_term_sum_is_the_value() {
        let cat = HyperbolicMap::cat();
        let phi = Potential::cosine(0.5);
        let p = TorusPoint::new(0.125, 0.3);
        let s = birkhoff_sum(&cat, &phi, &p, 1, Direction::Backward).unwrap();
        assert_eq!(s, phi.eval(&p));
        assert!((phi.eval(&p) - 0.5 * (std::f64::consts::TAU * 0.125).cos()).abs() < 1e-15);
    }

    #[test]
    fn sup_norms() {
        assert!((Potential::cosine(0.5).sup_norm() - 0.5).abs() < 1e-6);
        let values: Vec<f64> = (0..256).map(|k| ((k * 37) % 17) as f64 / 17.0 - 0.4).collect();
        let grid = Potential::new(PotentialKind::GridInterpolated { size: 16, values }).unwrap();
        // 16 divides 512, so the sampling grid contains every node
        let mut sampled: f64 = 0.0;
        for i in 0..512 {
            for j in 0..512 {
                sampled = sampled.max(grid.eval(&TorusPoint::new(i as f64 / 512.0, j as f64 / 512.0)).abs());
            }
        }
        assert!((grid.sup_norm() - sampled).abs() < 1e-6);
    }

    #[test]
    fn grid_potential_is_continuous_across_the_seam() {
        let values: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let grid = Potential::new(PotentialKind::GridInterpolated { size: 3, values }).unwrap();
        let a = grid.eval(&TorusPoint::new(1.0 - 1e-12, 0.5));
        let b = grid.eval(&TorusPoint::new(0.0, 0.5));
        assert!((a - b).abs() < 1e-9);
        assert!(Potential::new(PotentialKind::GridInterpolated { size: 3, values: vec![0.0; 8] }).is_err());
    }

    #[test]
    fn potential_config_round_trip() {
        let phi = Potential::cosine(0.5);
        let text = serde_json::to_string(&phi).unwrap();
        let back: Potential = serde_json::from_str(&text).unwrap();
        assert_eq!(back, phi);
    }

    proptest! {
        /// Direct summation oracle for the cocycle identity.
        #[test]
        fn cocycle_identity(a in 0.0..1.0f64, b in 0.0..1.0f64, n in 1usize..12, m in 1usize..12) {
            let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
            let phi = Potential::cosine(0.5);
            let p = TorusPoint::new(a, b);
            let orbit = map.orbit(&p, n + m, false).unwrap();
            let direct: f64 = orbit.iter().map(|q| phi.eval(q)).sum();
            let s_total = birkhoff_sum(&map, &phi, &p, n + m, Direction::Forward).unwrap();
            let split = birkhoff_sum(&map, &phi, &p, n, Direction::Forward).unwrap()
                + birkhoff_sum(&map, &phi, &orbit[n], m, Direction::Forward).unwrap();
            prop_assert!((s_total - direct).abs() < 1e-10);
            prop_assert!((s_total - split).abs() < 1e-10);
        }
    }
}
