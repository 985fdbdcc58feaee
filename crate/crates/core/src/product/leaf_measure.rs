//! Restriction of a measure to a rectangle and its leaf projections
//! `μ^u = π^u_* μ|_R`, `μ^s = π^s_* μ|_R`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::gibbs::EmpiricalMeasure;
use crate::hyperbolic::{Interval, LeafSegment, Rectangle, Side};

/// Atoms of `μ` inside `R`, with their rectangle coordinates.
#[derive(Debug, Clone)]
pub struct RectangleMeasure {
    pub rect: Rectangle,
    /// Indices into the parent measure.
    pub atoms: Vec<u32>,
    pub tu: Vec<f64>,
    pub ts: Vec<f64>,
    pub weights: Vec<f64>,
    /// `μ(R)`.
    pub mass: f64,
    /// Atom count of the parent measure.
    pub parent_atoms: usize,
}

impl RectangleMeasure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass of `{z : t_u(z) ∈ a, t_s(z) ∈ b}` for open chart intervals.
    pub fn mass_of_box(&self, a: &Interval, b: &Interval) -> f64 {
        (0..self.len()).filter(|&i| a.contains(self.tu[i]) && b.contains(self.ts[i])).map(|i| self.weights[i]).sum()
    }
}

/// Atoms on a leaf segment, sorted by chart parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafMeasure {
    pub leaf: LeafSegment,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl LeafMeasure {
    pub fn new(leaf: LeafSegment, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(t, _)) = atoms.iter().find(|(t, _)| !leaf.range().contains(*t)) {
            return Err(Error::Invalid(format!("atom parameter {t} outside the leaf range")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (params, weights): (Vec<f64>, Vec<f64>) = atoms.into_iter().unzip();
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            prefix.push(acc);
        }
        Ok(Self { leaf, params, weights, total_mass: acc, prefix })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn first_at_least(&self, t: f64) -> usize {
        self.params.partition_point(|&p| p < t)
    }

    fn first_above(&self, t: f64) -> usize {
        self.params.partition_point(|&p| p <= t)
    }

    /// Mass of the open interval `(lo, hi)`.
    pub fn mass_open(&self, iv: &Interval) -> f64 {
        let (a, b) = (self.first_above(iv.lo), self.first_at_least(iv.hi));
        if b <= a {
            0.0
        } else {
            self.prefix[b] - self.prefix[a]
        }
    }

    /// Mass and atom count of the half-open interval `[lo, hi)`.
    pub fn mass_half_open(&self, lo: f64, hi: f64) -> (f64, usize) {
        let (a, b) = (self.first_at_least(lo), self.first_at_least(hi));
        if b <= a {
            (0.0, 0)
        } else {
            (self.prefix[b] - self.prefix[a], b - a)
        }
    }

    /// Kolmogorov–Smirnov distance of the normalized measure to the uniform
    /// distribution on the leaf range.
    pub fn ks_to_uniform(&self) -> f64 {
        let range = self.leaf.range();
        let mut ks: f64 = 0.0;
        for (i, &t) in self.params.iter().enumerate() {
            let u = (t - range.lo) / range.length();
            let before = self.prefix[i] / self.total_mass;
            let after = self.prefix[i + 1] / self.total_mass;
            ks = ks.max((u - before).abs()).max((after - u).abs());
        }
        ks
    }
}

/// `μ|_R` together with `μ^u` and `μ^s`.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub measure: RectangleMeasure,
    pub unstable: LeafMeasure,
    pub stable: LeafMeasure,
}

impl Restriction {
    pub fn leaf_measure(&self, side: Side) -> &LeafMeasure {
        match side {
            Side::Unstable => &self.unstable,
            Side::Stable => &self.stable,
        }
    }
}

/// Restricts `μ` to `R` and projects along the holonomies onto `V^u_q`
/// and `V^s_q`.
pub fn restrict_and_project(map: &HyperbolicMap, mu: &EmpiricalMeasure, rect: &Rectangle) -> Result<Restriction> {
    let candidates = mu.atoms_near(&rect.q(), rect.reach() * (1.0 + 1e-9) + 1e-12);
    let coords: Vec<Option<(u32, f64, f64)>> = candidates
        .par_iter()
        .map(|&a| Ok(rect.coordinates(map, &mu.points()[a as usize])?.map(|(tu, ts)| (a, tu, ts))))
        .collect::<Result<_>>()?;
    let mut inside: Vec<(u32, f64, f64)> = coords.into_iter().flatten().collect();
    inside.sort_by_key(|c| c.0);
    if inside.is_empty() {
        return Err(Error::EmptyRectangle);
    }
    let atoms: Vec<u32> = inside.iter().map(|c| c.0).collect();
    let tu: Vec<f64> = inside.iter().map(|c| c.1).collect();
    let ts: Vec<f64> = inside.iter().map(|c| c.2).collect();
    let weights: Vec<f64> = atoms.iter().map(|&a| mu.weights()[a as usize]).collect();
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::EmptyRectangle);
    }
    let unstable = LeafMeasure::new(*rect.vu(), tu.iter().copied().zip(weights.iter().copied()).collect())?;
    let stable = LeafMeasure::new(*rect.vs(), ts.iter().copied().zip(weights.iter().copied()).collect())?;
    Ok(Restriction {
        measure: RectangleMeasure { rect: *rect, atoms, tu, ts, weights, mass, parent_atoms: mu.len() },
        unstable,
        stable,
    })
}

/// Open sub-intervals `A^u ⊂ V^u_q`, `A^s ⊂ V^s_q` of the product set `[A^u, A^s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductQuery {
    pub au: Interval,
    #[serde(rename = "as")]
    pub as_: Interval,
}

impl ProductQuery {
    pub fn new(au: Interval, as_: Interval) -> Result<Self> {
        if !(au.length() > 0.0 && as_.length() > 0.0) {
            return Err(Error::Invalid("product query intervals must be nonempty".into()));
        }
        Ok(Self { au, as_ })
    }

    /// Checks the intervals against the leaf ranges.
    pub fn validate(&self, mu_u: &LeafMeasure, mu_s: &LeafMeasure) -> Result<()> {
        let inside = |iv: &Interval, range: Interval| iv.lo >= range.lo && iv.hi <= range.hi;
        if inside(&self.au, mu_u.leaf.range()) && inside(&self.as_, mu_s.leaf.range()) {
            Ok(())
        } else {
            Err(Error::Invalid("product query leaves the leaf ranges".into()))
        }
    }
}

/// `μ^u(A^u)·μ^s(A^s)/μ(R)`: each leaf measure carries mass `μ(R)`, so a
/// single division makes the product of the two full ranges equal `μ(R)`.
pub fn product_mass(mu_u: &LeafMeasure, mu_s: &LeafMeasure, query: &ProductQuery) -> f64 {
    if mu_u.total_mass == 0.0 {
        return 0.0;
    }
    mu_u.mass_open(&query.au) * mu_s.mass_open(&query.as_) / mu_u.total_mass
}
