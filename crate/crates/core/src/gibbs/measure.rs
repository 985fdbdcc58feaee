//! Periodic-orbit approximation of the Gibbs measure: atoms on `Fix(f^n)`
//! with weights proportional to `exp(S_nφ(p))`.

use std::io::Write;

use rayon::prelude::*;

use super::periodic::{periodic_points, PeriodicSet};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::torus::{torus_distance, TorusPoint};

/// Uniform bucket grid over the torus.
#[derive(Debug, Clone)]
struct SpatialIndex {
    grid: usize,
    start: Vec<u32>,
    items: Vec<u32>,
}

impl SpatialIndex {
    fn cell(grid: usize, t: f64) -> usize {
        ((t * grid as f64) as usize).min(grid - 1)
    }

    fn build(points: &[TorusPoint]) -> Self {
        let grid = ((points.len() as f64 / 4.0).sqrt() as usize).clamp(1, 2048);
        let key = |p: &TorusPoint| Self::cell(grid, p.x1()) * grid + Self::cell(grid, p.x2());
        let mut start = vec![0u32; grid * grid + 1];
        for p in points {
            start[key(p) + 1] += 1;
        }
        for i in 0..grid * grid {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        Self { grid, start, items }
    }

    /// Bucket indices along one axis covering `[c − r, c + r]`, each once.
    fn span(&self, c: f64, r: f64) -> Vec<usize> {
        let g = self.grid as i64;
        let lo = ((c - r) * g as f64).floor() as i64;
        let hi = ((c + r) * g as f64).floor() as i64;
        if hi - lo + 1 >= g {
            return (0..self.grid).collect();
        }
        (lo..=hi).map(|i| i.rem_euclid(g) as usize).collect()
    }

    /// Calls `visit` on every atom whose bucket meets the disc.
    fn for_each_near(&self, center: &TorusPoint, radius: f64, mut visit: impl FnMut(u32)) {
        let cols = self.span(center.x1(), radius);
        let rows = self.span(center.x2(), radius);
        for &i in &cols {
            for &j in &rows {
                let b = i * self.grid + j;
                for &a in &self.items[self.start[b] as usize..self.start[b + 1] as usize] {
                    visit(a);
                }
            }
        }
    }
}

/// Weighted atoms on the fixed points of `f^period`.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    period: usize,
    points: Vec<TorusPoint>,
    weights: Vec<f64>,
    next: Vec<u32>,
    log_partition: f64,
    max_residual: f64,
    index: SpatialIndex,
}

/// `S_nφ` at every point of `set`, computed once per orbit.
fn orbit_sums(set: &PeriodicSet, phi: &Potential) -> Vec<f64> {
    let n = set.period;
    let cycles = set.cycles();
    let per: Vec<(Vec<u32>, f64)> = cycles
        .into_par_iter()
        .map(|cyc| {
            let s: f64 = cyc.iter().map(|&i| phi.eval(&set.points[i as usize])).sum();
            let reps = (n / cyc.len()) as f64;
            (cyc, s * reps)
        })
        .collect();
    let mut sums = vec![0.0; set.len()];
    for (cyc, s) in per {
        for i in cyc {
            sums[i as usize] = s;
        }
    }
    sums
}

/// Fixed chunking keeps parallel float sums independent of the thread count.
const SUM_CHUNK: usize = 1 << 15;

fn chunked_sum(values: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = values.par_chunks(SUM_CHUNK).map(|c| c.iter().map(|&v| f(v)).sum::<f64>()).collect();
    partial.iter().sum()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s = chunked_sum(values, |v| (v - max).exp());
    max + s.ln()
}

/// `P_n = (1/n) log Σ_{p ∈ Fix(f^n)} exp(S_nφ(p))`.
pub fn pressure_estimate(map: &HyperbolicMap, phi: &Potential, n: usize) -> Result<f64> {
    let set = periodic_points(map, n)?;
    Ok(log_sum_exp(&orbit_sums(&set, phi)) / n as f64)
}

/// Periodic-orbit measure at period `n`.
pub fn gibbs_measure(map: &HyperbolicMap, phi: &Potential, n: usize) -> Result<EmpiricalMeasure> {
    let set = periodic_points(map, n)?;
    EmpiricalMeasure::from_periodic(set, phi)
}

impl EmpiricalMeasure {
    pub fn from_periodic(set: PeriodicSet, phi: &Potential) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Invalid("no periodic points".into()));
        }
        let sums = orbit_sums(&set, phi);
        let log_partition = log_sum_exp(&sums);
        let weights: Vec<f64> = sums.par_iter().map(|s| (s - log_partition).exp()).collect();
        let index = SpatialIndex::build(&set.points);
        Ok(Self {
            period: set.period,
            points: set.points,
            weights,
            next: set.next,
            log_partition,
            max_residual: set.max_residual,
            index,
        })
    }

    /// Measure on arbitrary atoms, normalized to mass 1. Carries no orbit
    /// data, so ball masses and invariance are unavailable.
    pub fn from_atoms(points: Vec<TorusPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Invalid("atoms need matching positive weights".into()));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        let index = SpatialIndex::build(&points);
        Ok(Self { period: 0, points, weights, next: Vec::new(), log_partition: 0.0, max_residual: 0.0, index })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the image of each atom.
    pub fn next(&self) -> &[u32] {
        &self.next
    }

    /// `P_n` at the construction period.
    pub fn pressure(&self) -> f64 {
        if self.period == 0 {
            return f64::NAN;
        }
        self.log_partition / self.period as f64
    }

    pub fn continuation_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn total_mass(&self) -> f64 {
        chunked_sum(&self.weights, |w| w)
    }

    /// Largest of `|w(f p) − w(p)|` and `d(f(p), atom(next p))` over atoms.
    pub fn invariance_defect(&self, map: &HyperbolicMap) -> f64 {
        if self.next.is_empty() {
            return f64::NAN;
        }
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let j = self.next[i] as usize;
                let dw = (self.weights[j] - self.weights[i]).abs();
                let dp = torus_distance(&map.forward(&self.points[i]), &self.points[j]);
                dw.max(dp)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Total weight of the atoms satisfying `region`.
    pub fn measure_of(&self, region: impl Fn(&TorusPoint) -> bool + Sync) -> f64 {
        let partial: Vec<f64> = self
            .points
            .par_chunks(SUM_CHUNK)
            .zip(self.weights.par_chunks(SUM_CHUNK))
            .map(|(ps, ws)| ps.iter().zip(ws).filter(|(p, _)| region(p)).map(|(_, w)| *w).sum::<f64>())
            .collect();
        partial.iter().sum()
    }

    /// Atoms within `radius` of `center`.
    pub fn atoms_near(&self, center: &TorusPoint, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.index.for_each_near(center, radius, |a| {
            if torus_distance(&self.points[a as usize], center) < radius {
                out.push(a);
            }
        });
        out
    }

    /// Mass and atom count of `region`, which must lie inside the disc of
    /// the given radius about `center`.
    pub fn measure_near(&self, center: &TorusPoint, radius: f64, region: impl Fn(&TorusPoint) -> bool) -> (f64, usize) {
        let mut mass = 0.0;
        let mut count = 0;
        for a in self.atoms_near(center, radius) {
            if region(&self.points[a as usize]) {
                mass += self.weights[a as usize];
                count += 1;
            }
        }
        (mass, count)
    }

    /// `μ(B_n(x, r))` for `n = 1..=n_max`, where `B_n` is the forward Bowen
    /// ball over times `0 ≤ k < n`. Atom orbits follow the stored
    /// permutation, so only the center orbit is iterated.
    pub fn forward_ball_masses(
        &self,
        map: &HyperbolicMap,
        center: &TorusPoint,
        r: f64,
        n_max: usize,
    ) -> Result<Vec<f64>> {
        if self.next.is_empty() {
            return Err(Error::Invalid("measure has no orbit data".into()));
        }
        let orbit = map.orbit(center, n_max, false)?;
        let mut by_depth = vec![0.0; n_max + 1];
        for a in self.atoms_near(center, r) {
            let mut i = a as usize;
            let mut depth = 1;
            while depth < n_max {
                i = self.next[i] as usize;
                if torus_distance(&self.points[i], &orbit[depth]) >= r {
                    break;
                }
                depth += 1;
            }
            by_depth[depth] += self.weights[a as usize];
        }
        let mut out = vec![0.0; n_max];
        let mut acc = 0.0;
        for n in (1..=n_max).rev() {
            acc += by_depth[n];
            out[n - 1] = acc;
        }
        Ok(out)
    }

    /// CSV with header `x1,x2,weight`, 18 significant digits, CRLF records.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        let io = |e: csv::Error| Error::Invalid(format!("csv export: {e}"));
        w.write_record(["x1", "x2", "weight"]).map_err(io)?;
        for (p, wt) in self.points.iter().zip(&self.weights) {
            w.write_record([format!("{:.17e}", p.x1()), format!("{:.17e}", p.x2()), format!("{wt:.17e}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv export: {e}")))?;
        Ok(())
    }
}
