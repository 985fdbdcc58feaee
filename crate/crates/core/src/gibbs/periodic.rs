//! Periodic points of hyperbolic toral maps.
//!
//! For a linear automorphism `A`, `Fix(A^n) = M^{-1}ℤ² / ℤ²` with
//! `M = Aⁿ − I`. Cosets of `ℤ² / Mℤ²` are enumerated from the Hermite normal
//! form of `M`, and the points are the exact rationals `M^{-1}k mod 1`.
//! Perturbed maps reuse these as seeds for Newton continuation.

use rayon::prelude::*;

use crate::dynamics::{HyperbolicMap, Perturbation};
use crate::error::{Error, Result};
use crate::linalg::{IntMat2, Mat2, Vec2};
use crate::torus::{wrap_centered, TorusPoint};

/// Largest point count enumerated (memory guard).
pub const MAX_POINTS: u64 = 60_000_000;
pub const RESIDUAL_TOL: f64 = 1e-9;

/// `Fix(f^period)` with the permutation induced by `f`.
#[derive(Debug, Clone)]
pub struct PeriodicSet {
    pub period: usize,
    pub points: Vec<TorusPoint>,
    /// `next[i]` is the index of `f(points[i])`.
    pub next: Vec<u32>,
    /// Largest one-step residual `|f(p_j) − p_{j+1}|` of the orbits.
    pub max_residual: f64,
}

impl PeriodicSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Each orbit as a list of indices, starting at its smallest index.
    pub fn cycles(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cyc.push(i as u32);
                i = self.next[i] as usize;
            }
            out.push(cyc);
        }
        out
    }
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    // returns (g, s, t) with s·a + t·b = g ≥ 0
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// Coset enumeration of `ℤ² / Mℤ²` via the lower-triangular basis
/// `(g, b), (0, c)` of `Mℤ²`.
#[derive(Debug, Clone, Copy)]
struct CosetLattice {
    m: [[i128; 2]; 2],
    det: i128,
    g: i128,
    b: i128,
    c: i128,
}

impl CosetLattice {
    fn new(m: [[i128; 2]; 2]) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0 {
            return Err(Error::Invalid("Aⁿ − I is singular".into()));
        }
        let (g, s, t) = ext_gcd(m[0][0], m[0][1]);
        let b = m[1][0] * s + m[1][1] * t;
        let c = (det / g).abs();
        Ok(Self { m, det, g, b: b.rem_euclid(c), c })
    }

    fn count(&self) -> u64 {
        (self.g * self.c) as u64
    }

    fn rep(&self, index: u64) -> [i128; 2] {
        let idx = index as i128;
        [idx / self.c, idx % self.c]
    }

    fn index_of(&self, k: [i128; 2]) -> u64 {
        let i = k[0].rem_euclid(self.g);
        let q = (k[0] - i) / self.g;
        let j = (k[1] - q * self.b).rem_euclid(self.c);
        (i * self.c + j) as u64
    }

    /// Numerators over `|det|` of `M^{-1}k mod 1`.
    fn numerators(&self, k: [i128; 2]) -> [i128; 2] {
        let m = self.m;
        let x = m[1][1] * k[0] - m[0][1] * k[1];
        let y = -m[1][0] * k[0] + m[0][0] * k[1];
        let d = self.det.abs();
        let sign = self.det.signum();
        [(sign * x).rem_euclid(d), (sign * y).rem_euclid(d)]
    }
}

fn int_matrix(m: IntMat2) -> [[i128; 2]; 2] {
    m.0.map(|row| row.map(|v| v as i128))
}

/// `|det(Aⁿ − I)|` in exact integer arithmetic.
pub fn fixed_point_count(matrix: IntMat2, n: usize) -> Result<u64> {
    let mut m = int_matrix(matrix.pow(n as u32));
    m[0][0] -= 1;
    m[1][1] -= 1;
    Ok(CosetLattice::new(m)?.count())
}

/// Exact enumeration of `Fix(Aⁿ)` for the linear part.
pub fn linear_periodic_points(matrix: IntMat2, n: usize) -> Result<PeriodicSet> {
    if n == 0 {
        return Err(Error::Invalid("period must be positive".into()));
    }
    let an = matrix.pow(n as u32);
    let mut m = int_matrix(an);
    m[0][0] -= 1;
    m[1][1] -= 1;
    let lattice = CosetLattice::new(m)?;
    let count = lattice.count();
    if count > MAX_POINTS {
        return Err(Error::Invalid(format!("{count} periodic points exceeds the enumeration limit")));
    }
    let d = lattice.det.abs() as f64;
    let a = int_matrix(matrix);
    let (points, next): (Vec<TorusPoint>, Vec<u32>) = (0..count)
        .into_par_iter()
        .map(|idx| {
            let k = lattice.rep(idx);
            let num = lattice.numerators(k);
            let p = TorusPoint::new(num[0] as f64 / d, num[1] as f64 / d);
            // f(M^{-1}k) = M^{-1}(Ak) since A commutes with M
            let ak = [a[0][0] * k[0] + a[0][1] * k[1], a[1][0] * k[0] + a[1][1] * k[1]];
            (p, lattice.index_of(ak) as u32)
        })
        .unzip();
    Ok(PeriodicSet { period: n, points, next, max_residual: 0.0 })
}

fn wrap(v: Vec2) -> Vec2 {
    Vec2::new(wrap_centered(v.x), wrap_centered(v.y))
}

/// Multiple-shooting Newton refinement of one orbit `p_0 → … → p_{ℓ−1} → p_0`.
/// Returns the refined lifts and the final one-step residual.
fn refine_orbit(map: &HyperbolicMap, orbit: &mut [Vec2], iterations: usize) -> Result<f64> {
    let len = orbit.len();
    let mut resid = f64::INFINITY;
    for _ in 0..iterations {
        // residuals R_j = f(p_j) − p_{j+1} (mod ℤ²) and derivatives
        let r: Vec<Vec2> = (0..len).map(|j| wrap(map.forward_lift(orbit[j]) - orbit[(j + 1) % len])).collect();
        resid = r.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
        if resid < 1e-15 {
            break;
        }
        let df: Vec<Mat2> = orbit.iter().map(|&p| map.jacobian(p)).collect();
        // d_{j+1} = Df_j d_j + R_j closes up: (I − J) d_0 = S
        let mut jac = Mat2::IDENTITY;
        let mut s = Vec2::ZERO;
        for j in 0..len {
            jac = df[j].mul(&jac);
            s = df[j].apply(s) + r[j];
        }
        let lhs = Mat2::new(1.0 - jac.a, -jac.b, -jac.c, 1.0 - jac.d);
        let d0 = lhs.solve(s).ok_or(Error::ContinuationFailure { index: 0, residual: resid })?;
        let mut d = d0;
        for j in 0..len {
            let here = orbit[j];
            orbit[j] = here + d;
            d = df[j].apply(d) + r[j];
        }
    }
    Ok(resid)
}

/// Orbit indices, refined points and the worst residual of one cycle.
type RefinedCycle = (Vec<u32>, Vec<TorusPoint>, f64);

/// Fixed points of `f^n` for a perturbed map: the linear points are
/// continued along `amplitude·t`, `t ∈ (0, 1]`, one orbit at a time.
pub fn perturbed_periodic_points(map: &HyperbolicMap, n: usize, stages: usize) -> Result<PeriodicSet> {
    let linear = linear_periodic_points(map.matrix(), n)?;
    let cycles = linear.cycles();
    let target = map.perturbation().clone();
    let stages = stages.max(1);
    let maps: Vec<HyperbolicMap> = (1..=stages)
        .map(|s| {
            let p =
                Perturbation { amplitude: target.amplitude * s as f64 / stages as f64, terms: target.terms.clone() };
            HyperbolicMap::new(map.matrix(), p)
        })
        .collect::<Result<_>>()?;
    let refined: Vec<Result<RefinedCycle>> = cycles
        .into_par_iter()
        .map(|cyc| {
            let mut orbit: Vec<Vec2> = cyc.iter().map(|&i| linear.points[i as usize].lift()).collect();
            let mut resid = 0.0;
            for m in &maps {
                resid = refine_orbit(m, &mut orbit, 8)?;
            }
            if !(resid <= RESIDUAL_TOL) {
                return Err(Error::ContinuationFailure { index: cyc[0] as usize, residual: resid });
            }
            Ok((cyc, orbit.into_iter().map(TorusPoint::from_lift).collect(), resid))
        })
        .collect();
    let mut points = vec![TorusPoint::ORIGIN; linear.len()];
    let mut max_residual: f64 = 0.0;
    for item in refined {
        let (cyc, pts, resid) = item?;
        for (i, p) in cyc.into_iter().zip(pts) {
            points[i as usize] = p;
        }
        max_residual = max_residual.max(resid);
    }
    check_distinct(&points)?;
    Ok(PeriodicSet { period: n, points, next: linear.next, max_residual })
}

/// Fails if two points coincide to within `1e-9`.
fn check_distinct(points: &[TorusPoint]) -> Result<()> {
    let mut order: Vec<u32> = (0..points.len() as u32).collect();
    order.par_sort_unstable_by(|&a, &b| {
        let (p, q) = (points[a as usize], points[b as usize]);
        p.x1().total_cmp(&q.x1()).then(p.x2().total_cmp(&q.x2()))
    });
    for w in order.windows(2) {
        let (p, q) = (points[w[0] as usize], points[w[1] as usize]);
        if (p.x1() - q.x1()).abs() < 1e-9 && (p.x2() - q.x2()).abs() < 1e-9 {
            return Err(Error::ContinuationFailure { index: w[1] as usize, residual: 0.0 });
        }
    }
    Ok(())
}

/// All fixed points of `f^n`, with the successor permutation.
pub fn periodic_points(map: &HyperbolicMap, n: usize) -> Result<PeriodicSet> {
    if map.is_linear() {
        linear_periodic_points(map.matrix(), n)
    } else {
        perturbed_periodic_points(map, n, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::torus_distance;

    fn lucas(k: usize) -> i128 {
        let (mut a, mut b) = (2i128, 1i128);
        for _ in 0..k {
            (a, b) = (b, a + b);
        }
        a
    }

    #[test]
    fn cat_map_counts() {
        let cat = IntMat2([[2, 1], [1, 1]]);
        for n in 1..=14 {
            let expected = lucas(2 * n) - 2;
            assert_eq!(fixed_point_count(cat, n).unwrap() as i128, expected, "n={n}");
        }
        assert_eq!(linear_periodic_points(cat, 1).unwrap().points, vec![TorusPoint::ORIGIN]);
        assert_eq!(linear_periodic_points(cat, 2).unwrap().len(), 5);
        assert_eq!(linear_periodic_points(cat, 3).unwrap().len(), 16);
    }

    #[test]
    fn enumerated_points_are_periodic_and_distinct() {
        let map = HyperbolicMap::cat();
        let set = periodic_points(&map, 6).unwrap();
        assert_eq!(set.len() as u64, fixed_point_count(map.matrix(), 6).unwrap());
        check_distinct(&set.points).unwrap();
        for (i, p) in set.points.iter().enumerate() {
            assert!(torus_distance(&map.apply(p, 6).unwrap(), p) < 1e-12);
            assert!(torus_distance(&map.forward(p), &set.points[set.next[i] as usize]) < 1e-14);
        }
        // orbit lengths divide the period
        assert!(set.cycles().iter().all(|c| 6 % c.len() == 0));
    }

    #[test]
    fn other_hyperbolic_matrices() {
        for m in [IntMat2([[3, 1], [2, 1]]), IntMat2([[1, 1], [1, 0]]), IntMat2([[0, 1], [1, 3]])] {
            let map = HyperbolicMap::new(m, Perturbation::none()).unwrap();
            for n in 1..=5 {
                let set = periodic_points(&map, n).unwrap();
                let mut a = int_matrix(m.pow(n as u32));
                a[0][0] -= 1;
                a[1][1] -= 1;
                let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).unsigned_abs();
                assert_eq!(set.len() as u128, det);
                check_distinct(&set.points).unwrap();
                for (i, p) in set.points.iter().enumerate() {
                    assert!(torus_distance(&map.forward(p), &set.points[set.next[i] as usize]) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbed_points_by_continuation() {
        let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let set = periodic_points(&map, 7).unwrap();
        assert_eq!(set.len(), (lucas(14) - 2) as usize);
        assert!(set.max_residual <= 1e-13);
        for (i, p) in set.points.iter().enumerate() {
            assert!(torus_distance(&map.forward(p), &set.points[set.next[i] as usize]) < 1e-12);
        }
        // the origin stays fixed since g(0) = 0
        assert!(set.points.iter().any(|p| p.approx_eq(&TorusPoint::ORIGIN, 1e-15)));
    }
}
