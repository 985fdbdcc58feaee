//! Hyperbolic toral automorphisms with an optional smooth periodic
//! perturbation `f(p) = A·p + ε·g(p) mod 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{IntMat2, Mat2, Vec2};
use crate::torus::{reduce_unit, TorusPoint};

const TWO_PI: f64 = std::f64::consts::TAU;
const INVERSE_MAX_ITER: usize = 50;
/// Opening of the eigen-coordinate cones used by the hyperbolicity check.
const CONE_SLOPE: f64 = 0.5;
const CONE_GRID: usize = 96;

/// One term `coeff · sin(2π ⟨freq, p⟩ + phase)` of the displacement `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerm {
    pub freq: [i64; 2],
    pub coeff: [f64; 2],
    #[serde(default)]
    pub phase: f64,
}

/// `ε · g(p)` with `g` a ℤ²-periodic trigonometric polynomial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    #[serde(default)]
    pub terms: Vec<PerturbationTerm>,
}

impl Perturbation {
    pub fn none() -> Self {
        Self::default()
    }

    /// `g(p) = (sin 2πx₁, sin 2πx₁)` scaled by `amplitude`.
    pub fn standard(amplitude: f64) -> Self {
        Self { amplitude, terms: vec![PerturbationTerm { freq: [1, 0], coeff: [1.0, 1.0], phase: 0.0 }] }
    }

    pub fn is_trivial(&self) -> bool {
        self.amplitude == 0.0 || self.terms.iter().all(|t| t.coeff == [0.0, 0.0])
    }

    /// `ε g(p)`.
    pub fn displacement(&self, p: Vec2) -> Vec2 {
        let mut out = Vec2::ZERO;
        for t in &self.terms {
            let arg = TWO_PI * (t.freq[0] as f64 * p.x + t.freq[1] as f64 * p.y) + t.phase;
            let s = arg.sin();
            out += Vec2::new(t.coeff[0] * s, t.coeff[1] * s);
        }
        out * self.amplitude
    }

    /// `ε Dg(p)`.
    pub fn jacobian(&self, p: Vec2) -> Mat2 {
        let mut m = Mat2::new(0.0, 0.0, 0.0, 0.0);
        for t in &self.terms {
            let arg = TWO_PI * (t.freq[0] as f64 * p.x + t.freq[1] as f64 * p.y) + t.phase;
            let c = TWO_PI * arg.cos();
            let (k1, k2) = (t.freq[0] as f64 * c, t.freq[1] as f64 * c);
            m.a += t.coeff[0] * k1;
            m.b += t.coeff[0] * k2;
            m.c += t.coeff[1] * k1;
            m.d += t.coeff[1] * k2;
        }
        Mat2::new(m.a * self.amplitude, m.b * self.amplitude, m.c * self.amplitude, m.d * self.amplitude)
    }

    /// Upper bound on `sup |ε Dg|` (operator norm).
    pub fn jacobian_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = (t.freq[0] as f64).hypot(t.freq[1] as f64);
                TWO_PI * k * t.coeff[0].hypot(t.coeff[1])
            })
            .sum::<f64>()
            * self.amplitude.abs()
    }
}

/// Eigen-decomposition of the linear part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    /// Expanding eigenvalue (signed), `|lambda_u| > 1`.
    pub lambda_u: f64,
    /// Contracting eigenvalue (signed), `|lambda_s| < 1`.
    pub lambda_s: f64,
    pub e_u: Vec2,
    pub e_s: Vec2,
    /// Dual basis rows: `dual_u · e_u = 1`, `dual_u · e_s = 0`.
    pub dual_u: Vec2,
    pub dual_s: Vec2,
}

impl Eigen {
    /// Eigen-coordinates `(u, s)` of a displacement.
    pub fn coords(&self, v: Vec2) -> (f64, f64) {
        (self.dual_u.dot(v), self.dual_s.dot(v))
    }

    pub fn from_coords(&self, u: f64, s: f64) -> Vec2 {
        self.e_u * u + self.e_s * s
    }

    /// `|cos|` of the angle between the two eigendirections.
    pub fn cos_angle(&self) -> f64 {
        self.e_u.dot(self.e_s).abs()
    }

    /// Norm of the oblique projection onto either eigenline.
    pub fn projection_norm(&self) -> f64 {
        1.0 / self.e_u.cross(self.e_s).abs()
    }
}

fn eigenvector(m: &Mat2, lambda: f64) -> Vec2 {
    let v1 = Vec2::new(m.b, lambda - m.a);
    let v2 = Vec2::new(lambda - m.d, m.c);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    let v = v.normalized();
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

/// The diffeomorphism `f`, its inverse and derivative.
#[derive(Debug, Clone)]
pub struct HyperbolicMap {
    matrix: IntMat2,
    inverse: IntMat2,
    real: Mat2,
    real_inverse: Mat2,
    perturbation: Perturbation,
    eigen: Eigen,
    df_norm: f64,
    fixed_forward: [[u64; 2]; 2],
    fixed_inverse: [[u64; 2]; 2],
}

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Coordinates as numerators over 2⁶⁴; reduction mod 1 is wrapping.
fn to_fixed(x: f64) -> u64 {
    (x * TWO_POW_64) as u64
}

fn from_fixed(n: u64) -> f64 {
    reduce_unit(n as f64 / TWO_POW_64)
}

fn wrapping_entries(m: &IntMat2) -> [[u64; 2]; 2] {
    m.0.map(|row| row.map(|v| v as u64))
}

fn wrapping_mul(m: &[[u64; 2]; 2], n: &[[u64; 2]; 2]) -> [[u64; 2]; 2] {
    let e = |i: usize, j: usize| m[i][0].wrapping_mul(n[0][j]).wrapping_add(m[i][1].wrapping_mul(n[1][j]));
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn wrapping_pow(m: &[[u64; 2]; 2], k: u32) -> [[u64; 2]; 2] {
    let mut acc = [[1, 0], [0, 1]];
    let mut base = *m;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            acc = wrapping_mul(&acc, &base);
        }
        base = wrapping_mul(&base, &base);
        e >>= 1;
    }
    acc
}

impl HyperbolicMap {
    /// Validates hyperbolicity (`|det| = 1`, `|trace| > 2`) and, for a
    /// perturbed map, the cone-field check.
    pub fn new(matrix: IntMat2, perturbation: Perturbation) -> Result<Self> {
        let det = matrix.det();
        if det.abs() != 1 {
            return Err(Error::Invalid(format!("matrix determinant {det} is not ±1")));
        }
        let tr = matrix.trace() as f64;
        let disc = tr * tr - 4.0 * det as f64;
        if disc <= 0.0 || tr.abs() <= 2.0 && det == 1 {
            return Err(Error::NotUniformlyHyperbolic(format!(
                "linear part has an eigenvalue on the unit circle (trace {tr}, det {det})"
            )));
        }
        let root = disc.sqrt();
        let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
        let (lambda_u, lambda_s) = if l1.abs() > l2.abs() { (l1, l2) } else { (l2, l1) };
        if lambda_u.abs() <= 1.0 || lambda_s.abs() >= 1.0 {
            return Err(Error::NotUniformlyHyperbolic("no expanding eigenvalue".into()));
        }
        let real = matrix.to_real();
        let e_u = eigenvector(&real, lambda_u);
        let e_s = eigenvector(&real, lambda_s);
        let basis_inv = Mat2::from_columns(e_u, e_s).inverse().expect("eigenvectors are independent");
        let eigen = Eigen {
            lambda_u,
            lambda_s,
            e_u,
            e_s,
            dual_u: Vec2::new(basis_inv.a, basis_inv.b),
            dual_s: Vec2::new(basis_inv.c, basis_inv.d),
        };
        let inverse = matrix.unimodular_inverse().expect("unimodular");
        let mut map = Self {
            matrix,
            inverse,
            real,
            real_inverse: inverse.to_real(),
            perturbation,
            eigen,
            df_norm: real.operator_norm(),
            fixed_forward: wrapping_entries(&matrix),
            fixed_inverse: wrapping_entries(&inverse),
        };
        if !map.is_linear() {
            map.check_cones()?;
            map.df_norm = map.sup_jacobian_norm();
        }
        Ok(map)
    }

    /// Arnold's cat map `[[2,1],[1,1]]`.
    pub fn cat() -> Self {
        Self::new(IntMat2([[2, 1], [1, 1]]), Perturbation::none()).expect("cat map is hyperbolic")
    }

    /// The cat map with the standard perturbation of the given amplitude.
    pub fn perturbed_cat(amplitude: f64) -> Result<Self> {
        Self::new(IntMat2([[2, 1], [1, 1]]), Perturbation::standard(amplitude))
    }

    pub fn matrix(&self) -> IntMat2 {
        self.matrix
    }

    pub fn inverse_matrix(&self) -> IntMat2 {
        self.inverse
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eigen
    }

    pub fn is_linear(&self) -> bool {
        self.perturbation.is_trivial()
    }

    /// `sup_p ‖Df_p‖`, exact for the linear part, sampled on a grid otherwise.
    pub fn df_norm(&self) -> f64 {
        self.df_norm
    }

    pub fn forward_lift(&self, p: Vec2) -> Vec2 {
        let lin = self.real.apply(p);
        if self.is_linear() {
            lin
        } else {
            lin + self.perturbation.displacement(p)
        }
    }

    pub fn jacobian(&self, p: Vec2) -> Mat2 {
        if self.is_linear() {
            self.real
        } else {
            let e = self.perturbation.jacobian(p);
            Mat2::new(self.real.a + e.a, self.real.b + e.b, self.real.c + e.c, self.real.d + e.d)
        }
    }

    /// Solves `A d + ε(g(w + d) − g(w)) = rhs` for `d` by Newton iteration.
    fn solve_increment(&self, w: Vec2, rhs: Vec2) -> Result<Vec2> {
        let mut d = self.real_inverse.apply(rhs);
        let gw = self.perturbation.displacement(w);
        let scale = 1e-15 * (1.0 + rhs.norm());
        for _ in 0..INVERSE_MAX_ITER {
            let resid = self.real.apply(d) + (self.perturbation.displacement(w + d) - gw) - rhs;
            let jac = self.jacobian(w + d);
            let step = jac.solve(resid).ok_or(Error::InverseDivergence { x1: w.x, x2: w.y })?;
            d = d - step;
            if !step.x.is_finite() || !step.y.is_finite() {
                break;
            }
            if step.max_abs() <= scale {
                return Ok(d);
            }
        }
        let q = w + d;
        Err(Error::InverseDivergence { x1: q.x, x2: q.y })
    }

    /// A preimage of the lifted point `p` under the lifted map.
    pub fn inverse_lift(&self, p: Vec2) -> Result<Vec2> {
        if self.is_linear() {
            return Ok(self.real_inverse.apply(p));
        }
        let d = self.solve_increment(Vec2::ZERO, p - self.perturbation.displacement(Vec2::ZERO))?;
        Ok(d)
    }

    /// Applies an integer matrix (given mod 2⁶⁴) in fixed point. Exact for
    /// points on the 2⁻⁵³ grid, which the result stays on.
    fn apply_fixed(m: &[[u64; 2]; 2], p: &TorusPoint) -> TorusPoint {
        let (a, b) = (to_fixed(p.x1()), to_fixed(p.x2()));
        let x = m[0][0].wrapping_mul(a).wrapping_add(m[0][1].wrapping_mul(b));
        let y = m[1][0].wrapping_mul(a).wrapping_add(m[1][1].wrapping_mul(b));
        TorusPoint::new(from_fixed(x), from_fixed(y))
    }

    pub fn forward(&self, p: &TorusPoint) -> TorusPoint {
        if self.is_linear() {
            Self::apply_fixed(&self.fixed_forward, p)
        } else {
            TorusPoint::from_lift(self.forward_lift(p.lift()))
        }
    }

    pub fn backward(&self, p: &TorusPoint) -> Result<TorusPoint> {
        if self.is_linear() {
            Ok(Self::apply_fixed(&self.fixed_inverse, p))
        } else {
            Ok(TorusPoint::from_lift(self.inverse_lift(p.lift())?))
        }
    }

    /// `f^power(p)`, reduced mod 1. Linear maps use a single fixed-point
    /// application of the integer matrix power.
    pub fn apply(&self, p: &TorusPoint, power: i32) -> Result<TorusPoint> {
        if power == 0 {
            return Ok(*p);
        }
        if self.is_linear() {
            let m = if power >= 0 { &self.fixed_forward } else { &self.fixed_inverse };
            return Ok(Self::apply_fixed(&wrapping_pow(m, power.unsigned_abs()), p));
        }
        let mut q = *p;
        if power >= 0 {
            for _ in 0..power {
                q = self.forward(&q);
            }
        } else {
            for _ in 0..(-power) {
                q = self.backward(&q)?;
            }
        }
        Ok(q)
    }

    /// Orbit `p, f p, …, f^{len-1} p` (or the backward orbit).
    pub fn orbit(&self, p: &TorusPoint, len: usize, backward: bool) -> Result<Vec<TorusPoint>> {
        let mut out = Vec::with_capacity(len);
        let mut q = *p;
        for k in 0..len {
            if k > 0 {
                q = if backward { self.backward(&q)? } else { self.forward(&q) };
            }
            out.push(q);
        }
        Ok(out)
    }

    /// `f(base + offset) − f(base)` on the lift.
    pub(crate) fn offset_forward(&self, base: Vec2, offset: Vec2) -> Vec2 {
        if self.is_linear() {
            self.real.apply(offset)
        } else {
            self.real.apply(offset)
                + (self.perturbation.displacement(base + offset) - self.perturbation.displacement(base))
        }
    }

    /// The `d` with `f(pre + d) − f(pre) = offset`, where `pre` is a
    /// preimage of the current base.
    pub(crate) fn offset_backward(&self, pre: Vec2, offset: Vec2) -> Result<Vec2> {
        if self.is_linear() {
            Ok(self.real_inverse.apply(offset))
        } else {
            self.solve_increment(pre, offset)
        }
    }

    /// Advances a pair `(base, base + offset)` one step forward; the base is
    /// reduced into `[0,1)²` and the offset is computed without cancellation.
    pub fn step_pair_forward(&self, base: Vec2, offset: Vec2) -> (Vec2, Vec2) {
        (reduce_lift(self.forward_lift(base)), self.offset_forward(base, offset))
    }

    /// Backward analogue of [`Self::step_pair_forward`].
    pub fn step_pair_backward(&self, base: Vec2, offset: Vec2) -> Result<(Vec2, Vec2)> {
        if self.is_linear() {
            let b = self.real_inverse.apply(base);
            return Ok((reduce_lift(b), self.real_inverse.apply(offset)));
        }
        let w = self.inverse_lift(base)?;
        let d = self.solve_increment(w, offset)?;
        Ok((reduce_lift(w), d))
    }

    fn sup_jacobian_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(i as f64 / n as f64, j as f64 / n as f64);
                best = best.max(self.jacobian(p).operator_norm());
            }
        }
        // grid sampling may miss the true sup by O(h)
        best * 1.01
    }

    /// Cone-field check: in eigen-coordinates, the cones `|v_s| ≤ κ|v_u|`
    /// (resp. `|v_u| ≤ κ|v_s|`) must be mapped into themselves and expanded
    /// by `Df` (resp. `Df⁻¹`) at every point of a grid.
    pub fn check_cones(&self) -> Result<()> {
        if self.perturbation.jacobian_bound() * self.eigen.projection_norm() > 0.5 * (self.eigen.lambda_u.abs() - 1.0) {
            return Err(Error::NotUniformlyHyperbolic(format!(
                "perturbation derivative bound {} too large",
                self.perturbation.jacobian_bound()
            )));
        }
        let basis = Mat2::from_columns(self.eigen.e_u, self.eigen.e_s);
        let basis_inv = basis.inverse().expect("eigenbasis");
        let k = CONE_SLOPE;
        for i in 0..CONE_GRID {
            for j in 0..CONE_GRID {
                let p = Vec2::new(i as f64 / CONE_GRID as f64, j as f64 / CONE_GRID as f64);
                let df = basis_inv.mul(&self.jacobian(p)).mul(&basis);
                let dfi = df.inverse().ok_or_else(|| Error::NotUniformlyHyperbolic("singular Df".into()))?;
                for sign in [-1.0, 0.0, 1.0] {
                    let w = df.apply(Vec2::new(1.0, sign * k));
                    if w.y.abs() > k * w.x.abs() || w.x.abs() <= 1.0 {
                        return Err(Error::NotUniformlyHyperbolic(format!(
                            "unstable cone not invariant at ({}, {})",
                            p.x, p.y
                        )));
                    }
                    let w = dfi.apply(Vec2::new(sign * k, 1.0));
                    if w.x.abs() > k * w.y.abs() || w.y.abs() <= 1.0 {
                        return Err(Error::NotUniformlyHyperbolic(format!(
                            "stable cone not invariant at ({}, {})",
                            p.x, p.y
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn reduce_lift(v: Vec2) -> Vec2 {
    Vec2::new(reduce_unit(v.x), reduce_unit(v.y))
}

/// `f^power(p)` reduced mod 1.
pub fn map_apply(map: &HyperbolicMap, p: &TorusPoint, power: i32) -> Result<TorusPoint> {
    map.apply(p, power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::torus_distance;
    use proptest::prelude::*;

    #[test]
    fn cat_map_examples() {
        let cat = HyperbolicMap::cat();
        assert_eq!(map_apply(&cat, &TorusPoint::ORIGIN, 1).unwrap(), TorusPoint::ORIGIN);
        let q = map_apply(&cat, &TorusPoint::new(0.5, 0.5), 1).unwrap();
        assert_eq!((q.x1(), q.x2()), (0.5, 0.0));
    }

    #[test]
    fn cat_eigen_data() {
        let e = *HyperbolicMap::cat().eigen();
        let lu = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((e.lambda_u - lu).abs() < 1e-14);
        assert!((e.lambda_s - 1.0 / lu).abs() < 1e-14);
        // symmetric matrix: orthonormal eigenbasis
        assert!(e.e_u.dot(e.e_s).abs() < 1e-15);
        assert!((e.projection_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_hyperbolic_matrices_are_rejected() {
        assert!(HyperbolicMap::new(IntMat2([[1, 1], [0, 1]]), Perturbation::none()).is_err());
        assert!(HyperbolicMap::new(IntMat2([[0, -1], [1, 0]]), Perturbation::none()).is_err());
        assert!(HyperbolicMap::new(IntMat2([[2, 0], [0, 1]]), Perturbation::none()).is_err());
        assert!(HyperbolicMap::perturbed_cat(0.5).is_err());
        assert!(HyperbolicMap::perturbed_cat(0.01).is_ok());
    }

    #[test]
    fn perturbed_inverse_identity_on_many_points() {
        use rand::{Rng, SeedableRng};
        let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = TorusPoint::new(rng.random(), rng.random());
            let back = map.apply(&map.apply(&p, 1).unwrap(), -1).unwrap();
            assert!(torus_distance(&p, &back) < 1e-10);
        }
    }

    #[test]
    fn pair_stepping_matches_direct_iteration() {
        let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let base = Vec2::new(0.3, 0.6);
        let off = Vec2::new(1e-4, -2e-4);
        let (b1, o1) = map.step_pair_forward(base, off);
        let direct = map.forward_lift(base + off) - map.forward_lift(base);
        assert!((o1 - direct).norm() < 1e-15);
        let (b0, o0) = map.step_pair_backward(b1, o1).unwrap();
        assert!(TorusPoint::from_lift(b0).approx_eq(&TorusPoint::from_lift(base), 1e-13));
        assert!((o0 - off).norm() < 1e-15);
    }

    /// Exact rational oracle: numerators over 2^20 advanced by the integer
    /// matrix power.
    #[test]
    fn linear_iteration_is_exact_at_dyadic_points() {
        let cat = HyperbolicMap::cat();
        let denom: i128 = 1 << 20;
        for (n1, n2) in [(1i128, 3i128), (12345, 999_999), (524_288, 77)] {
            let p = TorusPoint::new(n1 as f64 / denom as f64, n2 as f64 / denom as f64);
            for k in 0..=30u32 {
                let ak = IntMat2([[2, 1], [1, 1]]).pow(k).0;
                let m1 = (ak[0][0] as i128 * n1 + ak[0][1] as i128 * n2).rem_euclid(denom);
                let m2 = (ak[1][0] as i128 * n1 + ak[1][1] as i128 * n2).rem_euclid(denom);
                let q = cat.apply(&p, k as i32).unwrap();
                assert_eq!(q.x1(), m1 as f64 / denom as f64);
                assert_eq!(q.x2(), m2 as f64 / denom as f64);
            }
        }
    }

    proptest! {
        #[test]
        fn linear_round_trip_is_exact_on_the_grid(a in 0u64..(1 << 53), b in 0u64..(1 << 53), k in -30i32..=30) {
            let cat = HyperbolicMap::cat();
            let p = TorusPoint::new(a as f64 / 2f64.powi(53), b as f64 / 2f64.powi(53));
            let back = cat.apply(&cat.apply(&p, k).unwrap(), -k).unwrap();
            prop_assert_eq!((back.x1(), back.x2()), (p.x1(), p.x2()));
        }

        #[test]
        fn perturbed_round_trip(a in 0.0..1.0f64, b in 0.0..1.0f64, k in -30i32..=30) {
            let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
            let p = TorusPoint::new(a, b);
            let back = map.apply(&map.apply(&p, k).unwrap(), -k).unwrap();
            // rounding the intermediate point is amplified by λ^|k| on the way back
            let conditioning = 1e-15 * map.eigen().lambda_u.abs().powi(k.abs());
            prop_assert!(torus_distance(&p, &back) < 1e-9_f64.max(conditioning));
        }
    }
}
