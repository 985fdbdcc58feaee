//! The invariant splitting `E^u ⊕ E^s` at a point.

use crate::dynamics::{reduce_lift, HyperbolicMap};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::torus::TorusPoint;

/// Number of cocycle steps used to converge onto the invariant directions.
pub const PUSH_FORWARD_STEPS: usize = 40;

fn orient(v: Vec2, reference: Vec2) -> Vec2 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

/// Unit vectors `(e_u(p), e_s(p))`. For a perturbed map `e_u` is obtained
/// by pushing the linear unstable direction forward along the backward
/// orbit, and `e_s` by pulling the linear stable direction back along the
/// forward orbit.
pub fn splitting_at(map: &HyperbolicMap, p: &TorusPoint) -> Result<(Vec2, Vec2)> {
    let eig = *map.eigen();
    if map.is_linear() {
        return Ok((eig.e_u, eig.e_s));
    }
    let mut back = Vec::with_capacity(PUSH_FORWARD_STEPS + 1);
    let mut b = p.lift();
    back.push(b);
    for _ in 0..PUSH_FORWARD_STEPS {
        b = reduce_lift(map.inverse_lift(b)?);
        back.push(b);
    }
    let mut u = eig.e_u;
    for k in (1..=PUSH_FORWARD_STEPS).rev() {
        u = map.jacobian(back[k]).apply(u).normalized();
    }
    let mut fwd = Vec::with_capacity(PUSH_FORWARD_STEPS);
    let mut b = p.lift();
    for _ in 0..PUSH_FORWARD_STEPS {
        fwd.push(b);
        b = reduce_lift(map.forward_lift(b));
    }
    let mut s = eig.e_s;
    for k in (0..PUSH_FORWARD_STEPS).rev() {
        let inv = map
            .jacobian(fwd[k])
            .inverse()
            .ok_or_else(|| Error::NotUniformlyHyperbolic("singular derivative".into()))?;
        s = inv.apply(s).normalized();
    }
    Ok((orient(u, eig.e_u), orient(s, eig.e_s)))
}

/// Angle between two directions (lines), in `[0, π/2]`.
pub fn line_angle(a: Vec2, b: Vec2) -> f64 {
    let c = a.cross(b).abs();
    let d = a.dot(b).abs();
    c.atan2(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_splitting_is_the_eigenbasis() {
        let cat = HyperbolicMap::cat();
        let (u, s) = splitting_at(&cat, &TorusPoint::new(0.3, 0.1)).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let oracle_u = Vec2::new(phi, 1.0).normalized();
        let oracle_s = Vec2::new(1.0, -phi).normalized();
        assert!(line_angle(u, oracle_u) < 1e-15);
        assert!(line_angle(s, oracle_s) < 1e-15);
        assert!(u.dot(s).abs() < 1e-15);
        let (u2, s2) = splitting_at(&cat, &TorusPoint::new(0.9, 0.55)).unwrap();
        assert_eq!((u, s), (u2, s2));
    }

    #[test]
    fn perturbed_splitting_is_invariant() {
        let map = HyperbolicMap::perturbed_cat(0.01).unwrap();
        for (a, b) in [(0.1, 0.2), (0.77, 0.31), (0.5, 0.999)] {
            let p = TorusPoint::new(a, b);
            let (u, s) = splitting_at(&map, &p).unwrap();
            let fp = map.forward(&p);
            let (fu, fs) = splitting_at(&map, &fp).unwrap();
            let df = map.jacobian(p.lift());
            assert!(line_angle(df.apply(u), fu) < 1e-8);
            assert!(line_angle(df.apply(s), fs) < 1e-8);
            // the perturbation tilts the directions
            assert!(line_angle(u, map.eigen().e_u) > 1e-6);
        }
    }
}
