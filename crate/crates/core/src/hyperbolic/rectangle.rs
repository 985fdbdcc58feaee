//! Rectangles `R = [V^u_q, V^s_q]` built from leaf balls around `q`.

use serde::{Deserialize, Serialize};

use super::bracket::bracket_offset;
use super::constants::HyperbolicConstants;
use super::leaf::{leaf_offset, Interval, LeafSegment, Side};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::torus::{torus_distance, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    q: TorusPoint,
    r: f64,
    vu: LeafSegment,
    vs: LeafSegment,
    /// Every point of `R` lies within this distance of `q`.
    reach: f64,
}

/// Chart interval of `W^side_base ∩ B(base, r)` (the component through
/// `base`).
pub fn leaf_disc_interval(map: &HyperbolicMap, base: &TorusPoint, side: Side, r: f64) -> Result<Interval> {
    if map.is_linear() {
        return Ok(Interval::symmetric(r));
    }
    let far = 2.0 * map.eigen().projection_norm() * r;
    let mut ends = [0.0; 2];
    for (slot, sign) in ends.iter_mut().zip([-1.0, 1.0]) {
        let (mut lo, mut hi) = (0.0, far);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if leaf_offset(map, base, side, sign * mid)?.norm() < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *slot = sign * lo;
    }
    Ok(Interval::new(ends[0], ends[1]))
}

/// `[B^u_1(q,r), B^s_1(q,r)]`, for `0 < r < ε/(2(Q+1))`.
pub fn make_rectangle(map: &HyperbolicMap, consts: &HyperbolicConstants, q: TorusPoint, r: f64) -> Result<Rectangle> {
    let limit = consts.rectangle_limit();
    if !(r > 0.0 && r < limit) {
        return Err(Error::RectangleTooLarge { r, limit });
    }
    let vu = LeafSegment::new(q, Side::Unstable, leaf_disc_interval(map, &q, Side::Unstable, r)?)?;
    let vs = LeafSegment::new(q, Side::Stable, leaf_disc_interval(map, &q, Side::Stable, r)?)?;
    let reach = if map.is_linear() {
        // |u e_u + s e_s| with |u|,|s| < r
        r * (2.0 + 2.0 * map.eigen().cos_angle()).sqrt()
    } else {
        // d([x,y],q) ≤ d([x,y],y) + d(y,q) ≤ Q d(x,y) + r
        (2.0 * consts.q + 1.0) * r
    };
    Ok(Rectangle { q, r, vu, vs, reach })
}

impl Rectangle {
    pub fn q(&self) -> TorusPoint {
        self.q
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn vu(&self) -> &LeafSegment {
        &self.vu
    }

    pub fn vs(&self) -> &LeafSegment {
        &self.vs
    }

    pub fn leaf(&self, side: Side) -> &LeafSegment {
        match side {
            Side::Unstable => &self.vu,
            Side::Stable => &self.vs,
        }
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.reach
    }

    /// Leaf coordinates `(t_u, t_s)` of `π^u z = [z,q]` and `π^s z = [q,z]`,
    /// or `None` when `z ∉ R`.
    pub fn coordinates(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<Option<(f64, f64)>> {
        if torus_distance(z, &self.q) > self.reach * (1.0 + 1e-9) {
            return Ok(None);
        }
        let (tu, ts) = self.raw_coordinates(map, z)?;
        if self.vu.range().contains(tu) && self.vs.range().contains(ts) {
            Ok(Some((tu, ts)))
        } else {
            Ok(None)
        }
    }

    /// Leaf coordinates of the two projections, without the range test.
    pub fn raw_coordinates(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<(f64, f64)> {
        let w = self.q.displacement_to(z);
        if map.is_linear() {
            return Ok(map.eigen().coords(w));
        }
        let (o, _) = bracket_offset(map, z, &self.q)?;
        let zu = z.translate(o);
        let (o, _) = bracket_offset(map, &self.q, z)?;
        let zs = self.q.translate(o);
        Ok((self.vu.coordinate(map, &zu)?, self.vs.coordinate(map, &zs)?))
    }

    pub fn contains(&self, map: &HyperbolicMap, z: &TorusPoint) -> Result<bool> {
        Ok(self.coordinates(map, z)?.is_some())
    }

    /// The point `[V^u_q(t_u), V^s_q(t_s)]`.
    pub fn point(&self, map: &HyperbolicMap, tu: f64, ts: f64) -> Result<TorusPoint> {
        let x = self.vu.point(map, tu)?;
        let y = self.vs.point(map, ts)?;
        let (o, _) = bracket_offset(map, &x, &y)?;
        Ok(x.translate(o))
    }
}

/// `π^s(z) = [q,z]` or `π^u(z) = [z,q]` for `z ∈ R`.
pub fn project(map: &HyperbolicMap, rect: &Rectangle, z: &TorusPoint, side: Side) -> Result<TorusPoint> {
    let (tu, ts) = rect.coordinates(map, z)?.ok_or(Error::NotInRectangle)?;
    match side {
        Side::Unstable => rect.vu.point(map, tu),
        Side::Stable => rect.vs.point(map, ts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::bracket::bracket;
    use crate::hyperbolic::constants::{estimate_constants, ConstantsConfig};
    use crate::sampling::{symmetric, uniform_point, SampleStream};

    fn cat() -> (HyperbolicMap, HyperbolicConstants) {
        let map = HyperbolicMap::cat();
        let c = HyperbolicConstants::linear(&map, &ConstantsConfig::default()).unwrap();
        (map, c)
    }

    #[test]
    fn precondition_and_degenerate_limit() {
        let (map, c) = cat();
        let q = TorusPoint::new(0.5, 0.5);
        let lim = c.rectangle_limit();
        assert!(matches!(make_rectangle(&map, &c, q, lim), Err(Error::RectangleTooLarge { .. })));
        let tiny = make_rectangle(&map, &c, q, 1e-12).unwrap();
        assert!(tiny.contains(&map, &q).unwrap());
        assert!(!tiny.contains(&map, &TorusPoint::new(0.5, 0.5 + 1e-9)).unwrap());
    }

    #[test]
    fn linear_rectangle_is_an_eigen_box() {
        let (map, c) = cat();
        let e = *map.eigen();
        let q = TorusPoint::new(0.02, 0.97);
        let rect = make_rectangle(&map, &c, q, 0.02).unwrap();
        for (u, s, inside) in [(0.019, -0.019, true), (0.021, 0.0, false), (0.0, -0.0201, false), (-0.01, 0.015, true)]
        {
            let z = q.translate(e.from_coords(u, s));
            assert_eq!(rect.contains(&map, &z).unwrap(), inside, "({u},{s})");
        }
    }

    #[test]
    fn projections_and_reconstruction() {
        let (map, c) = cat();
        let q = TorusPoint::new(0.3, 0.3);
        let rect = make_rectangle(&map, &c, q, 0.02).unwrap();
        assert_eq!(project(&map, &rect, &q, Side::Stable).unwrap(), q);
        assert_eq!(project(&map, &rect, &q, Side::Unstable).unwrap(), q);
        let on_u = rect.vu().point(&map, 0.01).unwrap();
        assert!(project(&map, &rect, &on_u, Side::Unstable).unwrap().approx_eq(&on_u, 1e-15));
        let far = TorusPoint::new(0.6, 0.6);
        assert!(matches!(project(&map, &rect, &far, Side::Stable), Err(Error::NotInRectangle)));

        let pm = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let (pc, _) = estimate_constants(&pm, &ConstantsConfig::quick()).unwrap();
        for (m, k) in [(&map, &c), (&pm, &pc)] {
            let rect = make_rectangle(m, k, q, 0.015).unwrap();
            let stream = SampleStream::new(3, "reconstruct");
            for i in 0..40 {
                let mut rng = stream.rng(i);
                let z = rect.point(m, symmetric(&mut rng, 0.014), symmetric(&mut rng, 0.014)).unwrap();
                let pu = project(m, &rect, &z, Side::Unstable).unwrap();
                let ps = project(m, &rect, &z, Side::Stable).unwrap();
                assert!(bracket(m, &pu, &ps, k).unwrap().approx_eq(&z, 1e-10));
            }
        }
    }

    #[test]
    fn rectangle_closure_and_diameter() {
        let pm = HyperbolicMap::perturbed_cat(0.01).unwrap();
        let (pc, _) = estimate_constants(&pm, &ConstantsConfig::quick()).unwrap();
        let (map, c) = cat();
        for (m, k, count) in [(&map, &c, 10_000u64), (&pm, &pc, 300)] {
            let r = k.rectangle_limit() * 0.99;
            let stream = SampleStream::new(11, "closure");
            let q = uniform_point(&mut stream.rng(u64::MAX));
            let rect = make_rectangle(m, k, q, r).unwrap();
            assert!(rect.diameter_bound() <= k.eps || !m.is_linear());
            let mut max_d: f64 = 0.0;
            for i in 0..count {
                let mut rng = stream.rng(i);
                let ru = rect.vu().range();
                let rs = rect.vs().range();
                let tu = ru.lo + (ru.hi - ru.lo) * (0.0005 + 0.999 * rand::Rng::random::<f64>(&mut rng));
                let ts = rs.lo + (rs.hi - rs.lo) * (0.0005 + 0.999 * rand::Rng::random::<f64>(&mut rng));
                let z = rect.point(m, tu, ts).unwrap();
                assert!(rect.contains(m, &z).unwrap());
                max_d = max_d.max(torus_distance(&z, &q));
            }
            assert!(2.0 * max_d <= k.eps);
        }
    }
}
