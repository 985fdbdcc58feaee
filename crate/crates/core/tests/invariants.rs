use proptest::prelude::*;

use toral_gibbs::bowen::{contains, maximal_separated_set, BowenBallSpec};
use toral_gibbs::gibbs::{gibbs_constant_estimate, gibbs_measure, SamplingOptions};
use toral_gibbs::hyperbolic::Interval;
use toral_gibbs::product::{product_mass, restrict_and_project, ProductQuery, Restriction};
use toral_gibbs::*;

fn cat() -> (HyperbolicMap, HyperbolicConstants) {
    let map = HyperbolicMap::cat();
    let c = HyperbolicConstants::linear(&map, &ConstantsConfig::default()).unwrap();
    (map, c)
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| TorusPoint::new(a, b))
}

fn offset(max: f64) -> impl Strategy<Value = Vec2> {
    (-max..max, -max..max).prop_map(|(a, b)| Vec2::new(a, b))
}

fn restriction() -> &'static Restriction {
    use std::sync::OnceLock;
    static R: OnceLock<Restriction> = OnceLock::new();
    R.get_or_init(|| {
        let (map, c) = cat();
        let mu = gibbs_measure(&map, &Potential::cosine(0.5), 12).unwrap();
        let rect = make_rectangle(&map, &c, TorusPoint::new(0.37, 0.58), 0.02).unwrap();
        restrict_and_project(&map, &mu, &rect).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_commutes_with_the_map(x in point(), v in offset(0.015)) {
        let (map, c) = cat();
        let y = x.translate(v);
        let z = bracket(&map, &x, &y, &c).unwrap();
        let lhs = map.forward(&z);
        let rhs = bracket(&map, &map.forward(&x), &map.forward(&y), &c).unwrap();
        prop_assert!(torus_distance(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn nested_brackets_collapse(x in point(), vy in offset(0.01), vx in offset(0.01), vyy in offset(0.01)) {
        let (map, c) = cat();
        let y = x.translate(vy);
        let xp = x.translate(vx);
        let yp = y.translate(vyy);
        let a = bracket(&map, &x, &y, &c).unwrap();
        let b = bracket(&map, &xp, &yp, &c).unwrap();
        let lhs = bracket(&map, &a, &b, &c).unwrap();
        let rhs = bracket(&map, &x, &yp, &c).unwrap();
        prop_assert!(torus_distance(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn bowen_balls_are_nested_in_the_radius(
        center in point(),
        v in offset(0.05),
        n in 1usize..6,
        m in 1usize..6,
        r in 0.005..0.05f64,
        grow in 1.0..3.0f64,
    ) {
        let map = HyperbolicMap::cat();
        let z = center.translate(v);
        let small = BowenBallSpec::two_sided(center, n, m, r).unwrap();
        let large = BowenBallSpec::two_sided(center, n, m, (r * grow).min(0.2)).unwrap();
        if contains(&map, &small, &z).unwrap() {
            prop_assert!(contains(&map, &large, &z).unwrap());
        }
    }

    #[test]
    fn greedy_separated_sets_are_reproducible(base in point(), n in 1usize..7, unstable in any::<bool>()) {
        let map = HyperbolicMap::cat();
        let side = if unstable { Side::Unstable } else { Side::Stable };
        let leaf = LeafSegment::new(base, side, Interval::symmetric(0.02)).unwrap();
        let a = maximal_separated_set(&map, &leaf, n, 0.02).unwrap();
        let b = maximal_separated_set(&map, &leaf, n, 0.02).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.points, b.points);
    }

    #[test]
    fn split_products_add_up(cut_u in -0.019..0.019f64, cut_s in -0.019..0.019f64) {
        let rest = restriction();
        let (mu_u, mu_s) = (&rest.unstable, &rest.stable);
        let (ru, rs) = (mu_u.leaf.range(), mu_s.leaf.range());
        let q = |a: Interval, b: Interval| product_mass(mu_u, mu_s, &ProductQuery::new(a, b).unwrap());
        let whole = q(ru, rs);
        let pieces = q(Interval::new(ru.lo, cut_u), rs) + q(Interval::new(cut_u, ru.hi), rs);
        prop_assert!((whole - pieces).abs() <= 1e-12 * whole);
        let box_whole = rest.measure.mass_of_box(&ru, &rs);
        let box_pieces = rest.measure.mass_of_box(&ru, &Interval::new(rs.lo, cut_s))
            + rest.measure.mass_of_box(&ru, &Interval::new(cut_s, rs.hi));
        prop_assert!(box_pieces <= box_whole * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn weighted_orbits_are_invariant(c1 in -0.5..0.5f64, s1 in -0.5..0.5f64, c2 in -0.3..0.3f64, k in 1i64..3) {
        let phi = Potential::new(PotentialKind::Trigonometric {
            terms: vec![
                TrigTerm { freq: [1, 0], cos_coeff: c1, sin_coeff: s1 },
                TrigTerm { freq: [k, 1], cos_coeff: c2, sin_coeff: 0.0 },
            ],
        })
        .unwrap();
        let map = HyperbolicMap::cat();
        let mu = gibbs_measure(&map, &phi, 8).unwrap();
        prop_assert!(mu.invariance_defect(&map) < 1e-10);
    }
}

#[test]
fn gibbs_constant_is_stable_in_the_depth_range() {
    let map = HyperbolicMap::cat();
    let opts = SamplingOptions { sample_count: 100, seed: 0 };
    let short: Vec<usize> = (1..=8).collect();
    let long: Vec<usize> = (1..=12).collect();
    for phi in [Potential::constant(0.0), Potential::cosine(0.5)] {
        let mu = gibbs_measure(&map, &phi, 14).unwrap();
        let a = gibbs_constant_estimate(&map, &phi, &mu, 0.05, &short, opts, 0.0).unwrap().k;
        let b = gibbs_constant_estimate(&map, &phi, &mu, 0.05, &long, opts, 0.0).unwrap().k;
        let rel = (a - b).abs() / a.min(b);
        assert!(rel < 0.25, "K over 1..8 = {a}, over 1..12 = {b}");
    }
}
