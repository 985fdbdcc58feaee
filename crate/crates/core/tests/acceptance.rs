//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
//! its measured value, tolerance and wall time against the time budget.
//!
//! Criteria listed in `KNOWN_RED` are expected to fail for a documented
//! reason (see the README); the test fails if any other criterion is red.

use std::time::Instant;

use toral_gibbs::bowen::{ball_in_product_check, product_in_ball_check, separated_growth_check, InclusionOptions};
use toral_gibbs::gibbs::{
    fixed_point_count, gibbs_constant_estimate, gibbs_measure, periodic_points, pressure_estimate, EmpiricalMeasure,
    SamplingOptions,
};
use toral_gibbs::hyperbolic::{bracket_law_check, Interval};
use toral_gibbs::product::{
    density_bound_check, leafwise_gibbs_check, product_gibbs_check, restrict_and_project, DensityOptions, Restriction,
};
use toral_gibbs::*;

const KNOWN_RED: &[&str] = &["leaf and product constants stabilize"];

const SEED: u64 = 0;
/// Rectangle radius and base point shared by the product-structure criteria.
const RECT_R: f64 = 0.02;
const RECT_Q: (f64, f64) = (0.37, 0.58);
/// Orbit period of the measures behind the product-structure criteria.
const PRODUCT_PERIOD: usize = 16;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

fn timed(name: &'static str, budget: f64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t0 = Instant::now();
    let (pass, detail) = f();
    let secs = t0.elapsed().as_secs_f64();
    let out = Outcome { name, pass: pass && secs < budget, detail, secs, budget };
    let tag = if out.pass { "PASS" } else { "FAIL" };
    println!("{tag} {}: {} [{:.2} s, budget {} s]", out.name, out.detail, out.secs, out.budget);
    out
}

fn cat() -> (HyperbolicMap, HyperbolicConstants) {
    let map = HyperbolicMap::cat();
    let c = HyperbolicConstants::linear(&map, &ConstantsConfig::default()).unwrap();
    (map, c)
}

fn restriction(map: &HyperbolicMap, consts: &HyperbolicConstants, mu: &EmpiricalMeasure) -> Restriction {
    let rect = make_rectangle(map, consts, TorusPoint::new(RECT_Q.0, RECT_Q.1), RECT_R).unwrap();
    restrict_and_project(map, mu, &rect).unwrap()
}

fn opts(sample_count: usize) -> SamplingOptions {
    SamplingOptions { sample_count, seed: SEED }
}

fn periodic_counts() -> (bool, String) {
    let cat = IntMat2([[2, 1], [1, 1]]);
    let map = HyperbolicMap::cat();
    let mut bad = Vec::new();
    for n in 1..=14 {
        let det = fixed_point_count(cat, n).unwrap();
        let set = periodic_points(&map, n).unwrap();
        if set.len() as u64 != det {
            bad.push(format!("n={n}: {} vs {det}", set.len()));
        }
    }
    let n12 = periodic_points(&map, 12).unwrap().len();
    (
        bad.is_empty() && n12 == 103_680,
        format!("|Fix(f^n)| = |det(A^n − I)| for n = 1..14, n=12 gives {n12}; mismatches {bad:?}"),
    )
}

fn pressure_zero_potential() -> (bool, String) {
    let p = pressure_estimate(&HyperbolicMap::cat(), &Potential::constant(0.0), 12).unwrap();
    let target = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let gap = (p - target).abs();
    (gap < 1e-4, format!("P_12 = {p:.9}, |P_12 − log λ_u| = {gap:.3e} < 1e-4"))
}

fn gibbs_cosine() -> (bool, String) {
    let map = HyperbolicMap::cat();
    let phi = Potential::cosine(0.5);
    let mu = gibbs_measure(&map, &phi, 16).unwrap();
    let depths: Vec<usize> = (1..=10).collect();
    let est = gibbs_constant_estimate(&map, &phi, &mu, 0.05, &depths, opts(100), 0.0).unwrap();
    let k = est.k;
    let inside = est
        .depths
        .iter()
        .filter(|d| d.included && d.has_ratios())
        .all(|d| d.min_ratio >= 1.0 / k && d.max_ratio <= k && d.zero_mass == 0);
    let included: Vec<usize> = est.depths.iter().filter(|d| d.included).map(|d| d.n).collect();
    (
        inside && est.stabilized && est.record.pass,
        format!(
            "φ = 0.5 cos 2πx₁, r = 0.05, 100 centers: K = {k:.2}, ratios in [1/K, K] {inside}, stabilized {} (depths above the resolution floor {included:?})",
            est.stabilized
        ),
    )
}

fn bracket_laws() -> (bool, String) {
    let (map, c) = cat();
    let lin = bracket_law_check(&map, &c, 3, 1000, SEED);
    let pm = HyperbolicMap::perturbed_cat(0.01).unwrap();
    let (pc, _) = estimate_constants(&pm, &ConstantsConfig::quick()).unwrap();
    let per = bracket_law_check(&pm, &pc, 3, 1000, SEED);
    let v = |r: &VerificationRecord, k: &str| r.params[k].as_f64().unwrap();
    (
        lin.pass && per.pass,
        format!(
            "linear: equivariance {:.1e}, composition {:.1e} (< 1e-12); ε = 0.01: {:.1e}, {:.1e} (< 1e-6); 1000 samples each",
            v(&lin, "max_equivariance"),
            v(&lin, "max_composition"),
            v(&per, "max_equivariance"),
            v(&per, "max_composition")
        ),
    )
}

fn inclusions() -> (bool, String) {
    let (map, c) = cat();
    let x = TorusPoint::new(0.2, 0.3);
    let y = x.translate(Vec2::new(0.006, -0.008));
    let o = InclusionOptions { sample_count: 10_000, seed: SEED, enforce_hypotheses: true };
    let outer = ball_in_product_check(&map, &c, &x, &y, 5, 5, 0.05, None, &o).unwrap();
    let inner = product_in_ball_check(&map, &c, &x, &y, 5, 5, 0.02, &o).unwrap();
    let probe_opts = InclusionOptions { enforce_hypotheses: false, ..o };
    let probe = ball_in_product_check(&map, &c, &x, &y, 5, 5, 0.05, Some(0.1), &probe_opts).unwrap();
    (
        outer.violations == 0 && inner.violations == 0 && outer.pass && inner.pass && probe.violations > 0,
        format!(
            "two-sided ball in product: {} violations / {}; product in two-sided ball: {} / {}; probe r₁ = 2r: {} violations",
            outer.violations, outer.samples, inner.violations, inner.samples, probe.violations
        ),
    )
}

fn leaf_and_product_constants() -> (bool, String) {
    let (map, c) = cat();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, phi) in [("φ = 0", Potential::constant(0.0)), ("φ = 0.5 cos 2πx₁", Potential::cosine(0.5))] {
        let mu = gibbs_measure(&map, &phi, PRODUCT_PERIOD).unwrap();
        let rest = restriction(&map, &c, &mu);
        let depths: Vec<usize> = (1..=10).collect();
        let totals: Vec<usize> = (2..=12).collect();
        let k1 = leafwise_gibbs_check(&map, &c, &phi, &mu, &rest, RECT_R / 2.0, RECT_R, &depths, opts(100)).unwrap();
        let k0h = product_gibbs_check(&map, &c, &phi, &mu, RECT_R / 2.0, &totals, opts(100)).unwrap();
        let k0 = product_gibbs_check(&map, &c, &phi, &mu, RECT_R, &totals, opts(100)).unwrap();
        ok &= k1.stabilized && k0h.stabilized && k0.stabilized;
        parts.push(format!(
            "{name}: K₁ = {:.0} ({}), K₀(r/2) = {:.0} ({}), K₀(r) = {:.0} ({})",
            k1.k1,
            flag(k1.stabilized),
            k0h.k0,
            flag(k0h.stabilized),
            k0.k0,
            flag(k0.stabilized)
        ));
    }
    (ok, parts.join("; "))
}

fn flag(stable: bool) -> &'static str {
    if stable {
        "stable"
    } else {
        "not stable"
    }
}

fn density_bound() -> (bool, String) {
    let (map, c) = cat();
    let dopts = DensityOptions { seed: SEED, ..Default::default() };
    let zero = Potential::constant(0.0);
    let mu = gibbs_measure(&map, &zero, PRODUCT_PERIOD).unwrap();
    let rest = restriction(&map, &c, &mu);
    let scan = density_bound_check(&map, &mu, &rest, None, dopts).unwrap();
    let mut worst: f64 = 0.0;
    let mut lebesgue_ok = scan.excluded_cells == 0;
    for (row, counts) in scan.ratios.iter().zip(&scan.counts) {
        for (q, &n) in row.iter().zip(counts) {
            match q {
                Some(q) => {
                    let dev = (q - 1.0).abs() * (n as f64).sqrt() / 3.0;
                    worst = worst.max(dev);
                    lebesgue_ok &= dev <= 1.0;
                }
                None => lebesgue_ok = false,
            }
        }
    }
    drop((mu, rest));

    let phi = Potential::cosine(0.5);
    let mu = gibbs_measure(&map, &phi, PRODUCT_PERIOD).unwrap();
    let rest = restriction(&map, &c, &mu);
    let depths: Vec<usize> = (1..=10).collect();
    let totals: Vec<usize> = (2..=12).collect();
    let k1 = leafwise_gibbs_check(&map, &c, &phi, &mu, &rest, RECT_R / 2.0, RECT_R, &depths, opts(100)).unwrap().k1;
    let k0h = product_gibbs_check(&map, &c, &phi, &mu, RECT_R / 2.0, &totals, opts(100)).unwrap().k0;
    let cos = density_bound_check(&map, &mu, &rest, Some((k0h, k1)), dopts).unwrap();
    let formula = cos.kbar_formula.unwrap();
    let cos_ok = cos.kbar_emp <= formula && cos.cell_violations == 0 && cos.record.pass;
    (
        lebesgue_ok && scan.record.pass && cos_ok,
        format!(
            "φ = 0: 64 cells, worst |ratio − 1|·√count/3 = {worst:.3} (≤ 1); φ = 0.5 cos: K̄_emp = {:.4} ≤ K₀(r/2)·K₁² = {formula:.3e}, {} cell violations, {} cells excluded",
            cos.kbar_emp, cos.cell_violations, cos.excluded_cells
        ),
    )
}

fn separated_sets() -> (bool, String) {
    let map = HyperbolicMap::cat();
    let leaf =
        LeafSegment::new(TorusPoint::new(RECT_Q.0, RECT_Q.1), Side::Unstable, Interval::symmetric(RECT_R)).unwrap();
    let depths: Vec<usize> = (4..=10).collect();
    let rec = separated_growth_check(&map, &leaf, RECT_R, &depths).unwrap();
    (
        rec.pass,
        format!(
            "unstable leaf, r = {RECT_R}, n = 4..10: counts {}, ratios {} vs λ_u = 2.618 within 10%, audit failures {}",
            rec.params["counts"], rec.params["growth_ratios"], rec.params["audit_failures"]
        ),
    )
}

fn main() {
    let results = [
        timed("periodic-point counts", 10.0, periodic_counts),
        timed("pressure of the zero potential", 5.0, pressure_zero_potential),
        timed("Gibbs property of the cosine measure", 60.0, gibbs_cosine),
        timed("bracket algebra", 10.0, bracket_laws),
        timed("Bowen-ball inclusions", 30.0, inclusions),
        timed("leaf and product constants stabilize", 60.0, leaf_and_product_constants),
        timed("uniformly bounded product density", 120.0, density_bound),
        timed("separated sets", 10.0, separated_sets),
    ];
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria pass", results.len());
    for r in &results {
        if KNOWN_RED.contains(&r.name) {
            println!("known red: {} ({})", r.name, if r.pass { "now passes" } else { "still fails" });
        }
    }
    let unexpected: Vec<&str> =
        results.iter().filter(|r| !r.pass && !KNOWN_RED.contains(&r.name)).map(|r| r.name).collect();
    if !unexpected.is_empty() {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
