//! Cell-by-cell comparison of `μ|_R` with `μ^u ⊗ μ^s`, and the
//! separated-set sandwich behind the density bound.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::leaf_measure::Restriction;
use crate::bowen::{leaf_ball_interval, maximal_separated_set};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::gibbs::{EmpiricalMeasure, RESOLUTION_ATOMS};
use crate::hyperbolic::{project, Interval, LeafSegment, Side};
use crate::potential::{birkhoff_sum, Direction, Potential};
use crate::record::{Tally, VerificationRecord};
use crate::sampling::SampleStream;

const ADDITIVITY_TOL: f64 = 1e-12;
const PROJECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityOptions {
    pub grid: usize,
    /// Random unions of cells checked besides single cells.
    pub union_samples: usize,
    /// Atoms whose projections are audited (all when 0).
    pub audit_atoms: usize,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { grid: 8, union_samples: 200, audit_atoms: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityScan {
    pub grid: usize,
    /// `μ(E)/(μ^u ⊗ μ^s)(E)` per cell, indexed `[unstable][stable]`;
    /// `None` below the resolution floor.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
    pub excluded_cells: usize,
    pub kbar_emp: f64,
    /// Same sup without dividing the product by `μ(R)`.
    pub kbar_emp_unnormalized: f64,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub kbar_formula: Option<f64>,
    /// Cells or unions whose ratio leaves `[1/K̄, K̄]` for the formula `K̄`.
    pub cell_violations: usize,
    /// Largest `|ratio − 1|·√(cell atom count)`.
    pub max_normalized_deviation: f64,
    pub full_ratio: f64,
    pub additivity_defect: f64,
    pub projection_disagreements: usize,
    pub idempotence_defect: f64,
    pub record: VerificationRecord,
}

fn edges(range: Interval, grid: usize) -> Vec<f64> {
    (0..=grid).map(|i| if i == grid { range.hi } else { range.lo + range.length() * i as f64 / grid as f64 }).collect()
}

/// Index of the half-open cell `[e_i, e_{i+1})` holding `t`.
fn cell_of(edges: &[f64], t: f64) -> Option<usize> {
    let grid = edges.len() - 1;
    if !(t >= edges[0] && t < edges[grid]) {
        return None;
    }
    let mut i = (((t - edges[0]) / (edges[grid] - edges[0])) * grid as f64) as usize;
    i = i.min(grid - 1);
    while t < edges[i] {
        i -= 1;
    }
    while t >= edges[i + 1] {
        i += 1;
    }
    Some(i)
}

/// Partitions `V^u_q × V^s_q` into `grid × grid` cells and compares `μ(E)`
/// with `μ^u(A)μ^s(B)/μ(R)` on every cell above the resolution floor and on
/// random unions of them. With `constants = (K₀(r/2), K₁)` the sup is also
/// checked against `K₀K₁²`.
pub fn density_bound_check(
    map: &HyperbolicMap,
    mu: &EmpiricalMeasure,
    rest: &Restriction,
    constants: Option<(f64, f64)>,
    opts: DensityOptions,
) -> Result<DensityScan> {
    let g = opts.grid;
    if g == 0 {
        return Err(Error::Invalid("grid resolution must be positive".into()));
    }
    let rm = &rest.measure;
    let eu = edges(rest.unstable.leaf.range(), g);
    let es = edges(rest.stable.leaf.range(), g);
    let mut mass = vec![vec![0.0; g]; g];
    let mut counts = vec![vec![0usize; g]; g];
    let mut cell_index = Vec::with_capacity(rm.len());
    for k in 0..rm.len() {
        let (i, j) = match (cell_of(&eu, rm.tu[k]), cell_of(&es, rm.ts[k])) {
            (Some(i), Some(j)) => (i, j),
            _ => return Err(Error::Invalid("atom outside the cell grid".into())),
        };
        mass[i][j] += rm.weights[k];
        counts[i][j] += 1;
        cell_index.push((i, j));
    }
    let marg_u: Vec<(f64, usize)> = (0..g).map(|i| rest.unstable.mass_half_open(eu[i], eu[i + 1])).collect();
    let marg_s: Vec<(f64, usize)> = (0..g).map(|j| rest.stable.mass_half_open(es[j], es[j + 1])).collect();

    // disjoint additivity: cells add up to the leaf marginals and to μ(R)
    let mut additivity: f64 = 0.0;
    for i in 0..g {
        additivity = additivity.max((mass[i].iter().sum::<f64>() - marg_u[i].0).abs());
    }
    for j in 0..g {
        additivity = additivity.max(((0..g).map(|i| mass[i][j]).sum::<f64>() - marg_s[j].0).abs());
    }
    additivity = additivity.max((mass.iter().flatten().sum::<f64>() - rm.mass).abs());

    let total = rm.mass;
    let product = |i: usize, j: usize| marg_u[i].0 * marg_s[j].0 / total;
    let n_atoms = rm.len() as f64;
    let mut ratios = vec![vec![None; g]; g];
    let mut excluded = 0;
    let mut kbar: f64 = 1.0;
    let mut max_dev: f64 = 0.0;
    let mut included = Vec::new();
    for i in 0..g {
        for j in 0..g {
            let expected = marg_u[i].1 as f64 * marg_s[j].1 as f64 / n_atoms;
            let p = product(i, j);
            if expected < RESOLUTION_ATOMS || p == 0.0 {
                excluded += 1;
                continue;
            }
            let q = mass[i][j] / p;
            ratios[i][j] = Some(q);
            if q > 0.0 {
                kbar = kbar.max(q.max(1.0 / q));
            } else {
                kbar = f64::INFINITY;
            }
            max_dev = max_dev.max((q - 1.0).abs() * (counts[i][j].max(1) as f64).sqrt());
            included.push((i, j));
        }
    }
    let full_ratio = mass.iter().flatten().sum::<f64>()
        / (marg_u.iter().map(|m| m.0).sum::<f64>() * marg_s.iter().map(|m| m.0).sum::<f64>() / total);

    // random unions: direct mass against the sum of cell masses
    let stream = SampleStream::new(opts.seed, "density-unions");
    let mut union_ratios = Vec::with_capacity(opts.union_samples);
    for s in 0..opts.union_samples as u64 {
        let mut rng = stream.rng(s);
        let chosen: Vec<bool> = included.iter().map(|_| rng.random_bool(0.5)).collect();
        let mut mask = vec![vec![false; g]; g];
        for (&(i, j), &c) in included.iter().zip(&chosen) {
            mask[i][j] = c;
        }
        let direct: f64 =
            (0..rm.len()).filter(|&k| mask[cell_index[k].0][cell_index[k].1]).map(|k| rm.weights[k]).sum();
        let by_cells: f64 = included.iter().zip(&chosen).filter(|(_, &c)| c).map(|(&(i, j), _)| mass[i][j]).sum();
        let prod: f64 = included.iter().zip(&chosen).filter(|(_, &c)| c).map(|(&(i, j), _)| product(i, j)).sum();
        additivity = additivity.max((direct - by_cells).abs());
        if prod > 0.0 {
            let q = direct / prod;
            kbar = kbar.max(q.max(1.0 / q));
            union_ratios.push(q);
        }
    }

    // projections: re-projection is idempotent and lands in the same cell
    let audit: Vec<usize> = if opts.audit_atoms == 0 || opts.audit_atoms >= rm.len() {
        (0..rm.len()).collect()
    } else {
        let step = rm.len() as f64 / opts.audit_atoms as f64;
        (0..opts.audit_atoms).map(|k| (k as f64 * step) as usize).collect()
    };
    let rect = rm.rect;
    let checks: Vec<(usize, f64)> = audit
        .par_iter()
        .map(|&k| {
            let z = mu.points()[rm.atoms[k] as usize];
            let mut bad = 0;
            let mut defect: f64 = 0.0;
            for (side, edges, cell) in [(Side::Unstable, &eu, cell_index[k].0), (Side::Stable, &es, cell_index[k].1)] {
                let p = project(map, &rect, &z, side)?;
                let again = project(map, &rect, &p, side)?;
                defect = defect.max(p.displacement_to(&again).norm());
                let t = rect.leaf(side).coordinate(map, &p)?;
                if cell_of(edges, t) != Some(cell) {
                    bad += 1;
                }
            }
            Ok((bad, defect))
        })
        .collect::<Result<_>>()?;
    let disagreements: usize = checks.iter().map(|c| c.0).sum();
    let idempotence = checks.iter().map(|c| c.1).fold(0.0, f64::max);

    let kbar_formula = constants.map(|(k0, k1)| k0 * k1 * k1);
    let mut tally = Tally::default();
    let mut violations = 0;
    let all_ratios = included.iter().filter_map(|&(i, j)| ratios[i][j]).chain(union_ratios.iter().copied());
    for q in all_ratios {
        match kbar_formula {
            Some(kf) => {
                let margin = kf.ln() - q.ln().abs();
                if !(margin >= 0.0) {
                    violations += 1;
                }
                tally.observe(margin, false);
            }
            None => tally.observe(0.0, false),
        }
    }
    let structural = additivity <= ADDITIVITY_TOL && idempotence <= PROJECTION_TOL && disagreements == 0;
    let bound_ok = kbar_formula.is_none_or(|kf| kbar <= kf);
    let record = VerificationRecord::new("density-bound")
        .with_param("grid", g)
        .with_param("rectangle_atoms", rm.len())
        .with_param("rectangle_mass", rm.mass)
        .with_param("Kbar_emp", kbar)
        .with_param("Kbar_emp_unnormalized", kbar / total.min(1.0))
        .with_param("Kbar_formula", kbar_formula.map_or(serde_json::Value::Null, |k| json!(k)))
        .with_param("excluded_cells", excluded)
        .with_param("unions", union_ratios.len())
        .with_param("max_normalized_deviation", max_dev)
        .with_param("full_ratio", full_ratio)
        .with_param("additivity_defect", additivity)
        .with_param("projection_disagreements", disagreements)
        .with_param("idempotence_defect", idempotence)
        .with_tally(tally)
        .fail_unless(structural && bound_ok && violations == 0);
    Ok(DensityScan {
        grid: g,
        ratios,
        counts,
        excluded_cells: excluded,
        kbar_emp: kbar,
        kbar_emp_unnormalized: kbar / total.min(1.0),
        k0: constants.map(|c| c.0),
        k1: constants.map(|c| c.1),
        kbar_formula,
        cell_violations: violations,
        max_normalized_deviation: max_dev,
        full_ratio,
        additivity_defect: additivity,
        projection_disagreements: disagreements,
        idempotence_defect: idempotence,
        record,
    })
}

impl DensityScan {
    /// Cell ratios as a `grid × grid` CSV matrix (rows: unstable cells);
    /// excluded cells are empty fields.
    pub fn write_ratio_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Invalid(format!("csv export: {e}"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        let header: Vec<String> = (0..self.grid).map(|j| format!("s{j}")).collect();
        w.write_record(std::iter::once("u".to_string()).chain(header)).map_err(io)?;
        for (i, row) in self.ratios.iter().enumerate() {
            let cells = row.iter().map(|c| c.map_or(String::new(), |q| format!("{q:.17e}")));
            w.write_record(std::iter::once(format!("u{i}")).chain(cells)).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv export: {e}")))?;
        Ok(())
    }

    /// `{K0, K1, Kbar_formula, Kbar_emp, pass}`.
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "K0": self.k0,
            "K1": self.k1,
            "Kbar_formula": self.kbar_formula,
            "Kbar_emp": self.kbar_emp,
            "pass": self.record.pass,
        })
    }
}

/// Constants feeding the separated-set sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichConstants {
    /// `K₀(r/2)`.
    pub k0_half: f64,
    /// `K₀(r)`.
    pub k0_full: f64,
    /// `K₁(r/2)`.
    pub k1: f64,
}

/// With `G = (−r/2, r/2)` and `K = [−r/4, r/4]` on both leaves of `R` and
/// maximal `(n,r)`-separated sets `E^u ⊂ K^u`, `E^s ⊂ K^s`, checks
/// `μ([G^u,G^s]) ≥ K₀(r/2)^{-1}Σ`, `μ([K^u,K^s]) ≤ K₀(r)Σ` over pairs, and
/// the leafwise analogues with `K₁`.
pub fn separated_sandwich_check(
    map: &HyperbolicMap,
    phi: &Potential,
    mu: &EmpiricalMeasure,
    rest: &Restriction,
    n: usize,
    k: SandwichConstants,
) -> Result<VerificationRecord> {
    let rect = rest.measure.rect;
    let r = rect.radius();
    let q = rect.q();
    let p = mu.pressure();
    let g_iv = Interval::symmetric(r / 2.0);
    let k_iv = Interval::symmetric(r / 4.0);
    let mut terms = Vec::new();
    let mut counts = Vec::new();
    for side in [Side::Unstable, Side::Stable] {
        let seg = LeafSegment::new(q, side, k_iv)?;
        let big = LeafSegment::new(q, side, rect.leaf(side).range())?;
        for t in [k_iv.lo, k_iv.hi] {
            let ball = leaf_ball_interval(map, &big, t, n, r)?;
            if !(ball.lo >= g_iv.lo && ball.hi <= g_iv.hi) {
                return Err(Error::Invalid(format!("depth {n} too small: B_n({t}, r) leaves G")));
            }
        }
        let set = maximal_separated_set(map, &seg, n, r)?;
        let direction = match side {
            Side::Unstable => Direction::Forward,
            Side::Stable => Direction::Backward,
        };
        let t: Vec<f64> = set
            .points
            .iter()
            .map(|x| Ok((birkhoff_sum(map, phi, x, n, direction)? - n as f64 * p).exp()))
            .collect::<Result<_>>()?;
        counts.push(set.len());
        terms.push(t.iter().sum::<f64>());
    }
    let (su, ss) = (terms[0], terms[1]);
    let rm = &rest.measure;
    let mu_g = rm.mass_of_box(&g_iv, &g_iv);
    let mu_k = rm.mass_of_box(&k_iv, &k_iv);
    let mut tally = Tally::default();
    let mut checks = serde_json::Map::new();
    let mut check = |name: &str, lhs: f64, rhs: f64| {
        // lhs ≥ rhs, compared in logs
        let margin = lhs.ln() - rhs.ln();
        tally.observe(margin, false);
        checks.insert(name.to_string(), json!({"lhs": lhs, "rhs": rhs}));
    };
    check("product_lower", mu_g, su * ss / k.k0_half);
    check("product_upper", k.k0_full * su * ss, mu_k);
    check("unstable_lower", rest.unstable.mass_open(&g_iv), su / k.k1);
    check("unstable_upper", k.k1 * su, rest.unstable.mass_open(&k_iv));
    check("stable_lower", rest.stable.mass_open(&g_iv), ss / k.k1);
    check("stable_upper", k.k1 * ss, rest.stable.mass_open(&k_iv));
    Ok(VerificationRecord::new("separated-sandwich")
        .with_param("n", n)
        .with_param("r", r)
        .with_param("separated_unstable", counts[0])
        .with_param("separated_stable", counts[1])
        .with_param("K0_half", k.k0_half)
        .with_param("K0_full", k.k0_full)
        .with_param("K1", k.k1)
        .with_param("inequalities", serde_json::Value::Object(checks))
        .with_tally(tally))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::gibbs_measure;
    use crate::hyperbolic::{make_rectangle, ConstantsConfig, HyperbolicConstants};
    use crate::product::restrict_and_project;
    use crate::torus::TorusPoint;

    fn lebesgue_restriction(period: usize) -> (HyperbolicMap, EmpiricalMeasure, Restriction) {
        let map = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&map, &ConstantsConfig::default()).unwrap();
        let mu = gibbs_measure(&map, &Potential::constant(0.0), period).unwrap();
        let rect = make_rectangle(&map, &consts, TorusPoint::new(0.21, 0.77), 0.02).unwrap();
        let rest = restrict_and_project(&map, &mu, &rect).unwrap();
        (map, mu, rest)
    }

    #[test]
    fn cell_lookup_is_half_open() {
        let e = edges(Interval::new(-1.0, 1.0), 4);
        assert_eq!(cell_of(&e, -1.0), Some(0));
        assert_eq!(cell_of(&e, -0.5), Some(1));
        assert_eq!(cell_of(&e, 0.999999), Some(3));
        assert_eq!(cell_of(&e, 1.0), None);
    }

    #[test]
    fn lebesgue_is_a_product() {
        let (map, mu, rest) = lebesgue_restriction(16);
        let scan = density_bound_check(&map, &mu, &rest, Some((50.0, 10.0)), DensityOptions::default()).unwrap();
        assert!(scan.record.pass, "{:?}", scan.record);
        assert_eq!(scan.excluded_cells, 0);
        assert!((scan.full_ratio - 1.0).abs() < 1e-12);
        for i in 0..8 {
            for j in 0..8 {
                let q = scan.ratios[i][j].unwrap();
                assert!((q - 1.0).abs() <= 3.0 / (scan.counts[i][j] as f64).sqrt(), "cell {i},{j}: {q}");
            }
        }
        assert!(scan.additivity_defect <= 1e-12);
        assert_eq!(scan.projection_disagreements, 0);
        let mut csv = Vec::new();
        scan.write_ratio_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.split("\r\n").filter(|l| !l.is_empty()).count(), 9);
        assert_eq!(scan.summary()["Kbar_formula"], 50.0 * 100.0);
    }

    #[test]
    fn tiny_formula_bound_is_violated() {
        let map = HyperbolicMap::cat();
        let consts = HyperbolicConstants::linear(&map, &ConstantsConfig::default()).unwrap();
        let mu = gibbs_measure(&map, &Potential::cosine(0.5), 16).unwrap();
        let rect = make_rectangle(&map, &consts, TorusPoint::new(0.21, 0.77), 0.02).unwrap();
        let rest = restrict_and_project(&map, &mu, &rect).unwrap();
        let scan = density_bound_check(&map, &mu, &rest, Some((1.0, 1.0)), DensityOptions::default()).unwrap();
        assert!(scan.kbar_emp > 1.0);
        assert!(!scan.record.pass && scan.cell_violations > 0);
    }

    #[test]
    fn sandwich_holds_with_loose_constants_and_fails_with_unit_ones() {
        let (map, mu, rest) = lebesgue_restriction(14);
        let phi = Potential::constant(0.0);
        let loose = SandwichConstants { k0_half: 1e4, k0_full: 1e4, k1: 1e3 };
        let rec = separated_sandwich_check(&map, &phi, &mu, &rest, 5, loose).unwrap();
        assert!(rec.pass, "{rec:?}");
        let unit = SandwichConstants { k0_half: 1.0, k0_full: 1.0, k1: 1.0 };
        let rec = separated_sandwich_check(&map, &phi, &mu, &rest, 5, unit).unwrap();
        assert!(!rec.pass);
        assert!(separated_sandwich_check(&map, &phi, &mu, &rest, 1, loose).is_err());
    }
}
