//! Orchestration of the checks behind the command-line tool: builds the map,
//! constants and measures once, runs the requested commands, and collects
//! the report with its CSV tables and SVG charts.

pub mod config;
pub mod plot;
pub mod report;

use std::path::Path;
use std::str::FromStr;

pub use config::{ConfigError, Depths, RunConfig};
pub use report::{CheckEntry, PotentialDiagnostics, VerificationReport};

use crate::bowen::{
    ball_in_product_check, conjugation_identity_check, product_in_ball_check, sandwich_check, separated_growth_check,
    InclusionOptions,
};
use crate::dynamics::HyperbolicMap;
use crate::error::{Error, Result};
use crate::gibbs::{
    bowen_property_check, gibbs_constant_estimate, gibbs_measure, DepthStats, EmpiricalMeasure, SamplingOptions,
    TableEntry,
};
use crate::hyperbolic::{
    audit_constants, bracket_law_check, estimate_constants, make_rectangle, ConstantsConfig, HyperbolicConstants,
    Interval, LeafSegment, Side,
};
use crate::linalg::Vec2;
use crate::potential::Potential;
use crate::product::{
    density_bound_check, leafwise_gibbs_check, product_gibbs_check, restrict_and_project, separated_sandwich_check,
    DensityOptions, LeafGibbsEstimate, ProductGibbsEstimate, Restriction, SandwichConstants,
};
use crate::record::VerificationRecord;
use plot::Series;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

const ANCHOR_CONSTANTS: &str = "hyperbolicity constants: contraction, bracket distance, modulus ω, ε₁";
const ANCHOR_BRACKET: &str = "bracket equivariance f^n[x,y] = [f^n x, f^n y] and composition [[x,y],[x',y']] = [x,y']";
const ANCHOR_CONJUGATION: &str = "two-sided Bowen ball as a shifted forward ball";
const ANCHOR_TWO_SIDED_IN_PRODUCT: &str = "two-sided Bowen ball inside the bracket of leafwise balls";
const ANCHOR_PRODUCT_IN_TWO_SIDED: &str = "bracket of leafwise balls inside the two-sided Bowen ball";
const ANCHOR_SANDWICH: &str = "bracket of leafwise balls between two-sided balls";
const ANCHOR_PROBE: &str = "inner radius probe: the inclusion must fail at r₁ = 2r";
const ANCHOR_MEASURE: &str = "periodic-orbit Gibbs measure";
const ANCHOR_GIBBS: &str = "Gibbs property of the measure";
const ANCHOR_BOWEN: &str = "Bowen property from the Gibbs property";
const ANCHOR_LEAF: &str = "leafwise Gibbs property of the projected measures";
const ANCHOR_PRODUCT: &str = "Gibbs property of brackets of leafwise balls";
const ANCHOR_DENSITY: &str = "uniformly bounded density against the product of leaf measures";
const ANCHOR_SEPARATED_SANDWICH: &str = "separated-set bounds on product sets";
const ANCHOR_SEPARATED_GROWTH: &str = "separated-set counts on the unstable leaf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Command {
    AuditConstants,
    CheckBracket,
    CheckInclusions,
    EstimateGibbs,
    CheckBowenProperty,
    CheckLeafGibbs,
    CheckProductGibbs,
    CheckDensity,
    All,
}

impl Command {
    /// Every command except `all`, in the order `all` runs them.
    pub const EACH: [Command; 8] = [
        Command::AuditConstants,
        Command::CheckBracket,
        Command::CheckInclusions,
        Command::EstimateGibbs,
        Command::CheckBowenProperty,
        Command::CheckLeafGibbs,
        Command::CheckProductGibbs,
        Command::CheckDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::AuditConstants => "audit-constants",
            Command::CheckBracket => "check-bracket",
            Command::CheckInclusions => "check-inclusions",
            Command::EstimateGibbs => "estimate-gibbs",
            Command::CheckBowenProperty => "check-bowen-property",
            Command::CheckLeafGibbs => "check-leaf-gibbs",
            Command::CheckProductGibbs => "check-product-gibbs",
            Command::CheckDensity => "check-density",
            Command::All => "all",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::EACH
            .into_iter()
            .chain([Command::All])
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown command {s:?}")))
    }
}

/// Report, auxiliary files (name, contents) and exit status of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: VerificationReport,
    pub files: Vec<(String, Vec<u8>)>,
    pub hypothesis_failures: Vec<String>,
    pub exit_code: i32,
}

impl Outcome {
    /// Writes `report.json` and the auxiliary files into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        std::fs::write(dir.join("report.json"), self.report.to_json())
    }
}

struct PotentialState {
    label: String,
    phi: Potential,
    measure: Option<EmpiricalMeasure>,
    restriction: Option<Restriction>,
    leaf: Option<Option<LeafGibbsEstimate>>,
    product: Option<(Option<ProductGibbsEstimate>, Option<ProductGibbsEstimate>)>,
    diag: PotentialDiagnostics,
}

struct Session<'a> {
    cfg: &'a RunConfig,
    map: HyperbolicMap,
    consts: HyperbolicConstants,
    audit: Option<Vec<VerificationRecord>>,
    pots: Vec<PotentialState>,
    checks: Vec<CheckEntry>,
    errors: Vec<String>,
    hypothesis: Vec<String>,
    files: Vec<(String, Vec<u8>)>,
    separated_done: bool,
}

fn constants_config(cfg: &RunConfig) -> ConstantsConfig {
    ConstantsConfig { seed: cfg.seed, ..cfg.constants.clone() }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    // RFC 4180 line endings
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn opt_num(v: f64, present: bool) -> String {
    if present && v.is_finite() {
        format!("{v:.17e}")
    } else {
        String::new()
    }
}

impl<'a> Session<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let map = cfg.map.build()?;
        let ccfg = constants_config(cfg);
        let (consts, audit) = if map.is_linear() {
            (HyperbolicConstants::linear(&map, &ccfg)?, None)
        } else {
            let (c, recs) = estimate_constants(&map, &ccfg)?;
            (c, Some(recs))
        };
        let pots = cfg
            .potentials
            .iter()
            .enumerate()
            .map(|(i, phi)| {
                let label = format!("phi{i}");
                PotentialState {
                    label: label.clone(),
                    phi: phi.clone(),
                    measure: None,
                    restriction: None,
                    leaf: None,
                    product: None,
                    diag: PotentialDiagnostics { potential: label, spec: Some(phi.clone()), ..Default::default() },
                }
            })
            .collect();
        Ok(Self {
            cfg,
            map,
            consts,
            audit,
            pots,
            checks: Vec::new(),
            errors: Vec::new(),
            hypothesis: Vec::new(),
            files: Vec::new(),
            separated_done: false,
        })
    }

    fn opts(&self) -> SamplingOptions {
        SamplingOptions { sample_count: self.cfg.geometry.sample_count, seed: self.cfg.seed }
    }

    fn push(&mut self, anchor: &str, pot: Option<usize>, record: VerificationRecord) {
        let potential = pot.map(|i| self.pots[i].label.clone());
        self.checks.push(CheckEntry { anchor: anchor.into(), potential, record });
    }

    /// Records a check that could not run.
    fn fail(&mut self, anchor: &str, pot: Option<usize>, check: &str, err: Error) {
        let label = pot.map_or(String::new(), |i| format!(" [{}]", self.pots[i].label));
        let msg = err.to_string();
        let mut record = VerificationRecord::new(check).fail_unless(false);
        if let Error::HypothesisUnsatisfied(_) = err {
            self.hypothesis.push(format!("{check}{label}: {msg}"));
            record.set_param("hypothesis_unsatisfied", msg);
        } else {
            self.errors.push(format!("{check}{label}: {msg}"));
            record.set_param("error", msg);
        }
        self.push(anchor, pot, record);
    }

    fn attempt<T>(&mut self, anchor: &str, pot: Option<usize>, check: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(anchor, pot, check, e);
                None
            }
        }
    }

    fn run(&mut self, command: Command) {
        match command {
            Command::All => {
                for c in Command::EACH {
                    self.run(c);
                }
            }
            Command::AuditConstants => self.audit_constants(),
            Command::CheckBracket => self.check_bracket(),
            Command::CheckInclusions => self.check_inclusions(),
            Command::EstimateGibbs => (0..self.pots.len()).for_each(|i| self.estimate_gibbs(i)),
            Command::CheckBowenProperty => (0..self.pots.len()).for_each(|i| self.check_bowen(i)),
            Command::CheckLeafGibbs => (0..self.pots.len()).for_each(|i| {
                self.ensure_leaf(i);
            }),
            Command::CheckProductGibbs => (0..self.pots.len()).for_each(|i| {
                self.ensure_product(i);
            }),
            Command::CheckDensity => {
                (0..self.pots.len()).for_each(|i| self.check_density(i));
                self.separated_growth();
            }
        }
    }

    fn audit_constants(&mut self) {
        let recs = match self.audit.take() {
            Some(r) => r,
            None => audit_constants(&self.map, &self.consts, &constants_config(self.cfg)),
        };
        for r in recs {
            self.push(ANCHOR_CONSTANTS, None, r);
        }
    }

    fn check_bracket(&mut self) {
        let b = &self.cfg.bracket;
        let rec = bracket_law_check(&self.map, &self.consts, b.n, b.samples, self.cfg.seed);
        self.push(ANCHOR_BRACKET, None, rec);
    }

    fn check_inclusions(&mut self) {
        let inc = self.cfg.inclusions.clone();
        let x = self.cfg.geometry.base_point();
        let y = x.translate(Vec2::new(inc.offset[0], inc.offset[1]));
        let opts = InclusionOptions { sample_count: inc.samples, seed: self.cfg.seed, enforce_hypotheses: true };
        let r = conjugation_identity_check(&self.map, &x, inc.n, inc.m, inc.r_outer, inc.samples, self.cfg.seed);
        if let Some(rec) = self.attempt(ANCHOR_CONJUGATION, None, "conjugation-identity", r) {
            self.push(ANCHOR_CONJUGATION, None, rec);
        }
        let (map, consts) = (&self.map, &self.consts);
        let r = ball_in_product_check(map, consts, &x, &y, inc.n, inc.m, inc.r_outer, None, &opts);
        if let Some(rec) = self.attempt(ANCHOR_TWO_SIDED_IN_PRODUCT, None, "inclusion-two-sided-in-product", r) {
            self.push(ANCHOR_TWO_SIDED_IN_PRODUCT, None, rec);
        }
        let (map, consts) = (&self.map, &self.consts);
        let r = product_in_ball_check(map, consts, &x, &y, inc.n, inc.m, inc.r_inner, &opts);
        if let Some(rec) = self.attempt(ANCHOR_PRODUCT_IN_TWO_SIDED, None, "inclusion-product-in-two-sided", r) {
            self.push(ANCHOR_PRODUCT_IN_TWO_SIDED, None, rec);
        }
        let (map, consts) = (&self.map, &self.consts);
        let r = sandwich_check(map, consts, &x, &y, inc.n, inc.m, inc.r_inner, &opts);
        if let Some(rec) = self.attempt(ANCHOR_SANDWICH, None, "inclusion-sandwich", r) {
            self.push(ANCHOR_SANDWICH, None, rec);
        }
        let probe = InclusionOptions { enforce_hypotheses: false, ..opts };
        let (map, consts) = (&self.map, &self.consts);
        let r = ball_in_product_check(map, consts, &x, &y, inc.n, inc.m, inc.r_outer, Some(2.0 * inc.r_outer), &probe);
        if let Some(mut rec) = self.attempt(ANCHOR_PROBE, None, "inclusion-inner-radius-probe", r) {
            rec.check = "inclusion-inner-radius-probe".into();
            rec.set_param("expects_violations", true);
            rec.pass = rec.violations > 0;
            self.push(ANCHOR_PROBE, None, rec);
        }
    }

    fn ensure_measure(&mut self, i: usize) -> bool {
        if self.pots[i].measure.is_some() {
            return true;
        }
        let r = gibbs_measure(&self.map, &self.pots[i].phi, self.cfg.measure.period);
        match self.attempt(ANCHOR_MEASURE, Some(i), "gibbs-measure", r) {
            Some(mu) => {
                self.pots[i].diag.pressure = Some(mu.pressure());
                self.pots[i].measure = Some(mu);
                true
            }
            None => false,
        }
    }

    fn gibbs_files(&mut self, i: usize, depths: &[DepthStats]) {
        let label = self.pots[i].label.clone();
        let rows: Vec<Vec<String>> = depths
            .iter()
            .map(|d| {
                let has = d.has_ratios();
                vec![
                    d.n.to_string(),
                    format!("{:.17e}", d.linear_area),
                    d.included.to_string(),
                    d.zero_mass.to_string(),
                    opt_num(d.min_ratio, has),
                    opt_num(d.max_ratio, has),
                    opt_num(d.sup, has),
                ]
            })
            .collect();
        let header = ["n", "linear_area", "included", "zero_mass", "min_ratio", "max_ratio", "sup"];
        self.files.push((format!("gibbs_ratio_{label}.csv"), csv_bytes(&header, &rows)));
        let pick = |f: fn(&DepthStats) -> f64| -> Vec<(f64, f64)> {
            depths.iter().filter(|d| d.included && d.has_ratios()).map(|d| (d.n as f64, f(d))).collect()
        };
        let series = [
            Series::new("max ratio", pick(|d| d.max_ratio)),
            Series::new("min ratio", pick(|d| d.min_ratio)),
            Series::new("sup max(ratio, 1/ratio)", pick(|d| d.sup)),
        ];
        let svg = plot::line_chart(&format!("Gibbs ratio vs n ({label})"), "n", "ratio", &series, true);
        self.files.push((format!("gibbs_ratio_{label}.svg"), svg.into_bytes()));
    }

    fn estimate_gibbs(&mut self, i: usize) {
        if !self.ensure_measure(i) {
            return;
        }
        let g = &self.cfg.geometry;
        let p = &self.pots[i];
        let r = gibbs_constant_estimate(
            &self.map,
            &p.phi,
            p.measure.as_ref().expect("measure"),
            g.gibbs_r,
            &g.n_range.0,
            self.opts(),
            self.cfg.overrides.pressure_offset,
        );
        let Some(est) = self.attempt(ANCHOR_GIBBS, Some(i), "gibbs-constant", r) else { return };
        let d = &mut self.pots[i].diag;
        d.k_table.push(TableEntry { r: est.r, value: est.k });
        self.gibbs_files(i, &est.depths);
        self.push(ANCHOR_GIBBS, Some(i), est.record);
    }

    fn check_bowen(&mut self, i: usize) {
        if !self.ensure_measure(i) {
            return;
        }
        let g = &self.cfg.geometry;
        let p = &self.pots[i];
        let mu = p.measure.as_ref().expect("measure");
        let r = bowen_property_check(&self.map, &self.consts, &p.phi, mu, g.bowen_r, &g.n_range.0, self.opts());
        let Some((bowen, kz, kout)) = self.attempt(ANCHOR_BOWEN, Some(i), "bowen-property", r) else { return };
        let d = &mut self.pots[i].diag;
        d.k_table.push(TableEntry { r: kz.r, value: kz.k });
        d.k_table.push(TableEntry { r: kout.r, value: kout.k });
        d.l_table.push(TableEntry { r: bowen.r, value: bowen.l });
        self.push(ANCHOR_GIBBS, Some(i), kz.record);
        self.push(ANCHOR_GIBBS, Some(i), kout.record);
        self.push(ANCHOR_BOWEN, Some(i), bowen.record);
    }

    fn ensure_restriction(&mut self, i: usize) -> bool {
        if self.pots[i].restriction.is_some() {
            return true;
        }
        if !self.ensure_measure(i) {
            return false;
        }
        let g = &self.cfg.geometry;
        let mu = self.pots[i].measure.as_ref().expect("measure");
        let r = make_rectangle(&self.map, &self.consts, g.base_point(), g.r)
            .and_then(|rect| restrict_and_project(&self.map, mu, &rect));
        match self.attempt(ANCHOR_DENSITY, Some(i), "restrict-and-project", r) {
            Some(rest) => {
                self.pots[i].restriction = Some(rest);
                true
            }
            None => false,
        }
    }

    fn ensure_leaf(&mut self, i: usize) -> Option<f64> {
        if self.pots[i].leaf.is_none() {
            let est = if self.ensure_restriction(i) {
                let g = &self.cfg.geometry;
                let (rb1, rb2) = g.r_bar();
                let p = &self.pots[i];
                let r = leafwise_gibbs_check(
                    &self.map,
                    &self.consts,
                    &p.phi,
                    p.measure.as_ref().expect("measure"),
                    p.restriction.as_ref().expect("restriction"),
                    rb1,
                    rb2,
                    &g.m_range.0,
                    self.opts(),
                );
                self.attempt(ANCHOR_LEAF, Some(i), "leaf-gibbs", r)
            } else {
                None
            };
            if let Some(e) = &est {
                self.pots[i].diag.k1 = Some(e.k1);
                self.push(ANCHOR_LEAF, Some(i), e.record.clone());
            }
            self.pots[i].leaf = Some(est);
        }
        self.pots[i].leaf.as_ref().and_then(|e| e.as_ref()).map(|e| e.k1)
    }

    fn ensure_product(&mut self, i: usize) -> (Option<f64>, Option<f64>) {
        if self.pots[i].product.is_none() {
            let mut out = (None, None);
            if self.ensure_measure(i) {
                let g = &self.cfg.geometry;
                for (slot, r) in [(0, g.r / 2.0), (1, g.r)] {
                    let p = &self.pots[i];
                    let mu = p.measure.as_ref().expect("measure");
                    let res = product_gibbs_check(&self.map, &self.consts, &p.phi, mu, r, &g.totals.0, self.opts());
                    let est = self.attempt(ANCHOR_PRODUCT, Some(i), "product-gibbs", res);
                    if let Some(e) = &est {
                        self.push(ANCHOR_PRODUCT, Some(i), e.record.clone());
                    }
                    if slot == 0 {
                        out.0 = est;
                    } else {
                        out.1 = est;
                    }
                }
            }
            self.pots[i].diag.k0_half = out.0.as_ref().map(|e| e.k0);
            self.pots[i].diag.k0_full = out.1.as_ref().map(|e| e.k0);
            self.pots[i].product = Some(out);
        }
        let d = &self.pots[i].diag;
        (d.k0_half, d.k0_full)
    }

    fn check_density(&mut self, i: usize) {
        let k1 = self.ensure_leaf(i);
        let (k0_half, k0_full) = self.ensure_product(i);
        if !self.ensure_restriction(i) {
            return;
        }
        let g = &self.cfg.geometry;
        let p = &self.pots[i];
        let (mu, rest) = (p.measure.as_ref().expect("measure"), p.restriction.as_ref().expect("restriction"));
        let constants = k0_half.zip(k1);
        let opts = DensityOptions {
            grid: g.grid_resolution,
            union_samples: g.union_samples,
            audit_atoms: 0,
            seed: self.cfg.seed,
        };
        let r = density_bound_check(&self.map, mu, rest, constants, opts);
        let sandwich = match (k0_half, k0_full, k1) {
            (Some(k0_half), Some(k0_full), Some(k1)) => Some(separated_sandwich_check(
                &self.map,
                &p.phi,
                mu,
                rest,
                g.sandwich_depth,
                SandwichConstants { k0_half, k0_full, k1 },
            )),
            _ => None,
        };
        if let Some(scan) = self.attempt(ANCHOR_DENSITY, Some(i), "density-bound", r) {
            let label = self.pots[i].label.clone();
            let mut csv = Vec::new();
            if scan.write_ratio_csv(&mut csv).is_ok() {
                self.files.push((format!("density_cells_{label}.csv"), csv));
            }
            let summary = serde_json::to_string_pretty(&scan.summary()).expect("summary") + "\n";
            self.files.push((format!("density_summary_{label}.json"), summary.into_bytes()));
            let title = format!("cell ratio μ(E)/(μu⊗μs)(E) ({label})");
            let svg = plot::heatmap(&title, "unstable cell", "stable cell", &scan.ratios);
            self.files.push((format!("density_heatmap_{label}.svg"), svg.into_bytes()));
            let d = &mut self.pots[i].diag;
            d.kbar_emp = Some(scan.kbar_emp);
            d.kbar_formula = scan.kbar_formula;
            let mut record = scan.record;
            if constants.is_none() {
                record.set_param("missing_constants", "K0(r/2) or K1 unavailable");
                record.pass = false;
            }
            self.push(ANCHOR_DENSITY, Some(i), record);
        }
        match sandwich {
            Some(r) => {
                if let Some(rec) = self.attempt(ANCHOR_SEPARATED_SANDWICH, Some(i), "separated-sandwich", r) {
                    self.push(ANCHOR_SEPARATED_SANDWICH, Some(i), rec);
                }
            }
            None => self.fail(
                ANCHOR_SEPARATED_SANDWICH,
                Some(i),
                "separated-sandwich",
                Error::Invalid("K0 and K1 estimates unavailable".into()),
            ),
        }
    }

    fn separated_growth(&mut self) {
        if self.separated_done {
            return;
        }
        self.separated_done = true;
        let sep = self.cfg.separated.clone();
        let q = self.cfg.geometry.base_point();
        let r = LeafSegment::new(q, Side::Unstable, Interval::symmetric(sep.r))
            .and_then(|leaf| separated_growth_check(&self.map, &leaf, sep.r, &sep.n_range.0));
        let Some(rec) = self.attempt(ANCHOR_SEPARATED_GROWTH, None, "separated-growth", r) else { return };
        let counts: Vec<u64> =
            rec.params["counts"].as_array().map_or(Vec::new(), |a| a.iter().filter_map(|v| v.as_u64()).collect());
        let rows: Vec<Vec<String>> =
            sep.n_range.0.iter().zip(&counts).map(|(n, c)| vec![n.to_string(), c.to_string()]).collect();
        self.files.push(("separated_counts.csv".into(), csv_bytes(&["n", "count"], &rows)));
        let lu = self.map.eigen().lambda_u.abs();
        let pts: Vec<(f64, f64)> = sep.n_range.0.iter().zip(&counts).map(|(&n, &c)| (n as f64, c as f64)).collect();
        let reference: Vec<(f64, f64)> = match pts.first() {
            Some(&(n0, c0)) => pts.iter().map(|&(n, _)| (n, c0 * lu.powf(n - n0))).collect(),
            None => Vec::new(),
        };
        let series =
            [Series::new("maximal separated set", pts), Series::new("λ_u growth from the first count", reference)];
        let svg = plot::line_chart("separated-set counts vs n", "n", "count", &series, true);
        self.files.push(("separated_counts.svg".into(), svg.into_bytes()));
        self.push(ANCHOR_SEPARATED_GROWTH, None, rec);
    }

    fn finish(mut self, command: Command) -> Outcome {
        let rows: Vec<Vec<String>> = self
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.record.check.clone(),
                    c.potential.clone().unwrap_or_default(),
                    c.anchor.clone(),
                    c.record.samples.to_string(),
                    c.record.violations.to_string(),
                    format!("{:.17e}", c.record.worst_margin),
                    c.record.pass.to_string(),
                ]
            })
            .collect();
        let header = ["check", "potential", "anchor", "samples", "violations", "worst_margin", "pass"];
        self.files.push(("checks.csv".into(), csv_bytes(&header, &rows)));
        let mut report = VerificationReport {
            command: command.name().into(),
            config: self.cfg.clone(),
            constants: Some(self.consts.clone()),
            checks: self.checks,
            diagnostics: self.pots.into_iter().map(|p| p.diag).collect(),
            errors: self.errors,
            files: self.files.iter().map(|f| f.0.clone()).collect(),
            pass: false,
        };
        report.pass = report.overall_pass();
        let exit_code = if !self.hypothesis.is_empty() {
            EXIT_HYPOTHESIS
        } else if report.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        };
        Outcome { report, files: self.files, hypothesis_failures: self.hypothesis, exit_code }
    }
}

/// Runs `command` under `cfg`. Setup failures (an invalid map or a failed
/// constants audit) produce a report with no checks and exit status 1, or
/// 3 for an unsatisfied hypothesis.
pub fn run(command: Command, cfg: &RunConfig) -> Outcome {
    match Session::new(cfg) {
        Ok(mut s) => {
            s.run(command);
            s.finish(command)
        }
        Err(e) => {
            let hyp = matches!(e, Error::HypothesisUnsatisfied(_));
            let report = VerificationReport {
                command: command.name().into(),
                config: cfg.clone(),
                constants: None,
                checks: Vec::new(),
                diagnostics: Vec::new(),
                errors: vec![format!("setup: {e}")],
                files: Vec::new(),
                pass: false,
            };
            Outcome {
                report,
                files: Vec::new(),
                hypothesis_failures: if hyp { vec![e.to_string()] } else { Vec::new() },
                exit_code: if hyp { EXIT_HYPOTHESIS } else { EXIT_FAIL },
            }
        }
    }
}
