//! Python bindings: maps, potentials, periodic-orbit measures, the bracket,
//! the main checks and the verification runner.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use toral_gibbs::bowen::{ball_in_product_check, product_in_ball_check, separated_growth_check, InclusionOptions};
use toral_gibbs::gibbs::{self, EmpiricalMeasure, SamplingOptions};
use toral_gibbs::hyperbolic::{bracket_law_check, Interval};
use toral_gibbs::verify::{self, Command, RunConfig};
use toral_gibbs::{
    ConstantsConfig, Error, HyperbolicConstants, HyperbolicMap, IntMat2, LeafSegment, Potential, PotentialKind, Side,
    TorusPoint, Vec2,
};

create_exception!(toral_gibbs, HypothesisUnsatisfied, PyValueError);

fn err(e: Error) -> PyErr {
    match e {
        Error::HypothesisUnsatisfied(msg) => HypothesisUnsatisfied::new_err(msg),
        Error::Invalid(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn pt(p: (f64, f64)) -> TorusPoint {
    TorusPoint::new(p.0, p.1)
}

fn tup(p: &TorusPoint) -> (f64, f64) {
    (p.x1(), p.x2())
}

/// Hyperbolic toral map `p ↦ A p + ε g(p) mod 1`.
#[pyclass(name = "Map", frozen)]
struct PyMap {
    inner: HyperbolicMap,
}

#[pymethods]
impl PyMap {
    /// The cat map `[[2,1],[1,1]]`, optionally with the standard
    /// trigonometric perturbation of amplitude `epsilon`.
    #[staticmethod]
    #[pyo3(signature = (epsilon = 0.0))]
    fn cat(epsilon: f64) -> PyResult<Self> {
        let inner =
            if epsilon == 0.0 { HyperbolicMap::cat() } else { HyperbolicMap::perturbed_cat(epsilon).map_err(err)? };
        Ok(Self { inner })
    }

    /// Linear map of an integer matrix with determinant ±1.
    #[staticmethod]
    fn linear(matrix: [[i64; 2]; 2]) -> PyResult<Self> {
        let inner = HyperbolicMap::new(IntMat2(matrix), toral_gibbs::Perturbation::none()).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn is_linear(&self) -> bool {
        self.inner.is_linear()
    }

    #[getter]
    fn lambda_u(&self) -> f64 {
        self.inner.eigen().lambda_u
    }

    #[getter]
    fn lambda_s(&self) -> f64 {
        self.inner.eigen().lambda_s
    }

    /// `f^power(p)`.
    fn apply(&self, p: (f64, f64), power: i32) -> PyResult<(f64, f64)> {
        Ok(tup(&self.inner.apply(&pt(p), power).map_err(err)?))
    }

    fn orbit(&self, p: (f64, f64), length: usize) -> PyResult<Vec<(f64, f64)>> {
        Ok(self.inner.orbit(&pt(p), length, false).map_err(err)?.iter().map(tup).collect())
    }

    /// Hyperbolicity constants: closed form for linear maps, estimated
    /// otherwise.
    #[pyo3(signature = (quick = true))]
    fn constants(&self, quick: bool) -> PyResult<Constants> {
        let cfg = if quick { ConstantsConfig::quick() } else { ConstantsConfig::default() };
        let inner = if self.inner.is_linear() {
            HyperbolicConstants::linear(&self.inner, &cfg)
        } else {
            toral_gibbs::estimate_constants(&self.inner, &cfg).map(|(c, _)| c)
        }
        .map_err(err)?;
        Ok(Constants { inner })
    }

    fn __repr__(&self) -> String {
        let m = self.inner.matrix().0;
        format!("Map(matrix={m:?}, linear={})", self.inner.is_linear())
    }
}

#[pyclass(frozen)]
struct Constants {
    inner: HyperbolicConstants,
}

#[pymethods]
impl Constants {
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    fn omega(&self, r: f64) -> f64 {
        self.inner.omega.eval(r)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.inner)
    }
}

/// Potential built from a dict such as `{"kind": "constant", "value": 0.0}`
/// or `{"kind": "trigonometric", "terms": [...]}`.
#[pyclass(name = "Potential", frozen)]
struct PyPotential {
    inner: Potential,
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn constant(value: f64) -> Self {
        Self { inner: Potential::constant(value) }
    }

    /// `amplitude · cos(2π x₁)`.
    #[staticmethod]
    fn cosine(amplitude: f64) -> Self {
        Self { inner: Potential::cosine(amplitude) }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let kind: PotentialKind = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: Potential::new(kind).map_err(err)? })
    }

    fn __call__(&self, p: (f64, f64)) -> f64 {
        self.inner.eval(&pt(p))
    }

    #[getter]
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.inner)
    }
}

/// Equilibrium-state approximation by weighted periodic orbits of one period.
#[pyclass(frozen)]
struct Measure {
    inner: EmpiricalMeasure,
}

#[pymethods]
impl Measure {
    #[new]
    fn new(map: &PyMap, potential: &PyPotential, period: usize) -> PyResult<Self> {
        Ok(Self { inner: gibbs::gibbs_measure(&map.inner, &potential.inner, period).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn period(&self) -> usize {
        self.inner.period()
    }

    #[getter]
    fn pressure(&self) -> f64 {
        self.inner.pressure()
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points().iter().map(tup).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn invariance_defect(&self, map: &PyMap) -> f64 {
        self.inner.invariance_defect(&map.inner)
    }

    /// Mass of the open flat ball of radius `r` around `center`.
    fn ball_mass(&self, center: (f64, f64), r: f64) -> f64 {
        let c = pt(center);
        self.inner.measure_of(|p| toral_gibbs::torus_distance(p, &c) < r)
    }

    /// Empirical Gibbs constant `K(r)` over `depths`, as a record dict.
    #[pyo3(signature = (map, potential, r, depths, samples = 100, seed = 0, pressure_offset = 0.0))]
    #[allow(clippy::too_many_arguments)]
    fn gibbs_constant<'py>(
        &self,
        py: Python<'py>,
        map: &PyMap,
        potential: &PyPotential,
        r: f64,
        depths: Vec<usize>,
        samples: usize,
        seed: u64,
        pressure_offset: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let opts = SamplingOptions { sample_count: samples, seed };
        let est = gibbs::gibbs_constant_estimate(
            &map.inner,
            &potential.inner,
            &self.inner,
            r,
            &depths,
            opts,
            pressure_offset,
        )
        .map_err(err)?;
        json(py, &est.record)
    }
}

/// Number of fixed points of `A^n` on the torus, `|det(A^n − I)|`.
#[pyfunction]
fn fixed_point_count(matrix: [[i64; 2]; 2], n: usize) -> PyResult<u64> {
    gibbs::fixed_point_count(IntMat2(matrix), n).map_err(err)
}

/// Points of period `n` (not necessarily least).
#[pyfunction]
fn periodic_points(map: &PyMap, n: usize) -> PyResult<Vec<(f64, f64)>> {
    Ok(gibbs::periodic_points(&map.inner, n).map_err(err)?.points.iter().map(tup).collect())
}

/// `P_n = (1/n) log Σ_{f^n x = x} e^{S_n φ(x)}`.
#[pyfunction]
fn pressure(map: &PyMap, potential: &PyPotential, n: usize) -> PyResult<f64> {
    gibbs::pressure_estimate(&map.inner, &potential.inner, n).map_err(err)
}

/// `[x, y]`: the point on the local stable leaf of `x` and the local
/// unstable leaf of `y`.
#[pyfunction]
fn bracket(map: &PyMap, constants: &Constants, x: (f64, f64), y: (f64, f64)) -> PyResult<(f64, f64)> {
    Ok(tup(&toral_gibbs::bracket(&map.inner, &pt(x), &pt(y), &constants.inner).map_err(err)?))
}

#[pyfunction]
fn torus_distance(p: (f64, f64), q: (f64, f64)) -> f64 {
    toral_gibbs::torus_distance(&pt(p), &pt(q))
}

#[pyfunction]
#[pyo3(signature = (map, constants, n = 3, samples = 1000, seed = 0))]
fn check_bracket_laws<'py>(
    py: Python<'py>,
    map: &PyMap,
    constants: &Constants,
    n: usize,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    json(py, &bracket_law_check(&map.inner, &constants.inner, n, samples, seed))
}

/// Both Bowen-ball inclusions for the pair `(x, x + offset)`; returns the
/// two records.
#[pyfunction]
#[pyo3(signature = (map, constants, x, offset, n, m, r_outer, r_inner, samples = 10_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn check_inclusions<'py>(
    py: Python<'py>,
    map: &PyMap,
    constants: &Constants,
    x: (f64, f64),
    offset: (f64, f64),
    n: usize,
    m: usize,
    r_outer: f64,
    r_inner: f64,
    samples: usize,
    seed: u64,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let x = pt(x);
    let y = x.translate(Vec2::new(offset.0, offset.1));
    let opts = InclusionOptions { sample_count: samples, seed, enforce_hypotheses: true };
    let a = ball_in_product_check(&map.inner, &constants.inner, &x, &y, n, m, r_outer, None, &opts).map_err(err)?;
    let b = product_in_ball_check(&map.inner, &constants.inner, &x, &y, n, m, r_inner, &opts).map_err(err)?;
    Ok((json(py, &a)?, json(py, &b)?))
}

/// Growth of maximal `(n, r)`-separated sets on a leaf segment of
/// half-length `r` through `base`.
#[pyfunction]
#[pyo3(signature = (map, base, r, depths, unstable = true))]
fn check_separated_growth<'py>(
    py: Python<'py>,
    map: &PyMap,
    base: (f64, f64),
    r: f64,
    depths: Vec<usize>,
    unstable: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let side = if unstable { Side::Unstable } else { Side::Stable };
    let leaf = LeafSegment::new(pt(base), side, Interval::symmetric(r)).map_err(err)?;
    json(py, &separated_growth_check(&map.inner, &leaf, r, &depths).map_err(err)?)
}

/// Runs one verification command (or `"all"`) on a TOML config and returns
/// `(exit_code, report)`. With `out_dir` the report and its files are
/// written there.
#[pyfunction]
#[pyo3(signature = (config_toml, command = "all", out_dir = None))]
fn run_verification<'py>(
    py: Python<'py>,
    config_toml: &str,
    command: &str,
    out_dir: Option<std::path::PathBuf>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let cfg = RunConfig::from_toml_str(config_toml).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let command: Command = command.parse().map_err(err)?;
    let outcome = py.detach(|| verify::run(command, &cfg));
    if let Some(dir) = out_dir {
        outcome.write(&dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    }
    Ok((outcome.exit_code, json(py, &outcome.report)?))
}

#[pymodule]
#[pyo3(name = "toral_gibbs")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<Constants>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<Measure>()?;
    m.add_function(wrap_pyfunction!(fixed_point_count, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_points, m)?)?;
    m.add_function(wrap_pyfunction!(pressure, m)?)?;
    m.add_function(wrap_pyfunction!(bracket, m)?)?;
    m.add_function(wrap_pyfunction!(torus_distance, m)?)?;
    m.add_function(wrap_pyfunction!(check_bracket_laws, m)?)?;
    m.add_function(wrap_pyfunction!(check_inclusions, m)?)?;
    m.add_function(wrap_pyfunction!(check_separated_growth, m)?)?;
    m.add_function(wrap_pyfunction!(run_verification, m)?)?;
    m.add("HypothesisUnsatisfied", m.py().get_type::<HypothesisUnsatisfied>())?;
    Ok(())
}
