//! Python bindings: instance generation and parsing, the MH/MH+ pipeline,
//! solution validation, and the exact reference solve for tiny instances.
//!
//! The module mirrors the CLI surface; artifacts cross the boundary as the
//! same JSON documents the CLI reads and writes, so files produced on either
//! side are interchangeable.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spirp::instance::{generate_instance, Instance, Recipe, RecipeId, Requirement};
use spirp::mip_search::LbMode;
use spirp::orchestrator::{run, solve_ir_exact, RunParams, Variant};
use spirp::report::render_report;
use spirp::solution::{check_feasibility, evaluate_cost, CompleteSolution};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_variant(s: &str) -> PyResult<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "mh" => Ok(Variant::Mh),
        "mh+" => Ok(Variant::MhPlus),
        other => Err(value_err(format!("unknown variant `{other}` (use mh or mh+)"))),
    }
}

fn parse_lb_mode(s: &str) -> PyResult<LbMode> {
    match s.to_ascii_lowercase().as_str() {
        "literal" => Ok(LbMode::Literal),
        "ceiling" => Ok(LbMode::Ceiling),
        other => Err(value_err(format!(
            "unknown lb mode `{other}` (use literal or ceiling)"
        ))),
    }
}

/// A SPIRP instance, either parsed from the JSON format or generated from a
/// benchmark recipe.
#[pyclass(frozen, name = "Instance")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// Parses the JSON instance format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Instance::parse(text).map(|inner| PyInstance { inner }).map_err(value_err)
    }

    /// Generates a benchmark-recipe instance. `recipe` is one of
    /// benchmark1-fio, benchmark1-dob, benchmark2, benchmark3; exactly one of
    /// `requirement` (low/medium/high) or `r` (liters per day) must be given.
    #[staticmethod]
    #[pyo3(signature = (recipe, price, seed=0, n=None, accumulation=30, requirement=None, r=None))]
    fn generate(
        recipe: &str,
        price: f64,
        seed: u64,
        n: Option<usize>,
        accumulation: u32,
        requirement: Option<&str>,
        r: Option<f64>,
    ) -> PyResult<Self> {
        let id = RecipeId::parse(recipe).map_err(value_err)?;
        let requirement = match (requirement, r) {
            (Some(level), None) => match level.to_ascii_lowercase().as_str() {
                "low" => Requirement::Low,
                "medium" => Requirement::Medium,
                "high" => Requirement::High,
                other => return Err(value_err(format!("unknown requirement level `{other}`"))),
            },
            (None, Some(value)) => Requirement::Value(value),
            (None, None) => return Err(value_err("one of requirement or r is required")),
            (Some(_), Some(_)) => {
                return Err(value_err("requirement and r are mutually exclusive"))
            }
        };
        let recipe = Recipe { id, n, accumulation, requirement, price };
        generate_instance(&recipe, seed).map(|inner| PyInstance { inner }).map_err(value_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau
    }

    #[getter]
    fn capacity(&self) -> f64 {
        self.inner.capacity
    }

    /// Serializes to the JSON instance format the CLI reads.
    fn to_json(&self) -> String {
        self.inner.serialize()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(name='{}', n={}, tau={})",
            self.inner.name, self.inner.n, self.inner.tau
        )
    }
}

/// Outcome of one solver run: bounds, gap, timing, and the two artifacts
/// (report and solution) as JSON strings.
#[pyclass(frozen, name = "RunResult")]
struct PyRunResult {
    #[pyo3(get)]
    variant: String,
    /// Heuristic objective z̄.
    #[pyo3(get)]
    z: f64,
    /// Relaxation bound z̲.
    #[pyo3(get)]
    lower_bound: f64,
    /// A-posteriori gap 100·(z̄ − z̲)/z̄.
    #[pyo3(get)]
    gap: f64,
    /// Total virtual solve time in seconds.
    #[pyo3(get)]
    total_time: f64,
    #[pyo3(get)]
    report_json: String,
    #[pyo3(get)]
    solution_json: String,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(variant='{}', z={}, lower_bound={}, gap={})",
            self.variant, self.z, self.lower_bound, self.gap
        )
    }
}

/// Runs the matheuristic (variant "mh" or "mh+") on an instance.
#[pyfunction]
#[pyo3(signature = (instance, variant="mh+", time_limit=60.0, delta=5.0, elite_k=1, lb_mode="literal", seed=0))]
fn solve(
    instance: &PyInstance,
    variant: &str,
    time_limit: f64,
    delta: f64,
    elite_k: usize,
    lb_mode: &str,
    seed: u64,
) -> PyResult<PyRunResult> {
    let variant = parse_variant(variant)?;
    let params = RunParams {
        delta,
        elite_complete_k: elite_k,
        irr_time_limit: time_limit,
        mip_time_limit: time_limit,
        lb_mode: parse_lb_mode(lb_mode)?,
        seed,
    };
    let report = run(&instance.inner, variant, &params).map_err(runtime_err)?;
    let solution_json = report.best.serialize(&instance.inner).map_err(runtime_err)?;
    Ok(PyRunResult {
        variant: report.variant.to_string(),
        z: report.upper_bound,
        lower_bound: report.lower_bound,
        gap: report.gap,
        total_time: report.times.total,
        report_json: render_report(&report),
        solution_json,
    })
}

/// Checks a solution file against its instance. Returns a list of violation
/// messages; an empty list means the solution is feasible and its claimed
/// cost matches the recomputation.
#[pyfunction]
fn validate(instance: &PyInstance, solution_json: &str) -> PyResult<Vec<String>> {
    let (solution, claimed) =
        CompleteSolution::parse(solution_json, &instance.inner).map_err(value_err)?;
    let report = check_feasibility(&solution, &instance.inner);
    let mut out: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    let recomputed = evaluate_cost(&solution, &instance.inner).map_err(value_err)?;
    if (claimed.total - recomputed.total).abs() > 1e-6 {
        out.push(format!(
            "cost mismatch: file claims {} but recomputation gives {}",
            claimed.total, recomputed.total
        ));
    }
    Ok(out)
}

/// Solves the exact IR formulation and returns its optimum. Guarded to tiny
/// instances (n ≤ 8, tau ≤ 3) unless `allow_large`.
#[pyfunction]
#[pyo3(signature = (instance, time_limit=600.0, allow_large=false))]
fn solve_exact(instance: &PyInstance, time_limit: f64, allow_large: bool) -> PyResult<f64> {
    let outcome =
        solve_ir_exact(&instance.inner, None, time_limit, allow_large).map_err(runtime_err)?;
    outcome
        .objective
        .ok_or_else(|| runtime_err("no feasible solution found within the time limit"))
}

#[pymodule]
fn spirp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    Ok(())
}
