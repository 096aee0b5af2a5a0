//! Python bindings: charts, implementations, the retrieve relation and the
//! verification pipeline. Structured results cross over as JSON-shaped
//! dicts and lists.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use sfv::chart::{parse_chart, print_chart, validate_chart, ChartDef};
use sfv::expr::Value;
use sfv::ir::{generate_reference, parse_impl, print_impl, read_c_subset, render_c, run_impl, ImplProgram, NONCONFORMANT_PREFIX};
use sfv::lexer::Diagnostic;
use sfv::refine::{self, CosimConfig, MatchMode, VerifyConfig};
use sfv::retrieve::{check_functional_total_surjective, render_relation, synthesize, RetrieveRelation};
use sfv::sem::{run_trace, StepInput};

create_exception!(sfverify, ParseError, PyValueError, "Malformed chart, implementation or trace text.");
create_exception!(sfverify, NonconformantError, PyValueError, "Implementation outside the generated-code pattern.");

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn joined(ds: &[Diagnostic]) -> String {
    ds.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

fn read_file(path: &str) -> PyResult<String> {
    std::fs::read_to_string(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
}

/// A parsed chart.
#[pyclass(frozen, module = "sfverify")]
struct Chart {
    inner: ChartDef,
}

#[pymethods]
impl Chart {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Chart> {
        parse_chart(text).map(|inner| Chart { inner }).map_err(|ds| ParseError::new_err(joined(&ds)))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Chart> {
        Chart::parse(&read_file(path)?)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    /// State ids in preorder.
    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states_preorder()
    }

    /// Well-formedness diagnostics; empty when the chart is valid.
    fn validate(&self) -> Vec<String> {
        validate_chart(&self.inner).iter().map(ToString::to_string).collect()
    }

    /// Runs a trace of `{"u": 5, "events": ["go"]}` steps and returns each
    /// step's outputs.
    fn simulate(&self, py: Python<'_>, trace: Vec<Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let steps = trace.iter().map(step_input).collect::<PyResult<Vec<_>>>()?;
        let res = run_trace(&self.inner, &steps).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let outs: Vec<&BTreeMap<String, Value>> = res.iter().map(|r| &r.outputs).collect();
        to_py(py, &outs)
    }

    /// The reference implementation.
    fn generate(&self) -> PyResult<Implementation> {
        generate_reference(&self.inner)
            .map(|inner| Implementation { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_text(&self) -> String {
        print_chart(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("<Chart {} with {} states>", self.inner.name, self.inner.states.len())
    }
}

fn step_input(d: &Bound<'_, PyDict>) -> PyResult<StepInput> {
    let mut s = StepInput::default();
    for (k, v) in d.iter() {
        let k: String = k.extract()?;
        if k == "events" {
            s.events = v.extract()?;
        } else if let Ok(i) = v.extract::<i64>() {
            s.inputs.insert(k, Value::Int(i));
        } else {
            s.inputs.insert(k, Value::Float(v.extract::<f64>()?));
        }
    }
    Ok(s)
}

/// An implementation program: `.sfi` text, generator-style C, or a
/// generated reference.
#[pyclass(frozen, module = "sfverify")]
struct Implementation {
    inner: ImplProgram,
}

#[pymethods]
impl Implementation {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Implementation> {
        parse_impl(text).map(|inner| Implementation { inner }).map_err(|ds| ParseError::new_err(joined(&ds)))
    }

    /// Reads generator-style C. Raises `NonconformantError` for constructs
    /// outside the pattern (loops, pointers, …), with their location.
    #[staticmethod]
    fn read_c(text: &str) -> PyResult<Implementation> {
        match read_c_subset(text) {
            Ok((inner, _)) => Ok(Implementation { inner }),
            Err(ds) if ds.iter().any(|d| d.message.starts_with(NONCONFORMANT_PREFIX)) => {
                Err(NonconformantError::new_err(joined(&ds)))
            }
            Err(ds) => Err(ParseError::new_err(joined(&ds))),
        }
    }

    /// Loads a `.c`/`.h` file through the C reader and anything else as IR text.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Implementation> {
        let text = read_file(path)?;
        if path.ends_with(".c") || path.ends_with(".h") {
            Implementation::read_c(&text)
        } else {
            Implementation::parse(&text)
        }
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn functions(&self) -> Vec<String> {
        self.inner.functions.keys().cloned().collect()
    }

    /// Runs `initialize` then the output function once per step; returns `Y` per step.
    fn run(&self, py: Python<'_>, trace: Vec<Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let steps = trace.iter().map(step_input).collect::<PyResult<Vec<_>>>()?;
        let ys = run_impl(&self.inner, &steps).map_err(|e| PyValueError::new_err(e.to_string()))?;
        to_py(py, &ys)
    }

    fn to_text(&self) -> String {
        print_impl(&self.inner)
    }

    fn to_c(&self) -> String {
        render_c(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("<Implementation {} with {} functions>", self.inner.name, self.inner.functions.len())
    }
}

/// The retrieve relation from implementation state to chart state.
#[pyclass(frozen, module = "sfverify")]
struct Relation {
    inner: RetrieveRelation,
    chart: ChartDef,
    program: ImplProgram,
}

#[pymethods]
impl Relation {
    #[staticmethod]
    fn synthesize(chart: &Chart, implementation: &Implementation) -> PyResult<Relation> {
        synthesize(&chart.inner, &implementation.inner)
            .map(|inner| Relation { inner, chart: chart.inner.clone(), program: implementation.inner.clone() })
            .map_err(|e| NonconformantError::new_err(e.to_string()))
    }

    /// Checks the relation is a total, functional, surjective function over
    /// every control state and the given data values.
    #[pyo3(signature = (domain = vec![-1, 0, 1]))]
    fn check(&self, py: Python<'_>, domain: Vec<i64>) -> PyResult<Py<PyAny>> {
        to_py(py, &check_functional_total_surjective(&self.inner, &self.chart, &self.program, &domain))
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __str__(&self) -> String {
        render_relation(&self.inner)
    }
}

/// Outcome of `verify`.
#[pyclass(frozen, module = "sfverify")]
struct Verdict {
    inner: refine::Verdict,
}

#[pymethods]
impl Verdict {
    /// `"PASS"`, `"FAIL"` or `"NONCONFORMANT"`.
    #[getter]
    fn outcome(&self) -> &'static str {
        self.inner.outcome.as_str()
    }

    #[getter]
    fn passed(&self) -> bool {
        self.inner.outcome == refine::Outcome::Pass
    }

    #[getter]
    fn phase(&self) -> Option<String> {
        self.inner.phase.clone()
    }

    #[getter]
    fn diagnostics(&self) -> Vec<String> {
        self.inner.diagnostics.clone()
    }

    #[getter]
    fn reorders(&self) -> Vec<String> {
        self.inner.reorders.clone()
    }

    #[getter]
    fn first_divergence(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.first_divergence)
    }

    #[getter]
    fn cosim(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.cosim)
    }

    fn to_json(&self) -> String {
        refine::render_json(&self.inner)
    }

    fn to_text(&self) -> String {
        refine::render_text(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("<Verdict {} for {}>", self.inner.outcome.as_str(), self.inner.chart)
    }
}

fn mode(s: &str) -> PyResult<MatchMode> {
    match s {
        "normalized" => Ok(MatchMode::Normalized),
        "exact" => Ok(MatchMode::Exact),
        other => Err(PyValueError::new_err(format!("match mode must be 'normalized' or 'exact', not {other:?}"))),
    }
}

/// Runs every phase plus co-simulation.
#[pyfunction]
#[pyo3(signature = (chart, implementation, *, seed = 0, traces = 1000, max_len = 50, lo = -10, hi = 10, match_mode = "normalized", workers = 0))]
#[allow(clippy::too_many_arguments)]
fn verify(
    py: Python<'_>,
    chart: &Chart,
    implementation: &Implementation,
    seed: u64,
    traces: usize,
    max_len: usize,
    lo: i64,
    hi: i64,
    match_mode: &str,
    workers: usize,
) -> PyResult<Verdict> {
    if lo > hi {
        return Err(PyValueError::new_err(format!("domain bounds out of order: {lo} > {hi}")));
    }
    let cfg = VerifyConfig {
        cosim: CosimConfig { seed, traces, max_len, lo, hi, workers, ..CosimConfig::default() },
        mode: mode(match_mode)?,
    };
    let (c, p) = (&chart.inner, &implementation.inner);
    let inner = py.detach(|| refine::verify(c, p, &cfg));
    Ok(Verdict { inner })
}

/// The single-site mutants of an implementation's step function, as
/// `(id, kind, description, Implementation)` tuples.
#[pyfunction]
fn mutants(chart: &Chart, implementation: &Implementation) -> PyResult<Vec<(String, String, String, Implementation)>> {
    let r = synthesize(&chart.inner, &implementation.inner).map_err(|e| NonconformantError::new_err(e.to_string()))?;
    Ok(refine::mutants(&implementation.inner, &r)
        .into_iter()
        .map(|m| {
            let kind = serde_json::to_value(m.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            (m.id, kind, m.description, Implementation { inner: m.program })
        })
        .collect())
}

/// Exhaustive small-domain check of the derivation against the chart
/// semantics and of simplification against the unsimplified derivation.
#[pyfunction]
#[pyo3(signature = (chart, values = vec![-6, -1, 0, 1, 3, 4, 6]))]
fn check_soundness(py: Python<'_>, chart: &Chart, values: Vec<i64>) -> PyResult<Py<PyAny>> {
    let c = &chart.inner;
    let rep = py.detach(|| refine::check_phase_soundness(c, &values)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &rep)
}

#[pymodule(name = "sfverify")]
fn sfverify_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Chart>()?;
    m.add_class::<Implementation>()?;
    m.add_class::<Relation>()?;
    m.add_class::<Verdict>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(mutants, m)?)?;
    m.add_function(wrap_pyfunction!(check_soundness, m)?)?;
    m.add("ParseError", m.py().get_type::<ParseError>())?;
    m.add("NonconformantError", m.py().get_type::<NonconformantError>())?;
    m.add("SCHEMA", refine::SCHEMA)?;
    Ok(())
}
