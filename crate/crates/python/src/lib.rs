//! Python bindings for `thoughtprune`.
//!
//! Matrices cross the boundary as lists of rows; reports come back as dicts.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use thoughtprune::condense::{self, CondenseConfig, Strategy};
use thoughtprune::mi::{self, EmbeddingMatrix, Jitter, MiError, MiOptions};
use thoughtprune::perturb::{self, MatchLength, PerturbationConfig, Region, SentencePool};
use thoughtprune::rng::{derive_seed, streams, SeededStream};
use thoughtprune::stats;
use thoughtprune::trace::{self, FieldMapping, ReadMode};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mi_err(e: MiError) -> PyErr {
    if e.is_degenerate() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        value_err(e)
    }
}

fn to_py(py: Python<'_>, v: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Parses a lowercase enum name through its serde representation.
fn parse_enum<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase()))
        .map_err(|_| PyValueError::new_err(format!("unknown value {name:?}")))
}

fn read_mode(skip_bad_lines: bool) -> ReadMode {
    if skip_bad_lines {
        ReadMode::Skip
    } else {
        ReadMode::FailFast
    }
}

fn lexicon_or_default(lexicon: Option<&ReflectionLexicon>) -> trace::ReflectionLexicon {
    lexicon.map_or_else(trace::ReflectionLexicon::default, |l| l.inner.clone())
}

#[pyclass(module = "thoughtprune", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ThoughtTrace {
    inner: trace::ThoughtTrace,
}

#[pymethods]
impl ThoughtTrace {
    #[new]
    #[pyo3(signature = (thoughts, delimiter = "\n\n"))]
    fn new(thoughts: Vec<String>, delimiter: &str) -> PyResult<Self> {
        let inner = trace::ThoughtTrace::new(thoughts, delimiter, None).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn thoughts(&self) -> Vec<String> {
        self.inner.thoughts().to_vec()
    }

    #[getter]
    fn delimiter(&self) -> &str {
        self.inner.delimiter()
    }

    fn join(&self) -> String {
        self.inner.join()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("ThoughtTrace(<{} thoughts>)", self.inner.len())
    }
}

#[pyfunction]
#[pyo3(signature = (text, delimiter = "\n\n"))]
fn segment(text: &str, delimiter: &str) -> PyResult<ThoughtTrace> {
    let inner = trace::segment(text, delimiter).map_err(value_err)?;
    Ok(ThoughtTrace { inner })
}

#[pyfunction]
fn join(trace: &ThoughtTrace) -> String {
    trace.inner.join()
}

#[pyclass(module = "thoughtprune", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ReflectionLexicon {
    inner: trace::ReflectionLexicon,
}

#[pymethods]
impl ReflectionLexicon {
    /// Without arguments, the built-in marker list.
    #[new]
    #[pyo3(signature = (markers = None))]
    fn new(markers: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match markers {
            Some(m) => trace::ReflectionLexicon::new(m).map_err(value_err)?,
            None => trace::ReflectionLexicon::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        let inner = trace::ReflectionLexicon::from_file(path).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn markers(&self) -> Vec<String> {
        (0..self.inner.markers().len()).map(|i| self.inner.marker_label(i)).collect()
    }

    fn count(&self, text: &str) -> usize {
        self.inner.count(text)
    }

    fn count_by_marker(&self, text: &str) -> std::collections::BTreeMap<String, usize> {
        self.inner.count_by_marker(text)
    }

    /// `(marker, start, end)` byte spans.
    fn find(&self, text: &str) -> Vec<(String, usize, usize)> {
        self.inner
            .find(text)
            .into_iter()
            .map(|m| (self.inner.marker_label(m.marker), m.start, m.end))
            .collect()
    }
}

#[pyfunction]
#[pyo3(signature = (text, lexicon = None))]
fn count_reflection_tokens(text: &str, lexicon: Option<&ReflectionLexicon>) -> usize {
    trace::count_reflection_tokens(text, &lexicon_or_default(lexicon))
}

#[pyclass(module = "thoughtprune", frozen, skip_from_py_object)]
#[derive(Clone)]
struct CondensationPlan {
    #[pyo3(get)]
    strategy: String,
    #[pyo3(get)]
    tau: f64,
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    omega: Vec<usize>,
    #[pyo3(get)]
    seed: Option<u64>,
    #[pyo3(get)]
    nominal_retained: usize,
    #[pyo3(get)]
    fallback: bool,
    inner: condense::CondensationPlan,
}

impl From<condense::CondensationPlan> for CondensationPlan {
    fn from(p: condense::CondensationPlan) -> Self {
        Self {
            strategy: p.strategy.to_string(),
            tau: p.tau,
            n: p.n,
            omega: p.omega.clone(),
            seed: p.seed,
            nominal_retained: p.nominal_retained,
            fallback: p.fallback,
            inner: p,
        }
    }
}

#[pymethods]
impl CondensationPlan {
    fn __repr__(&self) -> String {
        format!("CondensationPlan(strategy={:?}, tau={}, n={}, omega={:?})", self.strategy, self.tau, self.n, self.omega)
    }
}

#[pyfunction]
#[pyo3(signature = (n, tau, strategy = "epic", seed = None, min_keep = true))]
fn plan_indices(n: usize, tau: f64, strategy: &str, seed: Option<u64>, min_keep: bool) -> PyResult<CondensationPlan> {
    let strategy: Strategy = strategy.parse().map_err(value_err)?;
    let plan = condense::plan_indices_with(n, tau, strategy, seed, min_keep).map_err(value_err)?;
    Ok(plan.into())
}

#[pyfunction]
fn apply(trace: &ThoughtTrace, plan: &CondensationPlan) -> PyResult<ThoughtTrace> {
    let inner = condense::apply(&trace.inner, &plan.inner).map_err(value_err)?;
    Ok(ThoughtTrace { inner })
}

#[pyfunction]
#[pyo3(signature = (input, output, strategy = "epic", tau = 0.5, seed = None, delimiter = "\n\n", min_keep = true, skip_bad_lines = false))]
#[allow(clippy::too_many_arguments)]
fn condense_dataset(
    py: Python<'_>,
    input: std::path::PathBuf,
    output: std::path::PathBuf,
    strategy: &str,
    tau: f64,
    seed: Option<u64>,
    delimiter: &str,
    min_keep: bool,
    skip_bad_lines: bool,
) -> PyResult<Py<PyAny>> {
    let cfg = CondenseConfig {
        strategy: strategy.parse().map_err(value_err)?,
        tau,
        delimiter: delimiter.into(),
        seed,
        min_keep,
        read_mode: read_mode(skip_bad_lines),
        ..Default::default()
    };
    let report = py.detach(|| condense::condense_dataset(input, output, &cfg)).map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n, region = "middle", fraction = 0.5))]
fn select_perturb_indices(n: usize, region: &str, fraction: f64) -> PyResult<Vec<usize>> {
    perturb::select_perturb_indices(n, parse_enum(region)?, fraction).map_err(value_err)
}

/// Perturbs one thought with a stream derived from `seed` and `index`, the
/// same derivation the dataset pipeline uses per example.
#[pyfunction]
#[pyo3(signature = (thought, sentences, seed = 0, index = 0, lexicon = None, match_length = "off"))]
fn perturb_thought(
    thought: &str,
    sentences: Vec<String>,
    seed: u64,
    index: u64,
    lexicon: Option<&ReflectionLexicon>,
    match_length: &str,
) -> PyResult<String> {
    let lexicon = lexicon_or_default(lexicon);
    let pool = SentencePool::new(sentences, &lexicon).map_err(value_err)?;
    let mut rng = SeededStream::new(derive_seed(seed, streams::PERTURB, index));
    let ml: MatchLength = parse_enum(match_length)?;
    Ok(perturb::perturb_thought(thought, &lexicon, &pool, &mut rng, ml))
}

#[pyfunction]
#[pyo3(signature = (input, output, pool, region = "middle", fraction = 0.5, seed = 0, delimiter = "\n\n", lexicon = None, match_length = "off", skip_bad_lines = false))]
#[allow(clippy::too_many_arguments)]
fn perturb_dataset(
    py: Python<'_>,
    input: std::path::PathBuf,
    output: std::path::PathBuf,
    pool: std::path::PathBuf,
    region: &str,
    fraction: f64,
    seed: u64,
    delimiter: &str,
    lexicon: Option<&ReflectionLexicon>,
    match_length: &str,
    skip_bad_lines: bool,
) -> PyResult<Py<PyAny>> {
    let lexicon = lexicon_or_default(lexicon);
    let region: Region = parse_enum(region)?;
    let sentence_pool = SentencePool::from_file(pool, &lexicon).map_err(value_err)?;
    let mut cfg = PerturbationConfig::new(region, fraction, lexicon, sentence_pool, seed);
    cfg.match_length = parse_enum(match_length)?;
    let report = py
        .detach(|| {
            perturb::perturb_dataset(input, output, &cfg, delimiter, &FieldMapping::default(), read_mode(skip_bad_lines))
        })
        .map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (input, delimiter = "\n\n", lexicon = None, skip_bad_lines = false))]
fn dataset_stats(
    py: Python<'_>,
    input: std::path::PathBuf,
    delimiter: &str,
    lexicon: Option<&ReflectionLexicon>,
    skip_bad_lines: bool,
) -> PyResult<Py<PyAny>> {
    let lexicon = lexicon_or_default(lexicon);
    let report = py
        .detach(|| stats::stats_dataset(input, &FieldMapping::default(), read_mode(skip_bad_lines), &lexicon, delimiter))
        .map_err(value_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    mi::digamma(x).map_err(mi_err)
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<EmbeddingMatrix> {
    EmbeddingMatrix::from_rows(rows).map_err(mi_err)
}

/// KSG mutual information in nats between two row-aligned matrices.
#[pyfunction]
#[pyo3(signature = (a, b, k = 5, jitter = None, jitter_seed = 0, standardize = false, allow_dim_mismatch = false))]
#[allow(clippy::too_many_arguments)]
fn estimate_mi(
    py: Python<'_>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    k: usize,
    jitter: Option<f64>,
    jitter_seed: u64,
    standardize: bool,
    allow_dim_mismatch: bool,
) -> PyResult<Py<PyAny>> {
    let (a, b) = (matrix(&a)?, matrix(&b)?);
    let opts = MiOptions {
        k,
        jitter: jitter.map(|magnitude| Jitter { magnitude, seed: jitter_seed }),
        standardize,
        allow_dim_mismatch,
    };
    let est = py.detach(|| mi::estimate_mi(&a, &b, &opts)).map_err(mi_err)?;
    to_py(py, &est)
}

/// MI between two `.embm` files.
#[pyfunction]
#[pyo3(signature = (a, b, k = 5, jitter = None, jitter_seed = 0, standardize = false, allow_dim_mismatch = false))]
#[allow(clippy::too_many_arguments)]
fn estimate_mi_files(
    py: Python<'_>,
    a: std::path::PathBuf,
    b: std::path::PathBuf,
    k: usize,
    jitter: Option<f64>,
    jitter_seed: u64,
    standardize: bool,
    allow_dim_mismatch: bool,
) -> PyResult<Py<PyAny>> {
    let a = EmbeddingMatrix::read(a).map_err(mi_err)?;
    let b = EmbeddingMatrix::read(b).map_err(mi_err)?;
    let opts = MiOptions {
        k,
        jitter: jitter.map(|magnitude| Jitter { magnitude, seed: jitter_seed }),
        standardize,
        allow_dim_mismatch,
    };
    let est = py.detach(|| mi::estimate_mi(&a, &b, &opts)).map_err(mi_err)?;
    to_py(py, &est)
}

/// Returns `(rows, meta)`; values are widened from f32.
#[pyfunction]
fn read_embm(py: Python<'_>, path: std::path::PathBuf) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    let m = EmbeddingMatrix::read(path).map_err(mi_err)?;
    let rows = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    Ok((rows, to_py(py, &m.meta)?))
}

/// Writes rows (narrowed to f32) and a metadata dict to a `.embm` file.
#[pyfunction]
#[pyo3(signature = (path, rows, meta = None))]
fn write_embm(py: Python<'_>, path: std::path::PathBuf, rows: Vec<Vec<f64>>, meta: Option<Bound<'_, PyAny>>) -> PyResult<()> {
    let mut m = matrix(&rows)?;
    if let Some(meta) = meta {
        let text: String = py.import("json")?.call_method1("dumps", (meta,))?.extract()?;
        m.meta = serde_json::from_str(&text).map_err(value_err)?;
    }
    m.write(path).map_err(mi_err)
}

/// Checks a `.embm` file and returns its header as a dict.
#[pyfunction]
fn validate_embm(py: Python<'_>, path: std::path::PathBuf) -> PyResult<Py<PyAny>> {
    let header = mi::validate_file(path).map_err(mi_err)?;
    to_py(py, &header)
}

#[pyfunction]
#[pyo3(signature = (m = 2000, k = 5, rho = 0.9, seed = 0, tolerance = None))]
fn validate_gaussian(py: Python<'_>, m: usize, k: usize, rho: f64, seed: u64, tolerance: Option<f64>) -> PyResult<Py<PyAny>> {
    let report = py.detach(|| mi::validate_gaussian(m, k, rho, seed, tolerance)).map_err(mi_err)?;
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "thoughtprune")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ThoughtTrace>()?;
    m.add_class::<ReflectionLexicon>()?;
    m.add_class::<CondensationPlan>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(join, m)?)?;
    m.add_function(wrap_pyfunction!(count_reflection_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(plan_indices, m)?)?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(condense_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(select_perturb_indices, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_thought, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_stats, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mi, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mi_files, m)?)?;
    m.add_function(wrap_pyfunction!(read_embm, m)?)?;
    m.add_function(wrap_pyfunction!(write_embm, m)?)?;
    m.add_function(wrap_pyfunction!(validate_embm, m)?)?;
    m.add_function(wrap_pyfunction!(validate_gaussian, m)?)?;
    m.add("REPORT_SCHEMA_VERSION", thoughtprune::REPORT_SCHEMA_VERSION)?;
    Ok(())
}
