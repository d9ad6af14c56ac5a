use std::path::PathBuf;

use omagent_core::eval::{self, load_dataset, run_benchmark, BenchmarkOptions, Mode};
use omagent_core::timecode::{format_hms, parse_time_ref, Span};
use omagent_core::workspace::Workspace as CoreWorkspace;
use omagent_core::{fixtures, Error};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(m) => PyValueError::new_err(m),
        Error::UnknownVideo(v) => PyKeyError::new_err(format!("unknown video: {v}")),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Hands JSON-serializable values to Python as plain dicts and lists.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

fn mode_of(s: &str) -> PyResult<Mode> {
    Mode::parse(s).ok_or_else(|| PyValueError::new_err(format!("unknown mode {s:?}")))
}

/// A workspace directory: provider config, settings, video index and store.
#[pyclass(unsendable)]
struct Workspace {
    inner: CoreWorkspace,
}

#[pymethods]
impl Workspace {
    #[new]
    fn new(root: PathBuf) -> PyResult<Self> {
        Ok(Workspace { inner: CoreWorkspace::open(&root).map_err(to_py_err)? })
    }

    #[getter]
    fn root(&self) -> PathBuf {
        self.inner.root().to_path_buf()
    }

    #[pyo3(signature = (manifest, threshold=None, min_seg=None, k=None))]
    fn ingest(
        &mut self,
        py: Python<'_>,
        manifest: PathBuf,
        threshold: Option<f64>,
        min_seg: Option<f64>,
        k: Option<usize>,
    ) -> PyResult<PyObject> {
        let mut params = self.inner.settings.detection;
        params.diff_threshold = threshold.unwrap_or(params.diff_threshold);
        params.min_segment_seconds = min_seg.unwrap_or(params.min_segment_seconds);
        params.frames_per_segment = k.unwrap_or(params.frames_per_segment);
        let report = self.inner.ingest(&manifest, Some(params)).map_err(to_py_err)?;
        to_py(py, &report)
    }

    /// Returns `{"text", "unanswered", "trace"}`.
    #[pyo3(signature = (question, video_id=None, k=None, trace_path=None))]
    fn ask(
        &self,
        py: Python<'_>,
        question: &str,
        video_id: Option<&str>,
        k: Option<usize>,
        trace_path: Option<PathBuf>,
    ) -> PyResult<PyObject> {
        let session = self.inner.session().map_err(to_py_err)?;
        let mut config = self.inner.settings.query;
        config.k = k.unwrap_or(config.k);
        let answer = self.inner.ask(&session, question, video_id, config).map_err(to_py_err)?;
        if let Some(path) = trace_path {
            answer.trace.save(&path).map_err(to_py_err)?;
        }
        to_py(py, &serde_json::json!({"text": answer.text, "unanswered": answer.unanswered, "trace": answer.trace}))
    }

    #[pyo3(signature = (dataset, mode="omagent", out=None, traces=None, concurrency=1, global_search=false))]
    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        py: Python<'_>,
        dataset: PathBuf,
        mode: &str,
        out: Option<PathBuf>,
        traces: Option<PathBuf>,
        concurrency: usize,
        global_search: bool,
    ) -> PyResult<PyObject> {
        let mode = mode_of(mode)?;
        let questions = load_dataset(&dataset).map_err(to_py_err)?;
        let session = self.inner.session().map_err(to_py_err)?;
        let answerer = self.inner.answerer(&session, mode, global_search);
        let opts = BenchmarkOptions { concurrency, trace_dir: traces };
        let report =
            run_benchmark(&questions, answerer.as_ref(), &self.inner.video_types(), &opts).map_err(to_py_err)?;
        if let Some(path) = out {
            report.save(&path).map_err(to_py_err)?;
        }
        to_py(py, &report)
    }

    fn store_stats(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.inner.store().meta())
    }

    #[pyo3(signature = (video_id=None))]
    fn entries(&self, py: Python<'_>, video_id: Option<&str>) -> PyResult<PyObject> {
        to_py(py, &self.inner.store().entries(video_id))
    }

    fn tools(&self, py: Python<'_>) -> PyResult<PyObject> {
        let session = self.inner.session().map_err(to_py_err)?;
        to_py(py, &session.tools.catalog())
    }
}

/// Writes the fixture videos, datasets and scripts into `out`; with
/// `ingest` the directory is also ready to open as a workspace.
#[pyfunction]
#[pyo3(signature = (out, ingest=false))]
fn write_fixtures(out: PathBuf, ingest: bool) -> PyResult<PathBuf> {
    let paths = fixtures::write_all(&out).map_err(to_py_err)?;
    if ingest {
        let mut ws = CoreWorkspace::open(&out).map_err(to_py_err)?;
        for m in &paths.manifests {
            ws.ingest(m, None).map_err(to_py_err)?;
        }
    }
    Ok(paths.root)
}

#[pyfunction]
fn iou(a: (f64, f64), b: (f64, f64)) -> PyResult<f64> {
    eval::iou(Span { lo: a.0, hi: a.1 }, Span { lo: b.0, hi: b.1 }).map_err(to_py_err)
}

/// Returns `(correct, rule)`.
#[pyfunction]
fn score_localization(predicted: &str, truths: Vec<String>) -> PyResult<(bool, String)> {
    let truths = truths.iter().map(|t| parse_time_ref(t)).collect::<Result<Vec<_>, _>>().map_err(to_py_err)?;
    let score = eval::score_localization(predicted, &truths);
    Ok((score.correct, rule_name(score.rule)))
}

#[pyfunction]
fn score_choice(predicted: &str, truth: Vec<char>, options: Vec<char>) -> bool {
    eval::score_choice(predicted, &truth, &options).correct
}

#[pyfunction(name = "format_hms")]
fn py_format_hms(seconds: f64) -> String {
    format_hms(seconds)
}

fn rule_name(rule: eval::Rule) -> String {
    serde_json::to_value(rule).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

#[pymodule]
fn omagent(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Workspace>()?;
    m.add_function(wrap_pyfunction!(write_fixtures, m)?)?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(score_localization, m)?)?;
    m.add_function(wrap_pyfunction!(score_choice, m)?)?;
    m.add_function(wrap_pyfunction!(py_format_hms, m)?)?;
    Ok(())
}
