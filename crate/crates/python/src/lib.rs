//! Python bindings. Structured values cross the boundary as plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use argmine::corpus::TaskInstance;
use argmine::merger::{self, DifficultyTier, TaskVector, TierAssignment, TierThresholds};
use argmine::metrics::{self, MultiPrediction};
use argmine::prompt::{PromptMode, PromptTemplate};
use argmine::sampler::{self, ClassCountTable};
use argmine::{parser, DatasetId, TaskId};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: argmine::Error) -> PyErr {
    match e {
        argmine::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn task(name: &str) -> PyResult<TaskId> {
    name.parse().map_err(err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn one_tensor(values: Vec<f64>) -> TaskVector {
    let shape = vec![values.len()];
    TaskVector {
        source: "python".into(),
        deltas: [("t".to_string(), merger::Delta { shape, values })].into(),
    }
}

fn take_tensor(tv: TaskVector) -> Vec<f64> {
    tv.deltas.into_values().next().map(|d| d.values).unwrap_or_default()
}

/// Canonical labels of a task, in catalog order.
#[pyfunction]
fn labels(task_id: &str) -> PyResult<Vec<&'static str>> {
    Ok(task(task_id)?.labels().to_vec())
}

/// Text between the answer delimiters, and whether the fallback was used.
#[pyfunction]
fn extract(raw: &str) -> (String, bool) {
    let s = parser::extract(raw);
    (s.text, s.fallback)
}

/// Canonical label for an answer span, or None.
#[pyfunction]
fn normalize(span: &str, task_id: &str) -> PyResult<Option<String>> {
    Ok(parser::normalize(span, task(task_id)?).label)
}

#[pyfunction]
fn parse<'py>(py: Python<'py>, id: &str, task_id: &str, raw: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &parser::parse(id, task(task_id)?, raw))
}

/// Zero-shot prompt for one instance.
#[pyfunction]
#[pyo3(signature = (task_id, inputs, id = "instance"))]
fn render(task_id: &str, inputs: BTreeMap<String, String>, id: &str) -> PyResult<String> {
    let t = task(task_id)?;
    let inst = TaskInstance {
        task: t,
        dataset: t.datasets()[0],
        id: id.to_string(),
        inputs,
        gold: Vec::new(),
    };
    PromptTemplate::builtin(t)
        .render(&inst, PromptMode::Zero, None)
        .map_err(err)
}

/// Class-balanced quotas. `counts` maps class -> dataset -> available instances.
#[pyfunction]
fn plan<'py>(
    py: Python<'py>,
    task_id: &str,
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    n_sample: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut table = ClassCountTable::new(task(task_id)?);
    for (class, per) in &counts {
        for (d, n) in per {
            let d: DatasetId = d.parse().map_err(err)?;
            table.set(class, d, *n).map_err(err)?;
        }
    }
    to_py(py, &sampler::plan(&table, n_sample).map_err(err)?)
}

#[pyfunction]
fn emit_preset<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &merger::emit_preset(name).map_err(err)?)
}

/// Random drop with rescaling, on a flat list of values.
#[pyfunction]
fn dare(values: Vec<f64>, rho: f64, seed: u64) -> PyResult<Vec<f64>> {
    merger::dare(&one_tensor(values), rho, seed)
        .map(take_tensor)
        .map_err(err)
}

#[pyfunction]
fn della(values: Vec<f64>, rho: f64, eps: f64, seed: u64) -> PyResult<Vec<f64>> {
    merger::della(&one_tensor(values), rho, eps, seed)
        .map(take_tensor)
        .map_err(err)
}

#[pyfunction]
fn keep_probabilities(values: Vec<f64>, rho: f64, eps: f64) -> Vec<f64> {
    merger::keep_probabilities(&values, rho, eps)
}

/// `scores` maps task -> per-model scores in [0, 1]; returns task -> tier name.
#[pyfunction]
#[pyo3(signature = (scores, overrides = None))]
fn classify_difficulty(
    scores: BTreeMap<String, Vec<f64>>,
    overrides: Option<BTreeMap<String, String>>,
) -> PyResult<BTreeMap<String, String>> {
    let scores = scores
        .into_iter()
        .map(|(k, v)| Ok((task(&k)?, v)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let mut ov = TierAssignment::new();
    for (k, v) in overrides.unwrap_or_default() {
        let tier: DifficultyTier = serde_json::from_value(serde_json::Value::String(v.clone()))
            .map_err(|_| PyValueError::new_err(format!("unknown tier {v:?}")))?;
        ov.insert(task(&k)?, tier);
    }
    let got = merger::classify_difficulty(&scores, TierThresholds::default(), &ov).map_err(err)?;
    Ok(got.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

/// Merge fine-tuned checkpoints (`task -> path`) into `base`; returns the manifest.
#[pyfunction]
#[pyo3(signature = (base, models, preset, seed, out, tiers = None))]
fn merge<'py>(
    py: Python<'py>,
    base: PathBuf,
    models: BTreeMap<String, PathBuf>,
    preset: &str,
    seed: u64,
    out: PathBuf,
    tiers: Option<BTreeMap<String, String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let models = models
        .into_iter()
        .map(|(k, v)| Ok((task(&k)?, v)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let mut assign = merger::default_tiers();
    for (k, v) in tiers.unwrap_or_default() {
        let tier: DifficultyTier = serde_json::from_value(serde_json::Value::String(v.clone()))
            .map_err(|_| PyValueError::new_err(format!("unknown tier {v:?}")))?;
        assign.insert(task(&k)?, tier);
    }
    let preset = merger::emit_preset(preset).map_err(err)?;
    let m = py
        .detach(|| merger::merge_run(&base, &models, &preset, &assign, seed, &out))
        .map_err(err)?;
    to_py(py, &m)
}

/// Per-label counts for one task; micro scores are exact until converted here.
#[pyclass(module = "argmine")]
struct ConfusionTable {
    inner: metrics::ConfusionTable,
}

#[pymethods]
impl ConfusionTable {
    #[new]
    fn new(task_id: &str) -> PyResult<Self> {
        Ok(ConfusionTable {
            inner: metrics::ConfusionTable::new(task(task_id)?),
        })
    }

    /// `pred` is None for an unparsable answer.
    #[pyo3(signature = (gold, pred = None))]
    fn add(&mut self, gold: &str, pred: Option<&str>) {
        self.inner.add(gold, pred);
    }

    fn precision(&self) -> (u64, u64) {
        let r = self.inner.micro_precision();
        (*r.numer(), *r.denom())
    }

    fn recall(&self) -> (u64, u64) {
        let r = self.inner.micro_recall();
        (*r.numer(), *r.denom())
    }

    fn f1(&self) -> f64 {
        let r = self.inner.micro_f1();
        *r.numer() as f64 / *r.denom() as f64
    }

    fn macro_f1(&self) -> f64 {
        self.inner.macro_f1()
    }

    fn score<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.score())
    }

    fn __len__(&self) -> usize {
        self.inner.n_instances as usize
    }

    fn __repr__(&self) -> String {
        format!("ConfusionTable({}, n={})", self.inner.task, self.inner.n_instances)
    }
}

/// Multi-prediction fallacy scoring over `(predictions, gold)` pairs.
#[pyfunction]
fn score_fd_multi<'py>(py: Python<'py>, items: Vec<(Vec<Option<String>>, Vec<String>)>) -> PyResult<Bound<'py, PyAny>> {
    let multi: Vec<MultiPrediction> = items
        .into_iter()
        .enumerate()
        .map(|(i, (predictions, gold))| MultiPrediction {
            id: i.to_string(),
            predictions,
            gold: gold.into_iter().collect(),
        })
        .collect();
    to_py(py, &metrics::score_fd_multi(&multi))
}

#[pymodule]
#[pyo3(name = "argmine")]
pub fn argmine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ANSWER_TOKEN", argmine::prompt::ANSWER_TOKEN)?;
    m.add("TASKS", TaskId::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>())?;
    m.add("PRESETS", merger::PRESET_NAMES.to_vec())?;
    m.add_class::<ConfusionTable>()?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(emit_preset, m)?)?;
    m.add_function(wrap_pyfunction!(dare, m)?)?;
    m.add_function(wrap_pyfunction!(della, m)?)?;
    m.add_function(wrap_pyfunction!(keep_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(classify_difficulty, m)?)?;
    m.add_function(wrap_pyfunction!(merge, m)?)?;
    m.add_function(wrap_pyfunction!(score_fd_multi, m)?)?;
    Ok(())
}
