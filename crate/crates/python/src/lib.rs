//! Python bindings. Matrices cross the boundary as lists of rows.

use ndarray::{Array1, Array2};
use percentmatch_core::experiment::{read_trace_file, run_experiment_to_path};
use percentmatch_core::losses::{self, UnlabeledNorm};
use percentmatch_core::metrics;
use percentmatch_core::thresholds;
use percentmatch_core::{
    compare_runs, ClassHistogram, Error, ExperimentConfig, LossConfig, SelectionMask,
    ThresholdState, WeightSchedule,
};
use pyo3::prelude::*;
use pyo3::types::PyDict;

pyo3::create_exception!(
    percentmatch,
    PercentmatchError,
    pyo3::exceptions::PyValueError
);

fn err(e: Error) -> PyErr {
    PercentmatchError::new_err(format!("[{}] {}", e.kind(), e))
}

fn matrix<T: Copy + Default>(rows: Vec<Vec<T>>) -> PyResult<Array2<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PercentmatchError::new_err(
            "[shape-mismatch] rows have different lengths",
        ));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PercentmatchError::new_err(e.to_string()))
}

fn rows<T: Clone>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

/// 0/1 flags as ints; `Vec<u8>` would come out as `bytes`.
type Flags = Vec<Vec<u32>>;

fn flags(a: &Array2<u8>) -> Flags {
    a.outer_iter()
        .map(|r| r.iter().map(|&v| u32::from(v)).collect())
        .collect()
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn loss_config(
    loss: &str,
    gamma_pos: f64,
    gamma_neg: f64,
    shift: f64,
    norm: &str,
) -> PyResult<LossConfig> {
    let mut cfg = match loss {
        "bce" => LossConfig::bce(),
        "asymmetric" => LossConfig::asymmetric(gamma_pos, gamma_neg, shift).map_err(err)?,
        other => {
            return Err(PercentmatchError::new_err(format!(
                "[invalid-argument] unknown loss {other:?}"
            )))
        }
    };
    cfg.unlabeled_norm = match norm {
        "batch" => UnlabeledNorm::Batch,
        "selected" => UnlabeledNorm::Selected,
        other => {
            return Err(PercentmatchError::new_err(format!(
                "[invalid-argument] unknown norm {other:?}"
            )))
        }
    };
    Ok(cfg)
}

/// EMA histogram of one class's confidence scores.
#[pyclass(name = "ClassHistogram", module = "percentmatch", skip_from_py_object)]
#[derive(Clone)]
struct PyHistogram {
    inner: ClassHistogram,
}

#[pymethods]
impl PyHistogram {
    #[new]
    #[pyo3(signature = (bins=100, decay=0.99))]
    fn new(bins: usize, decay: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ClassHistogram::new(bins, decay).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (bins, decay=0.99))]
    fn from_bins(bins: Vec<f64>, decay: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ClassHistogram::from_bins(bins, decay).map_err(err)?,
        })
    }

    fn update(&mut self, scores: Vec<f64>) -> PyResult<()> {
        self.inner.update(&scores).map_err(err)
    }

    fn quantile(&self, kappa: f64) -> PyResult<f64> {
        self.inner.quantile(kappa).map_err(err)
    }

    fn bin_index(&self, score: f64) -> usize {
        self.inner.bin_index(score)
    }

    #[getter]
    fn bins(&self) -> Vec<f64> {
        self.inner.bins().to_vec()
    }

    #[getter]
    fn decay(&self) -> f64 {
        self.inner.decay()
    }

    fn __repr__(&self) -> String {
        format!(
            "ClassHistogram(bins={}, decay={})",
            self.inner.bin_count(),
            self.inner.decay()
        )
    }
}

/// Per-class percentiles and the score thresholds derived from them.
#[pyclass(name = "ThresholdState", module = "percentmatch", skip_from_py_object)]
#[derive(Clone)]
struct PyThresholds {
    inner: ThresholdState,
}

#[pymethods]
impl PyThresholds {
    #[staticmethod]
    #[pyo3(signature = (labels, kappa_plus=0.98, kappa_minus=0.1, clamp_minus=true))]
    fn from_labeled(
        labels: Vec<Vec<u8>>,
        kappa_plus: f64,
        kappa_minus: f64,
        clamp_minus: bool,
    ) -> PyResult<Self> {
        let labels = matrix(labels)?;
        Ok(Self {
            inner: ThresholdState::from_labeled(
                kappa_plus,
                kappa_minus,
                labels.view(),
                clamp_minus,
            )
            .map_err(err)?,
        })
    }

    #[staticmethod]
    fn fixed(classes: usize, tau_plus: f64, tau_minus: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ThresholdState::fixed(classes, tau_plus, tau_minus).map_err(err)?,
        })
    }

    fn refresh(&mut self, histograms: Vec<PyRef<'_, PyHistogram>>) -> PyResult<()> {
        let hs: Vec<ClassHistogram> = histograms.iter().map(|h| h.inner.clone()).collect();
        self.inner.refresh(&hs).map_err(err)
    }

    fn gaps(&self) -> Vec<f64> {
        self.inner.gaps()
    }

    #[pyo3(signature = (t, start_gap=0.5, saturate_gap=0.55, saturate_weight=1.0, warmup_iters=300))]
    fn class_weights(
        &self,
        t: u64,
        start_gap: f64,
        saturate_gap: f64,
        saturate_weight: f64,
        warmup_iters: u64,
    ) -> PyResult<Vec<f64>> {
        let sched = WeightSchedule::new(start_gap, saturate_gap, saturate_weight, warmup_iters)
            .map_err(err)?;
        Ok(self.inner.class_weights(t, &sched))
    }

    #[getter]
    fn kappa_plus(&self) -> Vec<f64> {
        self.inner.kappa_plus.clone()
    }

    #[getter]
    fn kappa_minus(&self) -> Vec<f64> {
        self.inner.kappa_minus.clone()
    }

    #[getter]
    fn tau_plus(&self) -> Vec<f64> {
        self.inner.tau_plus.clone()
    }

    #[getter]
    fn tau_minus(&self) -> Vec<f64> {
        self.inner.tau_minus.clone()
    }
}

#[pyfunction]
#[pyo3(signature = (gap, t, start_gap=0.5, saturate_gap=0.55, saturate_weight=1.0, warmup_iters=300))]
fn loss_weight(
    gap: f64,
    t: u64,
    start_gap: f64,
    saturate_gap: f64,
    saturate_weight: f64,
    warmup_iters: u64,
) -> PyResult<f64> {
    let sched =
        WeightSchedule::new(start_gap, saturate_gap, saturate_weight, warmup_iters).map_err(err)?;
    Ok(thresholds::loss_weight(gap, t, &sched))
}

/// Returns `(selected, pseudo)` 0/1 matrices.
#[pyfunction]
fn select(
    scores: Vec<Vec<f64>>,
    tau_plus: Vec<f64>,
    tau_minus: Vec<f64>,
) -> PyResult<(Flags, Flags)> {
    let scores = matrix(scores)?;
    let mask = percentmatch_core::select(scores.view(), &tau_plus, &tau_minus).map_err(err)?;
    Ok((flags(&mask.selected), flags(&mask.pseudo)))
}

/// Returns `(value, grad)`.
#[pyfunction]
#[pyo3(signature = (labels, scores, loss="bce", gamma_pos=0.0, gamma_neg=4.0, shift=0.05))]
fn supervised_loss(
    labels: Vec<Vec<u8>>,
    scores: Vec<Vec<f64>>,
    loss: &str,
    gamma_pos: f64,
    gamma_neg: f64,
    shift: f64,
) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let cfg = loss_config(loss, gamma_pos, gamma_neg, shift, "batch")?;
    let out = losses::supervised_loss(matrix(labels)?.view(), matrix(scores)?.view(), &cfg)
        .map_err(err)?;
    Ok((out.value, rows(&out.grad)))
}

/// Returns `(per_class, grad)`.
#[pyfunction]
#[pyo3(signature = (selected, pseudo, strong_scores, loss="bce", gamma_pos=0.0, gamma_neg=4.0, shift=0.05, norm="batch"))]
#[allow(clippy::too_many_arguments)]
fn unlabeled_loss(
    selected: Vec<Vec<u8>>,
    pseudo: Vec<Vec<u8>>,
    strong_scores: Vec<Vec<f64>>,
    loss: &str,
    gamma_pos: f64,
    gamma_neg: f64,
    shift: f64,
    norm: &str,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let cfg = loss_config(loss, gamma_pos, gamma_neg, shift, norm)?;
    let mask = SelectionMask {
        selected: matrix(selected)?,
        pseudo: matrix(pseudo)?,
    };
    if mask.selected.dim() != mask.pseudo.dim() {
        return Err(PercentmatchError::new_err(
            "[shape-mismatch] selected and pseudo differ in shape",
        ));
    }
    let out = losses::unlabeled_loss(&mask, matrix(strong_scores)?.view(), &cfg).map_err(err)?;
    Ok((out.per_class, rows(&out.grad)))
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<u8>) -> Option<f64> {
    metrics::average_precision(Array1::from(scores).view(), Array1::from(labels).view())
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> Option<f64> {
    metrics::roc_auc(Array1::from(scores).view(), Array1::from(labels).view())
}

/// Parse a flat TOML config (text) into a dict with every default filled in.
#[pyfunction]
fn load_config<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_toml_str(text).map_err(err)?;
    to_py(py, &cfg)
}

/// Train one configuration, writing its trace to `trace_path`. `config` is a
/// dict of overrides on top of the defaults. Returns the final report.
#[pyfunction]
#[pyo3(signature = (trace_path, config=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    trace_path: &str,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match config {
        Some(d) => {
            let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            let mut base =
                serde_json::to_value(ExperimentConfig::default()).map_err(|e| err(e.into()))?;
            let overrides: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| err(e.into()))?;
            if let (Some(b), Some(o)) = (base.as_object_mut(), overrides.as_object()) {
                for (k, v) in o {
                    b.insert(k.clone(), v.clone());
                }
            }
            serde_json::from_value::<ExperimentConfig>(base)
                .map_err(|e| err(Error::Config(e.to_string())))?
        }
        None => ExperimentConfig::default(),
    };
    let outcome = py
        .detach(|| run_experiment_to_path(&cfg, trace_path))
        .map_err(err)?;
    to_py(py, &outcome.report)
}

/// Compare traces against the first one's run label.
#[pyfunction]
fn compare<'py>(py: Python<'py>, trace_paths: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let traces = trace_paths
        .iter()
        .map(read_trace_file)
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let cmp = compare_runs(&traces).map_err(err)?;
    to_py(py, &cmp)
}

#[pymodule]
fn percentmatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PercentmatchError", m.py().get_type::<PercentmatchError>())?;
    m.add_class::<PyHistogram>()?;
    m.add_class::<PyThresholds>()?;
    m.add_function(wrap_pyfunction!(loss_weight, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(supervised_loss, m)?)?;
    m.add_function(wrap_pyfunction!(unlabeled_loss, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
