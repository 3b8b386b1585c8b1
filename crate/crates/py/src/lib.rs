//! Python bindings: configuration, simulation, training, the baselines, the
//! wrench estimator and the benchmark. Matrices cross the boundary as nested
//! lists; reports come back as plain dicts.

use std::path::PathBuf;

use forcesense_core::baselines::{build_index, fit_bias, BiasModel, LookupIndex, MeasurementOnly};
use forcesense_core::config::RunConfig;
use forcesense_core::datagen::{load_csv, save_csv, Dataset as CoreDataset, Profile};
use forcesense_core::estimator::{estimate_wrench as core_estimate, SolvePolicy};
use forcesense_core::evaluation::{
    generate_profile_data, render_table, run_benchmark, BenchmarkReport,
};
use forcesense_core::manipulator::{self, JointVector, KinematicChain, N_JOINTS};
use forcesense_core::predictor::{self, load_model, save_model, JointModelSet};
use forcesense_core::{Error, TorquePredictor};
use nalgebra::Matrix6;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_profile(name: &str) -> PyResult<Profile> {
    name.parse()
        .map_err(|e| PyValueError::new_err(format!("{e}")))
}

fn joint_vector(v: Vec<f64>, what: &str) -> PyResult<JointVector> {
    if v.len() != N_JOINTS {
        return Err(PyValueError::new_err(format!(
            "{what} must have {N_JOINTS} entries, got {}",
            v.len()
        )));
    }
    Ok(JointVector::from_column_slice(&v))
}

fn matrix6(rows: Vec<Vec<f64>>, what: &str) -> PyResult<Matrix6<f64>> {
    if rows.len() != 6 || rows.iter().any(|r| r.len() != 6) {
        return Err(PyValueError::new_err(format!("{what} must be 6x6")));
    }
    Ok(Matrix6::from_fn(|r, c| rows[r][c]))
}

fn rows_of(m: &Matrix6<f64>) -> Vec<Vec<f64>> {
    (0..6)
        .map(|r| (0..6).map(|c| m[(r, c)]).collect())
        .collect()
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn predictions_to_py(p: Vec<Option<JointVector>>) -> Vec<Option<Vec<f64>>> {
    p.into_iter()
        .map(|v| v.map(|v| v.as_slice().to_vec()))
        .collect()
}

/// Run configuration. `Config()` gives the defaults; `Config(json)` parses a
/// JSON document strictly.
#[pyclass(module = "forcesense", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: RunConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => RunConfig::from_json(text).map_err(to_py)?,
            None => RunConfig::default(),
        };
        inner.validate().map_err(to_py)?;
        Ok(Config { inner })
    }

    /// Loads a file and applies `FORCESENSE_SEED`, like the command line.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Config {
            inner: RunConfig::load(Some(&path)).map_err(to_py)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_pretty()
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(seed={}, fingerprint={})",
            self.inner.seed,
            &self.inner.fingerprint()[..12]
        )
    }
}

/// The simulated arm.
#[pyclass(module = "forcesense", from_py_object)]
#[derive(Clone)]
struct Chain {
    inner: KinematicChain,
}

#[pymethods]
impl Chain {
    #[staticmethod]
    fn reference() -> Self {
        Chain {
            inner: KinematicChain::reference(),
        }
    }

    #[staticmethod]
    fn from_config(config: &Config) -> Self {
        Chain {
            inner: config.inner.chain.clone(),
        }
    }

    /// Base-to-tip homogeneous transform as a 4x4 nested list.
    fn forward_kinematics(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let t =
            manipulator::forward_kinematics(&self.inner, &joint_vector(q, "q")?).map_err(to_py)?;
        Ok((0..4)
            .map(|r| (0..4).map(|c| t[(r, c)]).collect())
            .collect())
    }

    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = manipulator::jacobian(&self.inner, &joint_vector(q, "q")?).map_err(to_py)?;
        Ok(rows_of(&j))
    }

    fn gravity_torque(&self, q: Vec<f64>) -> PyResult<Vec<f64>> {
        let t = manipulator::gravity_torque(&self.inner, &joint_vector(q, "q")?).map_err(to_py)?;
        Ok(t.as_slice().to_vec())
    }
}

#[pyclass(module = "forcesense", from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Dataset {
            inner: load_csv(&path).map_err(to_py)?,
        })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        save_csv(&self.inner, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn profile(&self) -> String {
        self.inner.meta.profile.to_string()
    }

    #[getter]
    fn rate_hz(&self) -> f64 {
        self.inner.rate_hz
    }

    /// `(train, val, test)` sample counts.
    #[getter]
    fn partition(&self) -> (usize, usize, usize) {
        self.inner.partition.sizes()
    }

    fn t(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.state.t).collect()
    }

    fn q(&self) -> Vec<Vec<f64>> {
        self.inner
            .samples
            .iter()
            .map(|s| s.state.q.as_slice().to_vec())
            .collect()
    }

    fn qd(&self) -> Vec<Vec<f64>> {
        self.inner
            .samples
            .iter()
            .map(|s| s.state.qd.as_slice().to_vec())
            .collect()
    }

    fn tau_measured(&self) -> Vec<Vec<f64>> {
        self.inner
            .samples
            .iter()
            .map(|s| s.tau_measured.as_slice().to_vec())
            .collect()
    }

    fn tau_free_truth(&self) -> Vec<Vec<f64>> {
        self.inner
            .samples
            .iter()
            .map(|s| s.tau_free_truth.as_slice().to_vec())
            .collect()
    }

    /// Ground-truth contact wrench `[fx, fy, fz, tx, ty, tz]` per sample, or
    /// `None` for free-space samples.
    fn contact_wrench(&self) -> Vec<Option<Vec<f64>>> {
        self.inner
            .samples
            .iter()
            .map(|s| {
                s.contact_wrench_truth
                    .map(|w| w.to_vector().as_slice().to_vec())
            })
            .collect()
    }

    fn jacobian(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let s = self
            .inner
            .samples
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("sample {index} out of range")))?;
        Ok(rows_of(&s.jacobian))
    }
}

/// Generates the free-space and contact datasets of one profile.
#[pyfunction]
fn generate_data(py: Python<'_>, config: &Config, profile: &str) -> PyResult<(Dataset, Dataset)> {
    let p = parse_profile(profile)?;
    let cfg = config.inner.clone();
    let data = py
        .detach(move || generate_profile_data(&cfg, p))
        .map_err(to_py)?;
    Ok((
        Dataset {
            inner: data.freespace,
        },
        Dataset {
            inner: data.contact,
        },
    ))
}

/// Six trained per-joint recurrent networks.
#[pyclass(module = "forcesense", from_py_object)]
#[derive(Clone)]
struct Model {
    inner: JointModelSet,
    fingerprint: String,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, fingerprint) = load_model(&path).map_err(to_py)?;
        Ok(Model { inner, fingerprint })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &self.fingerprint, &path).map_err(to_py)
    }

    #[getter]
    fn config_fingerprint(&self) -> String {
        self.fingerprint.clone()
    }

    #[getter]
    fn window_len(&self) -> usize {
        self.inner.window_len()
    }

    /// Per-joint `(epoch, train_loss, val_loss)` records.
    fn history(&self) -> Vec<Vec<(usize, f64, f64)>> {
        self.inner
            .models
            .iter()
            .map(|m| {
                m.history
                    .iter()
                    .map(|h| (h.epoch, h.train_loss, h.val_loss))
                    .collect()
            })
            .collect()
    }

    /// Predicted free-space torque per sample; `None` during warm-up.
    fn predict(&self, py: Python<'_>, dataset: &Dataset) -> Vec<Option<Vec<f64>>> {
        predictions_to_py(py.detach(|| self.inner.predict_series(&dataset.inner.samples)))
    }
}

#[pyfunction]
fn train(py: Python<'_>, config: &Config, dataset: &Dataset) -> PyResult<Model> {
    let pcfg = config.inner.predictor_for(dataset.inner.meta.profile);
    let inner = py
        .detach(|| predictor::train(&dataset.inner, &pcfg))
        .map_err(to_py)?;
    Ok(Model {
        inner,
        fingerprint: config.inner.fingerprint(),
    })
}

enum BaselineKind {
    MeasureOnly,
    Bias(BiasModel),
    Lookup(LookupIndex),
}

/// A fitted baseline: `measure_only`, `bias` or `vector_search`.
#[pyclass(module = "forcesense")]
struct Baseline {
    kind: BaselineKind,
}

impl Baseline {
    fn predictor(&self) -> &dyn TorquePredictor {
        match &self.kind {
            BaselineKind::MeasureOnly => &MeasurementOnly,
            BaselineKind::Bias(b) => b,
            BaselineKind::Lookup(l) => l,
        }
    }
}

#[pymethods]
impl Baseline {
    /// Fits on the train split of a free-space dataset with the config's
    /// baseline parameters.
    #[staticmethod]
    fn fit(py: Python<'_>, method: &str, config: &Config, dataset: &Dataset) -> PyResult<Self> {
        let train = dataset.inner.train();
        let b = &config.inner.baselines;
        let kind = match method {
            "measure_only" => BaselineKind::MeasureOnly,
            "bias" => BaselineKind::Bias(fit_bias(train, b.velocity_eps).map_err(to_py)?),
            "vector_search" => {
                BaselineKind::Lookup(py.detach(|| build_index(train, b.k)).map_err(to_py)?)
            }
            other => return Err(PyValueError::new_err(format!("unknown baseline {other:?}"))),
        };
        Ok(Baseline { kind })
    }

    #[getter]
    fn method(&self) -> String {
        self.predictor().method().to_string()
    }

    /// The fitted bias vector (bias baseline only).
    #[getter]
    fn bias(&self) -> Option<Vec<f64>> {
        match &self.kind {
            BaselineKind::Bias(b) => Some(b.bias.as_slice().to_vec()),
            _ => None,
        }
    }

    fn predict(&self, py: Python<'_>, dataset: &Dataset) -> Vec<Option<Vec<f64>>> {
        predictions_to_py(py.detach(|| self.predictor().predict_series(&dataset.inner.samples)))
    }
}

/// `F = J^{-T} (tau - tau_hat)`. `policy` is `"exact"`, `"damped"` or
/// `"default"` (exact with damped fallback).
#[pyfunction]
#[pyo3(signature = (jacobian, tau, tau_hat, policy="default", kappa_max=1e8, damping=1e-6))]
fn estimate_wrench<'py>(
    py: Python<'py>,
    jacobian: Vec<Vec<f64>>,
    tau: Vec<f64>,
    tau_hat: Vec<f64>,
    policy: &str,
    kappa_max: f64,
    damping: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let policy = match policy {
        "exact" => SolvePolicy::Exact { kappa_max },
        "damped" => SolvePolicy::Damped { lambda: damping },
        "default" => SolvePolicy::ExactWithFallback {
            kappa_max,
            lambda_scale: damping,
        },
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    };
    policy.validate().map_err(to_py)?;
    let j = matrix6(jacobian, "jacobian")?;
    let e = core_estimate(
        &j,
        &joint_vector(tau, "tau")?,
        &joint_vector(tau_hat, "tau_hat")?,
        policy,
        forcesense_core::Method::Nn,
    )
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("wrench", e.wrench.to_vector().as_slice().to_vec())?;
    d.set_item("residual_torque", e.residual_torque.as_slice().to_vec())?;
    d.set_item("jacobian_condition", e.jacobian_condition)?;
    d.set_item("solve", format!("{:?}", e.solve).to_lowercase())?;
    Ok(d)
}

/// Full benchmark of one profile; returns the report as a dict.
#[pyfunction]
fn benchmark<'py>(py: Python<'py>, config: &Config, profile: &str) -> PyResult<Bound<'py, PyAny>> {
    let p = parse_profile(profile)?;
    let cfg = config.inner.clone();
    let run = py.detach(move || run_benchmark(&cfg, p)).map_err(to_py)?;
    json_to_py(py, &run.report)
}

/// Renders report dicts (as returned by `benchmark`) as the text table.
#[pyfunction]
fn table(py: Python<'_>, reports: Vec<Bound<'_, PyAny>>) -> PyResult<String> {
    let json = py.import("json")?;
    let parsed = reports
        .iter()
        .map(|r| {
            let text: String = json.call_method1("dumps", (r,))?.extract()?;
            serde_json::from_str::<BenchmarkReport>(&text)
                .map_err(|e| PyValueError::new_err(e.to_string()))
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok(render_table(&parsed))
}

#[pymodule]
fn forcesense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Chain>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Baseline>()?;
    m.add_function(wrap_pyfunction!(generate_data, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_wrench, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(table, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
