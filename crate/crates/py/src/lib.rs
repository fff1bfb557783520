//! Python bindings for the nbids engine.
//!
//! Exposes the pipeline stages as plain functions and thin class
//! wrappers: dataset loading and splitting, model configuration,
//! training, evaluation (returning the metric report as a dict),
//! prediction, and model file round-tripping.
//!
//! ```python
//! import nbids_py as nbids
//!
//! cm = nbids.ClassMap.nbaiot_default()
//! data = nbids.load_dataset("/data/nbaiot", cm, per_class_cap=2000, seed=0)
//! train, val, test = nbids.split_dataset(data, 0.2, 0.1, seed=0)
//! model, history = nbids.train(train, val, nbids.ModelConfig(), nbids.TrainConfig(epochs=5))
//! print(model.evaluate(test)["accuracy"])
//! ```

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use std::path::PathBuf;

use nbids::data;
use nbids::metrics::report::{full_report, EvalTiming};
use nbids::nn::io;
use nbids::nn::model as nn_model;
use nbids::preprocess;
use nbids::trainer;

fn to_py(err: nbids::Error) -> PyErr {
    match &err {
        nbids::Error::Config(_) | nbids::Error::Shape(_) => PyValueError::new_err(err.to_string()),
        nbids::Error::Io(_) => PyIOError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Ordered class-name / glob-pattern pairs defining label indices.
#[pyclass(module = "nbids_py", skip_from_py_object)]
#[derive(Clone)]
struct ClassMap {
    inner: data::ClassMap,
}

#[pymethods]
impl ClassMap {
    /// The standard eight classes (benign plus seven attacks).
    #[staticmethod]
    fn nbaiot_default() -> Self {
        ClassMap {
            inner: data::ClassMap::nbaiot_default(),
        }
    }

    /// Load a class map from a JSON array of {"name", "pattern"} objects.
    #[staticmethod]
    fn from_json(path: PathBuf) -> PyResult<Self> {
        Ok(ClassMap {
            inner: data::ClassMap::from_json_file(&path).map_err(to_py)?,
        })
    }

    fn names(&self) -> Vec<String> {
        self.inner.names()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A labeled sample set with its class names.
#[pyclass(module = "nbids_py", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    samples: Vec<data::Sample>,
    class_names: Vec<String>,
}

#[pymethods]
impl Dataset {
    fn __len__(&self) -> usize {
        self.samples.len()
    }

    fn class_names(&self) -> Vec<String> {
        self.class_names.clone()
    }

    fn class_counts(&self) -> Vec<u64> {
        data::class_counts(&self.samples, self.class_names.len())
    }

    fn features(&self, index: usize) -> PyResult<Vec<f32>> {
        self.samples
            .get(index)
            .map(|s| s.features.clone())
            .ok_or_else(|| PyValueError::new_err(format!("index {index} out of range")))
    }

    fn label(&self, index: usize) -> PyResult<usize> {
        self.samples
            .get(index)
            .map(|s| s.label)
            .ok_or_else(|| PyValueError::new_err(format!("index {index} out of range")))
    }
}

/// Read the N-BaIoT directory layout and label rows via the class map.
#[pyfunction]
#[pyo3(signature = (root, class_map, per_class_cap=None, seed=0))]
fn load_dataset(
    root: PathBuf,
    class_map: &ClassMap,
    per_class_cap: Option<usize>,
    seed: u64,
) -> PyResult<Dataset> {
    let samples =
        data::load_dataset(&root, &class_map.inner, per_class_cap, seed).map_err(to_py)?;
    Ok(Dataset {
        samples,
        class_names: class_map.inner.names(),
    })
}

/// Deterministic stratified split into (train, validation, test).
#[pyfunction]
#[pyo3(signature = (dataset, test_frac, val_frac, seed=0))]
fn split_dataset(
    dataset: &Dataset,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> PyResult<(Dataset, Dataset, Dataset)> {
    let split = data::split_dataset(dataset.samples.clone(), test_frac, val_frac, seed)
        .map_err(to_py)?;
    let wrap = |samples: Vec<data::Sample>| Dataset {
        samples,
        class_names: dataset.class_names.clone(),
    };
    Ok((wrap(split.train), wrap(split.validation), wrap(split.test)))
}

/// Architecture hyperparameters (defaults match the shipped model).
#[pyclass(module = "nbids_py", skip_from_py_object)]
#[derive(Clone)]
struct ModelConfig {
    inner: nn_model::ModelConfig,
}

#[pymethods]
impl ModelConfig {
    #[new]
    #[pyo3(signature = (seq_len=115, conv_filters=64, conv_kernel=5, convnext_blocks=2,
                        convnext_kernel=7, convnext_expansion=4, dense1_units=128,
                        dense2_units=64, dropout_rate=0.1, num_classes=8,
                        layer_scale_init=1e-6))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        seq_len: usize,
        conv_filters: usize,
        conv_kernel: usize,
        convnext_blocks: usize,
        convnext_kernel: usize,
        convnext_expansion: usize,
        dense1_units: usize,
        dense2_units: usize,
        dropout_rate: f64,
        num_classes: usize,
        layer_scale_init: f64,
    ) -> PyResult<Self> {
        let inner = nn_model::ModelConfig {
            seq_len,
            in_channels: 1,
            conv_filters,
            conv_kernel,
            convnext_blocks,
            convnext_dim: conv_filters,
            convnext_kernel,
            convnext_expansion,
            dense1_units,
            dense2_units,
            dropout_rate,
            num_classes,
            layer_scale_init,
        };
        inner.validate().map_err(to_py)?;
        Ok(ModelConfig { inner })
    }

    /// Exact trainable-parameter count with a per-layer breakdown.
    fn param_count(&self) -> (u64, Vec<(String, u64)>) {
        nn_model::param_count(&self.inner)
    }

    /// Coarse closed-form estimate computed from the hyperparameters;
    /// reported for reference, not expected to match the exact count.
    fn param_estimate(&self) -> u128 {
        nn_model::hyperparam_estimate(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Optimizer and training-loop hyperparameters.
#[pyclass(module = "nbids_py", skip_from_py_object)]
#[derive(Clone)]
struct TrainConfig {
    inner: trainer::TrainConfig,
}

#[pymethods]
impl TrainConfig {
    #[new]
    #[pyo3(signature = (learning_rate=0.001, batch_size=128, epochs=10,
                        early_stop_patience=None, seed=0, shuffle_each_epoch=true))]
    fn new(
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        early_stop_patience: Option<usize>,
        seed: u64,
        shuffle_each_epoch: bool,
    ) -> PyResult<Self> {
        let inner = trainer::TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            early_stop_patience,
            seed,
            shuffle_each_epoch,
            ..trainer::TrainConfig::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(TrainConfig { inner })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// A trained classifier with its embedded input scaler.
#[pyclass(module = "nbids_py")]
struct Model {
    inner: nn_model::Model<f32>,
}

impl Model {
    fn prepared(&self, dataset: &Dataset) -> PyResult<trainer::PreparedSet<f32>> {
        trainer::PreparedSet::from_samples(&dataset.samples, &self.inner.scaler).map_err(to_py)
    }
}

#[pymethods]
impl Model {
    /// Class probabilities for one raw (unscaled) feature vector.
    fn predict_proba(&self, features: Vec<f32>) -> PyResult<Vec<f32>> {
        let z = preprocess::transform(&self.inner.scaler, &features).map_err(to_py)?;
        let input = preprocess::to_input_tensor::<f32>(&z);
        Ok(nn_model::predict_proba(&self.inner, &input))
    }

    /// Predicted class name for one raw feature vector.
    fn predict(&self, features: Vec<f32>) -> PyResult<String> {
        let probs = self.predict_proba(features)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(self.inner.class_names[best].clone())
    }

    /// Score a dataset; returns a dict with accuracy, loss, averaged
    /// metrics, per-class AUC, the confusion matrix, timing, and the
    /// full report as nested data under "report".
    fn evaluate<'py>(&self, py: Python<'py>, dataset: &Dataset) -> PyResult<Bound<'py, PyDict>> {
        let set = self.prepared(dataset)?;
        let evaluation = trainer::evaluate(&self.inner, &set, 128).map_err(to_py)?;
        let timing = EvalTiming {
            seconds: evaluation.seconds,
            ms_per_step: evaluation.ms_per_step,
            steps: evaluation.steps,
        };
        let report = full_report(
            &evaluation.labels,
            &evaluation.predictions,
            &evaluation.probabilities,
            self.inner.class_names.clone(),
            Some(timing),
        )
        .map_err(to_py)?;

        let out = PyDict::new(py);
        out.set_item("accuracy", report.accuracy)?;
        out.set_item("loss", evaluation.loss)?;
        out.set_item("macro_f1", report.macro_avg.f1)?;
        out.set_item("macro_mcc", report.macro_mcc)?;
        out.set_item("weighted_precision", report.weighted_avg.precision)?;
        out.set_item("weighted_recall", report.weighted_avg.recall)?;
        out.set_item("per_class_auc", report.per_class_auc.clone())?;
        out.set_item("confusion", report.confusion.clone())?;
        out.set_item("predictions", evaluation.predictions.clone())?;
        out.set_item("seconds", evaluation.seconds)?;
        out.set_item("ms_per_step", evaluation.ms_per_step)?;
        let report_json: serde_json::Value =
            serde_json::from_str(&report.to_json_string().map_err(to_py)?)
                .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        out.set_item("report", json_to_py(py, &report_json)?)?;
        Ok(out)
    }

    fn class_names(&self) -> Vec<String> {
        self.inner.class_names.clone()
    }

    fn param_count(&self) -> (u64, Vec<(String, u64)>) {
        nn_model::param_count(&self.inner.config)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_model(&self.inner, &path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            inner: io::load_model(&path).map_err(to_py)?,
        })
    }
}

/// Fit the scaler on the training set, train a freshly initialized
/// model, and return it with the per-epoch history (list of dicts).
#[pyfunction]
#[pyo3(signature = (train_set, validation_set, model_config, train_config))]
fn train<'py>(
    py: Python<'py>,
    train_set: &Dataset,
    validation_set: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> PyResult<(Model, Bound<'py, PyList>)> {
    let scaler = preprocess::fit_scaler(&train_set.samples).map_err(to_py)?;
    let prepared_train =
        trainer::PreparedSet::<f32>::from_samples(&train_set.samples, &scaler).map_err(to_py)?;
    let prepared_val =
        trainer::PreparedSet::<f32>::from_samples(&validation_set.samples, &scaler)
            .map_err(to_py)?;

    let mut model =
        nn_model::init_model::<f32>(&model_config.inner, train_config.inner.seed).map_err(to_py)?;
    model.scaler = scaler;
    model.class_names = train_set.class_names.clone();

    let records = py
        .detach(|| trainer::fit(&mut model, &prepared_train, &prepared_val, &train_config.inner))
        .map_err(to_py)?;

    let history = PyList::empty(py);
    for r in &records {
        let row = PyDict::new(py);
        row.set_item("epoch", r.epoch)?;
        row.set_item("train_loss", r.train_loss)?;
        row.set_item("train_acc", r.train_acc)?;
        row.set_item("val_loss", r.val_loss)?;
        row.set_item("val_acc", r.val_acc)?;
        row.set_item("seconds", r.seconds)?;
        row.set_item("ms_per_step", r.ms_per_step)?;
        history.append(row)?;
    }
    Ok((Model { inner: model }, history))
}

/// Standardization parameters fitted on a training set, exposed for
/// inspection.
#[pyfunction]
fn fit_scaler(train_set: &Dataset) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let scaler = preprocess::fit_scaler(&train_set.samples).map_err(to_py)?;
    Ok((scaler.mean, scaler.std))
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.unbind().into(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into()
        }
    })
}

#[pymodule]
fn nbids_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ClassMap>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<ModelConfig>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(split_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaler, m)?)?;
    m.add("NUM_FEATURES", data::NUM_FEATURES)?;
    Ok(())
}
