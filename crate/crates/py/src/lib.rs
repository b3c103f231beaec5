//! Python bindings for `sdm_core`.
//!
//! Errors surface as `ValueError`, except I/O failures which raise `OSError`.

use std::fs::File;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sdm_core::data::{self, EnvironmentLayers};
use sdm_core::ensemble::{self, ForestParams, GbtParams, ProbabilityModel};
use sdm_core::geo::{self, BoundingBox, GeoPoint};
use sdm_core::map;
use sdm_core::metrics::{self, MetricsRecord, MetricsReport};
use sdm_core::pipeline::{self, IngestConfig, ModelSpec};
use sdm_core::tree::MaxFeatures;
use sdm_core::SdmError;

fn py_err(e: SdmError) -> PyErr {
    match e {
        SdmError::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn max_features(text: &str) -> PyResult<MaxFeatures> {
    text.parse().map_err(|e: SdmError| py_err(e))
}

/// Gridded layer read from ESRI ASCII text.
#[pyclass(name = "Raster", module = "sdm_py", frozen)]
struct PyRaster(geo::Raster);

#[pymethods]
impl PyRaster {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        geo::parse_ascii_grid(text).map(PyRaster).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        geo::read_ascii_grid(path).map(PyRaster).map_err(py_err)
    }

    #[getter]
    fn ncols(&self) -> usize {
        self.0.ncols()
    }

    #[getter]
    fn nrows(&self) -> usize {
        self.0.nrows()
    }

    #[getter]
    fn cellsize(&self) -> f64 {
        self.0.cellsize()
    }

    /// Value of the cell containing the point, or None off-grid / on nodata.
    fn sample(&self, lat: f64, lon: f64) -> Option<f64> {
        self.0.sample(GeoPoint { lat, lon })
    }

    fn to_ascii_grid(&self) -> String {
        self.0.to_ascii_grid()
    }

    fn __repr__(&self) -> String {
        format!("Raster({} x {}, cellsize {})", self.0.nrows(), self.0.ncols(), self.0.cellsize())
    }
}

/// Labeled feature matrix.
#[pyclass(name = "Dataset", module = "sdm_py", frozen)]
struct PyDataset(data::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (path, species = "unknown"))]
    fn read_csv(path: &str, species: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        data::read_dataset_csv(file, species).map(PyDataset).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (text, species = "unknown"))]
    fn from_csv(text: &str, species: &str) -> PyResult<Self> {
        data::read_dataset_csv(text.as_bytes(), species).map(PyDataset).map_err(py_err)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        data::write_dataset_csv(&self.0, &mut buf).map_err(py_err)?;
        Ok(String::from_utf8(buf).expect("csv writer emits utf-8"))
    }

    #[getter]
    fn species(&self) -> String {
        self.0.species.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.0.feature_names.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.0.features()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.0.labels()
    }

    /// `(absent, present)` counts.
    fn class_counts(&self) -> (usize, usize) {
        let [neg, pos] = self.0.class_counts();
        (neg, pos)
    }

    /// Stratified 70:10:20 `(train, val, test)` split.
    fn split(&self, seed: u64) -> PyResult<(PyDataset, PyDataset, PyDataset)> {
        let parts = data::split(&self.0, seed).map_err(py_err)?;
        Ok((PyDataset(parts.train), PyDataset(parts.val), PyDataset(parts.test)))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let [neg, pos] = self.0.class_counts();
        format!("Dataset('{}', {} rows, {pos} present / {neg} absent)", self.0.species, self.0.len())
    }
}

fn report_dict<'py>(py: Python<'py>, report: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", report.accuracy)?;
    d.set_item("precision", report.precision)?;
    d.set_item("recall", report.recall)?;
    d.set_item("f1", report.f1)?;
    d.set_item("auc", report.auc)?;
    let c = PyDict::new(py);
    c.set_item("tp", report.confusion.tp)?;
    c.set_item("fp", report.confusion.fp)?;
    c.set_item("fn", report.confusion.fn_)?;
    c.set_item("tn", report.confusion.tn)?;
    d.set_item("confusion", c)?;
    let degenerate: Vec<String> = report.degenerate.iter().map(|m| format!("{m:?}").to_lowercase()).collect();
    d.set_item("degenerate", degenerate)?;
    Ok(d)
}

/// Random forest or gradient boosted ensemble.
#[pyclass(name = "Model", module = "sdm_py", frozen)]
struct PyModel(ensemble::Model);

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (train, seed, n_trees = 100, max_depth = 10, min_samples_split = 2, max_features = "sqrt"))]
    fn random_forest(
        py: Python<'_>,
        train: &PyDataset,
        seed: u64,
        n_trees: usize,
        max_depth: usize,
        min_samples_split: usize,
        max_features: &str,
    ) -> PyResult<Self> {
        let spec = ModelSpec::RandomForest(ForestParams {
            n_trees,
            max_depth,
            min_samples_split,
            max_features: self::max_features(max_features)?,
        });
        py.detach(|| pipeline::train(&spec, &train.0, seed)).map(PyModel).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (train, seed, n_trees = 100, learning_rate = 0.1, max_depth = 3, min_samples_split = 2, max_features = "all"))]
    #[allow(clippy::too_many_arguments)]
    fn gradient_boosting(
        py: Python<'_>,
        train: &PyDataset,
        seed: u64,
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
        min_samples_split: usize,
        max_features: &str,
    ) -> PyResult<Self> {
        let spec = ModelSpec::GradientBoosting(GbtParams {
            n_trees,
            learning_rate,
            max_depth,
            min_samples_split,
            max_features: self::max_features(max_features)?,
        });
        py.detach(|| pipeline::train(&spec, &train.0, seed)).map(PyModel).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ensemble::Model::from_json(text).map(PyModel).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ensemble::Model::load(path).map(PyModel).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    /// `"rf"` or `"gbt"`.
    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.0.feature_names().to_vec()
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.0.trees().len()
    }

    fn predict_proba(&self, py: Python<'_>, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        py.detach(|| self.0.predict_proba(&x)).map_err(py_err)
    }

    #[pyo3(signature = (x, theta = ensemble::DEFAULT_THETA))]
    fn predict(&self, py: Python<'_>, x: Vec<Vec<f64>>, theta: f64) -> PyResult<Vec<u8>> {
        py.detach(|| self.0.predict(&x, theta)).map(|p| p.labels).map_err(py_err)
    }

    /// Normalized impurity importance keyed by feature name, in column order.
    fn feature_importance<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (name, weight) in ensemble::feature_importance(&self.0).weights {
            d.set_item(name, weight)?;
        }
        Ok(d)
    }

    /// Metrics dict in the report JSON layout.
    #[pyo3(signature = (data, theta = ensemble::DEFAULT_THETA, split = "test"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        data: &PyDataset,
        theta: f64,
        split: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report = py.detach(|| pipeline::evaluate(&self.0, &data.0, theta)).map_err(py_err)?;
        let record = MetricsRecord::new(&data.0.species, self.0.kind(), split, &report);
        let d = report_dict(py, &report)?;
        d.set_item("species", record.species)?;
        d.set_item("model", record.model)?;
        d.set_item("split", record.split)?;
        Ok(d)
    }

    /// Scores cell centers of `bbox = (min_lat, max_lat, min_lon, max_lon)`;
    /// returns `(lat, lon, probability or None)` rows north to south.
    #[pyo3(signature = (elevation, precipitation, temperature, bbox, step = map::DEFAULT_STEP_DEG))]
    fn predict_map(
        &self,
        py: Python<'_>,
        elevation: &PyRaster,
        precipitation: &PyRaster,
        temperature: &PyRaster,
        bbox: (f64, f64, f64, f64),
        step: f64,
    ) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
        let layers = EnvironmentLayers {
            elevation: elevation.0.clone(),
            precipitation: precipitation.0.clone(),
            temperature: temperature.0.clone(),
        };
        let bbox = BoundingBox::new(bbox.0, bbox.1, bbox.2, bbox.3).map_err(py_err)?;
        let grid = py.detach(|| map::predict_grid(&self.0, &layers, &bbox, step)).map_err(py_err)?;
        Ok(grid.cells.iter().map(|c| (c.point.lat, c.point.lon, c.probability)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({}, {} trees)", self.0.kind(), self.0.trees().len())
    }
}

/// Great-circle distance in kilometres.
#[pyfunction]
fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    geo::haversine_km(GeoPoint { lat: lat1, lon: lon1 }, GeoPoint { lat: lat2, lon: lon2 })
}

/// Rank-based ROC AUC with average ranks for ties.
#[pyfunction]
fn auc_roc(y_true: Vec<u8>, scores: Vec<f64>) -> PyResult<f64> {
    metrics::auc_roc(&y_true, &scores).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (y_true, probs, theta = ensemble::DEFAULT_THETA))]
fn classification_report<'py>(
    py: Python<'py>,
    y_true: Vec<u8>,
    probs: Vec<f64>,
    theta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = metrics::classification_report(&y_true, &probs, theta).map_err(py_err)?;
    report_dict(py, &report)
}

/// Gaussian two-cluster dataset with presences first.
#[pyfunction]
#[pyo3(signature = (n = 500, separation = 4.0, seed = 0))]
fn two_clusters(n: usize, separation: f64, seed: u64) -> PyResult<PyDataset> {
    sdm_core::synth::two_clusters(n, separation, seed).map(PyDataset).map_err(py_err)
}

/// Sightings CSV plus rasters to a balanced `(train, val, test)` split.
#[pyfunction]
#[pyo3(signature = (
    observations_csv, elevation, precipitation, temperature, species, seed,
    n_per_class = data::DEFAULT_PER_CLASS, min_dist_km = data::DEFAULT_MIN_DIST_KM
))]
#[allow(clippy::too_many_arguments)]
fn ingest(
    observations_csv: &str,
    elevation: &PyRaster,
    precipitation: &PyRaster,
    temperature: &PyRaster,
    species: &str,
    seed: u64,
    n_per_class: usize,
    min_dist_km: f64,
) -> PyResult<(PyDataset, PyDataset, PyDataset)> {
    let observations = data::parse_observations_csv(observations_csv).map_err(py_err)?;
    let layers = EnvironmentLayers {
        elevation: elevation.0.clone(),
        precipitation: precipitation.0.clone(),
        temperature: temperature.0.clone(),
    };
    let config = IngestConfig {
        n_per_class,
        min_dist_km,
        ..IngestConfig::new(species, seed)
    };
    let out = pipeline::ingest(&observations, &layers, &config).map_err(py_err)?;
    Ok((PyDataset(out.split.train), PyDataset(out.split.val), PyDataset(out.split.test)))
}

#[pymodule]
fn sdm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRaster>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(auc_roc, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_function(wrap_pyfunction!(two_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add("FEATURE_NAMES", data::FEATURE_NAMES.to_vec())?;
    Ok(())
}
