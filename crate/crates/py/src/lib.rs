//! Python bindings: images, the feature stages, configs, models and
//! evaluation.

use std::path::PathBuf;

use gsf_core::codes::{derivatives, gsf_code_map, GsfVariant};
use gsf_core::gabor::compute_gmps as core_compute_gmps;
use gsf_core::imgio::{self, DatasetManifest};
use gsf_core::model_file::{decode_model, encode_model, load_model, save_model};
use gsf_core::pipeline::{self, LabeledImage};
use gsf_core::{EpfdaModel, GsfError, PipelineConfig, PreprocessParams, RasterImage};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: GsfError) -> PyErr {
    match e {
        GsfError::Io(_) | GsfError::UnreadableFile { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Grayscale image with `float` pixels in row-major order.
#[pyclass(name = "RasterImage", module = "gsf", frozen, skip_from_py_object)]
struct PyImage(RasterImage);

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<f64>) -> PyResult<Self> {
        RasterImage::new(width, height, pixels).map(Self).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn pixels(&self) -> Vec<f64> {
        self.0.pixels().to_vec()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PyValueError::new_err(format!("({x}, {y}) outside the image")));
        }
        Ok(self.0.get(x, y))
    }

    fn save_pgm(&self, path: PathBuf) -> PyResult<()> {
        imgio::save_pgm(&self.0, path).map_err(to_py)
    }

    fn resize(&self, width: usize, height: usize) -> PyResult<Self> {
        imgio::resize_crop(&self.0, width, height, imgio::ResizeMode::ScaleAndCrop)
            .map(Self)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("RasterImage({}x{})", self.0.width(), self.0.height())
    }
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<PyImage> {
    imgio::load_image(path).map(PyImage).map_err(to_py)
}

/// Gamma, difference-of-Gaussians and contrast equalization with default
/// parameters unless overridden.
#[pyfunction]
#[pyo3(signature = (img, gamma=0.2, sigma_inner=1.0, sigma_outer=2.0, alpha=0.1, tau=10.0))]
fn preprocess(img: PyRef<'_, PyImage>, gamma: f64, sigma_inner: f64, sigma_outer: f64, alpha: f64, tau: f64) -> PyResult<PyImage> {
    let params = PreprocessParams {
        gamma,
        dog_sigma_inner: sigma_inner,
        dog_sigma_outer: sigma_outer,
        alpha,
        tau,
    };
    gsf_core::preprocess::preprocess(&img.0, &params).map(PyImage).map_err(to_py)
}

/// The 40 Gabor magnitude pictures as `(scale, orientation, image)`.
#[pyfunction]
fn compute_gmps(py: Python<'_>, img: PyRef<'_, PyImage>) -> PyResult<Vec<(usize, usize, PyImage)>> {
    let img = img.0.clone();
    let gmps = py
        .detach(|| core_compute_gmps(&img, &Default::default()))
        .map_err(to_py)?;
    Ok(gmps
        .into_iter()
        .map(|g| (g.scale_index, g.orientation_index, PyImage(g.magnitude)))
        .collect())
}

/// Surface code map of one picture (`gsf1`, `gsf2` or `gsf3`), row-major.
#[pyfunction]
fn gsf_codes(gmp: PyRef<'_, PyImage>, variant: &str) -> PyResult<Vec<u16>> {
    let variant: GsfVariant = variant.parse().map_err(to_py)?;
    let stack = derivatives(&gmp.0).map_err(to_py)?;
    gsf_code_map(&stack, variant).map(|m| m.codes).map_err(to_py)
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    gsf_core::subspace::cosine(&a, &b).map_err(to_py)
}

#[pyclass(name = "Config", module = "gsf", frozen, skip_from_py_object)]
struct PyConfig(PipelineConfig);

#[pymethods]
impl PyConfig {
    /// Parses `key = value` text; an empty string gives the default preset.
    #[new]
    #[pyo3(signature = (text=""))]
    fn new(text: &str) -> PyResult<Self> {
        PipelineConfig::parse(text).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        PipelineConfig::load(path).map(Self).map_err(to_py)
    }

    #[getter]
    fn variant(&self) -> String {
        self.0.feature.variant.to_string()
    }

    #[getter]
    fn region_dim(&self) -> usize {
        self.0.feature.region_dim()
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }
}

/// Per-region feature vectors of one image.
#[pyfunction]
fn extract_features(py: Python<'_>, img: PyRef<'_, PyImage>, config: PyRef<'_, PyConfig>) -> PyResult<Vec<Vec<f64>>> {
    let (img, cfg) = (img.0.clone(), config.0.feature);
    let seq = py.detach(|| pipeline::extract_features(&img, &cfg)).map_err(to_py)?;
    Ok(seq.regions.into_iter().map(|r| r.values).collect())
}

fn labeled(items: Vec<(String, String, PyRef<'_, PyImage>)>) -> Vec<LabeledImage> {
    items
        .into_iter()
        .map(|(id, subject, img)| LabeledImage {
            id,
            subject,
            image: img.0.clone(),
        })
        .collect()
}

/// A trained region-subspace model.
#[pyclass(name = "Model", module = "gsf", frozen)]
struct PyModel(EpfdaModel);

#[pymethods]
impl PyModel {
    /// Trains on the manifest's train split.
    #[staticmethod]
    fn train(py: Python<'_>, config: PyRef<'_, PyConfig>, manifest: PathBuf) -> PyResult<Self> {
        let cfg = config.0;
        py.detach(|| {
            let m = DatasetManifest::load(manifest)?;
            pipeline::train(&m, &cfg)
        })
        .map(Self)
        .map_err(to_py)
    }

    /// Trains on `(id, subject, image)` triples.
    #[staticmethod]
    fn train_images(py: Python<'_>, config: PyRef<'_, PyConfig>, images: Vec<(String, String, PyRef<'_, PyImage>)>) -> PyResult<Self> {
        let cfg = config.0;
        let images = labeled(images);
        py.detach(|| pipeline::train_images(&images, &cfg)).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_model(path).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        decode_model(data).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.0, path).map_err(to_py)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = encode_model(&self.0).map_err(to_py)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights.clone()
    }

    #[getter]
    fn weighted(&self) -> bool {
        self.0.weighted
    }

    #[getter]
    fn output_dims(&self) -> Vec<usize> {
        self.0.regions.iter().map(|r| r.output_dim()).collect()
    }

    #[getter]
    fn projected_dim(&self) -> usize {
        self.0.projected_dim()
    }

    /// Projected parts of an image, one list per region.
    fn project(&self, py: Python<'_>, img: PyRef<'_, PyImage>) -> PyResult<Vec<Vec<f64>>> {
        let img = img.0.clone();
        let faces = py.detach(|| pipeline::enroll(&self.0, &[&img])).map_err(to_py)?;
        Ok(faces.into_iter().next().map(|f| f.parts).unwrap_or_default())
    }

    /// Fused cosine score of two images.
    #[pyo3(signature = (a, b, weighted=true))]
    fn score(&self, py: Python<'_>, a: PyRef<'_, PyImage>, b: PyRef<'_, PyImage>, weighted: bool) -> PyResult<f64> {
        let (a, b) = (a.0.clone(), b.0.clone());
        let weighted = weighted && self.0.weighted;
        py.detach(|| pipeline::match_images(&self.0, &a, &b, weighted)).map_err(to_py)
    }

    /// Rank-1 evaluation of a manifest; returns `(rank1_rate, report_text)`.
    #[pyo3(signature = (manifest, weighted=true))]
    fn evaluate(&self, py: Python<'_>, manifest: PathBuf, weighted: bool) -> PyResult<(f64, String)> {
        let weighted = weighted && self.0.weighted;
        let report = py
            .detach(|| {
                let m = DatasetManifest::load(manifest)?;
                pipeline::evaluate(&self.0, &m, weighted)
            })
            .map_err(to_py)?;
        Ok((report.rank1_rate, report.to_text()))
    }

    /// Rank-1 evaluation of in-memory `(id, subject, image)` sets.
    #[pyo3(signature = (gallery, probes, weighted=true))]
    fn evaluate_images(
        &self,
        py: Python<'_>,
        gallery: Vec<(String, String, PyRef<'_, PyImage>)>,
        probes: Vec<(String, String, PyRef<'_, PyImage>)>,
        weighted: bool,
    ) -> PyResult<(f64, String)> {
        let (gallery, probes) = (labeled(gallery), labeled(probes));
        let weighted = weighted && self.0.weighted;
        let report = py
            .detach(|| pipeline::evaluate_images(&self.0, &gallery, &probes, weighted))
            .map_err(to_py)?;
        Ok((report.rank1_rate, report.to_text()))
    }
}

#[pymodule]
fn gsf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(compute_gmps, m)?)?;
    m.add_function(wrap_pyfunction!(gsf_codes, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    Ok(())
}
