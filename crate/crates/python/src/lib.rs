//! Python bindings for the earconv crate.
//!
//! Tensors cross the boundary as flat row-major lists plus a shape, so the
//! module needs nothing beyond the standard library on the Python side.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use earconv::data::{decode_and_resize_to, load_manifest, AugmentConfig, ManifestDataset};
use earconv::metrics::{self, predict_class, EvalReport, CLASS_NAMES};
use earconv::model::{build, load_checkpoint, render_architecture, save_checkpoint};
use earconv::train::{evaluate, train_loop, TrainConfig};
use earconv::{ArchConfig, Error, ModelGraph, Tensor};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Decode { .. } | Error::Manifest(_) | Error::Checkpoint(_) => {
            PyOSError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows<const K: usize>(flat: &[f64]) -> Vec<[f64; K]> {
    flat.chunks(K).map(|c| c.try_into().expect("row width")).collect()
}

/// A network with 32-bit parameters.
#[pyclass(module = "earconv_py")]
pub struct Model {
    inner: ModelGraph<f32>,
}

impl Model {
    fn batch(&self, pixels: Vec<f32>) -> PyResult<Tensor<f32>> {
        let per_image: usize = self.inner.input_shape().iter().product();
        if pixels.is_empty() || !pixels.len().is_multiple_of(per_image) {
            return Err(PyValueError::new_err(format!(
                "expected a multiple of {per_image} values for {:?} images, got {}",
                self.inner.input_shape(),
                pixels.len()
            )));
        }
        let mut shape = vec![pixels.len() / per_image];
        shape.extend_from_slice(self.inner.input_shape());
        Tensor::from_vec(&shape, pixels).map_err(to_py)
    }
}

#[pymethods]
impl Model {
    /// Full-size network for 256x256 RGB input.
    #[staticmethod]
    #[pyo3(signature = (seed = 0))]
    fn earnet(seed: u64) -> Self {
        Model { inner: earconv::build_earnet(seed) }
    }

    /// Same topology with widths divided by eight.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, input_size = 36))]
    fn shrunken(seed: u64, input_size: usize) -> PyResult<Self> {
        let inner = build(&ArchConfig::shrunken_with_input(input_size), seed).map_err(to_py)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model { inner: load_checkpoint(path).map_err(to_py)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn input_shape(&self) -> Vec<usize> {
        self.inner.input_shape().to_vec()
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.meta.arch.clone()
    }

    #[getter]
    fn epoch(&self) -> u64 {
        self.inner.meta.epoch
    }

    /// `(id, display name, output shape, parameter count)` per layer.
    fn layers(&self) -> Vec<(String, String, Vec<usize>, usize)> {
        self.inner
            .layers()
            .iter()
            .zip(self.inner.output_shapes())
            .map(|(l, s)| (l.id.clone(), l.name.clone(), s.clone(), l.kind.param_count()))
            .collect()
    }

    fn summary(&self) -> PyResult<String> {
        render_architecture(self.inner.layers()).map_err(to_py)
    }

    /// Eval-mode `[p_female, p_male]` rows for a flat NHWC batch.
    fn predict(&self, pixels: Vec<f32>) -> PyResult<Vec<[f64; 2]>> {
        let probs = self.inner.predict(&self.batch(pixels)?).map_err(to_py)?;
        Ok(rows(&probs.cast::<f64>().into_vec()))
    }

    /// `(p_female, p_male, class name)` for an image file.
    fn predict_image(&self, path: PathBuf) -> PyResult<(f64, f64, &'static str)> {
        let s = self.inner.input_shape();
        let img = decode_and_resize_to(&path, s[0], s[1]).map_err(to_py)?;
        let p = self.predict(img.into_vec())?[0];
        Ok((p[0], p[1], CLASS_NAMES[predict_class(p[0], p[1]) as usize]))
    }

    /// Post-activation output of one layer as `(shape, flat values)`.
    fn feature_map(&self, pixels: Vec<f32>, layer: &str) -> PyResult<(Vec<usize>, Vec<f32>)> {
        let x = self.batch(pixels)?;
        let map = self.inner.extract_feature_maps(&x, &[layer]).map_err(to_py)?.remove(0);
        Ok((map.shape().to_vec(), map.into_vec()))
    }

    /// Trains in place on every image of a manifest and returns one
    /// `(epoch, train_loss, train_acc)` tuple per epoch.
    #[pyo3(signature = (manifest, epochs = 100, batch_size = 32, learning_rate = 0.001, seed = 0, augment = true))]
    fn train(
        &mut self,
        manifest: PathBuf,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
        augment: bool,
    ) -> PyResult<Vec<(usize, f64, f64)>> {
        let records = load_manifest(manifest).map_err(to_py)?;
        let data = ManifestDataset::new(&records, self.inner.input_shape()[0]);
        let cfg = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            seed,
            augment: if augment { AugmentConfig::default() } else { AugmentConfig::disabled() },
            ..TrainConfig::default()
        };
        let log = train_loop(&mut self.inner, &data, None, &cfg, |_, _| Ok(())).map_err(to_py)?;
        Ok(log.epochs.iter().map(|r| (r.epoch, r.train_loss, r.train_acc)).collect())
    }

    /// Evaluation report of a manifest, as JSON.
    #[pyo3(signature = (manifest, batch_size = 32))]
    fn evaluate(&self, manifest: PathBuf, batch_size: usize) -> PyResult<String> {
        let records = load_manifest(manifest).map_err(to_py)?;
        let data = ManifestDataset::new(&records, self.inner.input_shape()[0]);
        Ok(evaluate(&self.inner, &data, batch_size).map_err(to_py)?.to_json())
    }

    fn __repr__(&self) -> String {
        format!("Model(arch={:?}, params={}, epoch={})", self.inner.meta.arch, self.param_count(), self.epoch())
    }
}

/// Row-wise softmax of `(n, k)` logits.
#[pyfunction]
fn softmax(logits: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let k = logits.first().map_or(0, Vec::len);
    if logits.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("ragged logits"));
    }
    let t = Tensor::from_vec(&[logits.len(), k], logits.concat()).map_err(to_py)?;
    let p = earconv::layers::softmax(&t).map_err(to_py)?;
    Ok(p.data().chunks(k).map(<[f64]>::to_vec).collect())
}

/// Mean binary cross-entropy of the class-1 column and its gradient.
#[pyfunction]
fn bce_loss(probs: Vec<[f64; 2]>, labels: Vec<u8>) -> PyResult<(f64, Vec<[f64; 2]>)> {
    let t = Tensor::from_vec(&[probs.len(), 2], probs.concat()).map_err(to_py)?;
    let (loss, grad) = earconv::train::bce_loss(&t, &labels).map_err(to_py)?;
    Ok((loss, rows(grad.data())))
}

/// `(roc points, auc)` for class-1 scores.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<(Vec<(f64, f64)>, f64)> {
    metrics::roc_auc(&scores, &labels).map_err(to_py)
}

/// 2x2 counts, rows actual, columns predicted.
#[pyfunction]
fn confusion(labels: Vec<u8>, predictions: Vec<u8>) -> PyResult<[[u64; 2]; 2]> {
    Ok(metrics::confusion(&labels, &predictions).map_err(to_py)?.0)
}

/// JSON report for `[p_female, p_male]` rows.
#[pyfunction]
fn evaluate_probs(probs: Vec<[f64; 2]>, labels: Vec<u8>) -> PyResult<String> {
    Ok(EvalReport::from_probs(&probs, &labels).map_err(to_py)?.to_json())
}

/// Writes the synthetic corpus and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (directory, count = 16, size = 64, seed = 0))]
fn write_synthetic_corpus(directory: PathBuf, count: usize, size: usize, seed: u64) -> PyResult<PathBuf> {
    earconv::data::write_synthetic_corpus(directory, count, size, seed).map_err(to_py)
}

#[pymodule]
fn earconv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(bce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_probs, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_corpus, m)?)?;
    m.add("CLASS_NAMES", CLASS_NAMES.to_vec())?;
    Ok(())
}
