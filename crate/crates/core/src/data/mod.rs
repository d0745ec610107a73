//! Dataset ingestion: the CSV manifest, image decoding and resizing,
//! augmentation, the train/test split and a synthetic two-class corpus.

mod augment;
mod image;
mod manifest;
mod split;
mod synthetic;

pub use augment::{augment, flip_horizontal, rotate, AugmentConfig, AugmentParams};
pub use image::{decode_and_resize, decode_and_resize_to, decode_image, resize_bilinear, INPUT_SIZE};
pub use manifest::{load_manifest, Gender, ManifestRecord};
pub use split::{split_by_subject, split_dataset, split_indices, SplitAssignment};
pub use synthetic::{synthetic_image, write_synthetic_corpus};

use std::path::PathBuf;

use crate::error::Result;
use crate::tensor::Tensor;

/// Indexed access to labelled `(H, W, 3)` images at model resolution.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn image(&self, index: usize) -> Result<Tensor<f32>>;

    fn label(&self, index: usize) -> u8;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Images held in memory.
#[derive(Debug, Clone, Default)]
pub struct InMemoryDataset {
    pub images: Vec<Tensor<f32>>,
    pub labels: Vec<u8>,
}

impl InMemoryDataset {
    pub fn subset(&self, indices: &[usize]) -> Self {
        InMemoryDataset {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

impl SampleSource for InMemoryDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn image(&self, index: usize) -> Result<Tensor<f32>> {
        Ok(self.images[index].clone())
    }

    fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }
}

/// Manifest records decoded from disk on every access.
#[derive(Debug, Clone)]
pub struct ManifestDataset {
    paths: Vec<PathBuf>,
    labels: Vec<u8>,
    size: usize,
}

impl ManifestDataset {
    /// `size` is the square side images are resized to.
    pub fn new(records: &[ManifestRecord], size: usize) -> Self {
        ManifestDataset {
            paths: records.iter().map(|r| r.image_path.clone()).collect(),
            labels: records.iter().map(|r| r.label.index()).collect(),
            size,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        ManifestDataset {
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            size: self.size,
        }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

impl SampleSource for ManifestDataset {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn image(&self, index: usize) -> Result<Tensor<f32>> {
        decode_and_resize_to(&self.paths[index], self.size, self.size)
    }

    fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }
}
