//! A small, self-contained CNN toolkit built around one network: a
//! convolutional trunk whose final feature map is summarised by global
//! average pooling and global max pooling side by side, concatenated and
//! fed to a two-way softmax (female = 0, male = 1).
//!
//! The crate covers everything needed to train and evaluate that model on
//! ear images: dense NHWC tensors, forward/backward kernels, the fixed
//! architecture, binary cross-entropy with Adam, image ingestion and
//! augmentation, classification metrics, and a binary checkpoint format.
//!
//! All numeric code is generic over [`Real`], so the same kernels run in
//! `f32` for training and in `f64` for gradient verification.

pub mod data;
pub mod error;
pub mod features;
pub mod layers;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{build_earnet, build_shrunken, ArchConfig, LayerKind, LayerSpec, ModelGraph};
pub use rng::Rng;
pub use tensor::{Real, Tensor};

/// Forward pass behaviour for layers that differ between training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
