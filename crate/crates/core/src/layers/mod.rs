//! Forward and backward kernels for every layer type in the network.
//!
//! All spatial tensors are NHWC. Kernels are pure functions: backward
//! passes take whatever the forward pass recorded (inputs, argmax maps,
//! dropout masks) explicitly.

mod activation;
mod conv;
mod dense;
mod global;
mod pool;

pub use activation::{dropout, dropout_backward, relu_backward, relu_forward, softmax, softmax_backward};
pub use conv::{conv2d_backward, conv2d_forward, conv2d_forward_direct, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use global::{
    concat_channels, concat_channels_backward, global_avg_pool, global_avg_pool_backward,
    global_max_pool, global_max_pool_backward,
};
pub use pool::{maxpool_backward, maxpool_forward, PoolParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

impl Padding {
    pub fn as_str(self) -> &'static str {
        match self {
            Padding::Valid => "valid",
            Padding::Same => "same",
        }
    }
}

impl std::str::FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" => Ok(Padding::Valid),
            "same" => Ok(Padding::Same),
            other => Err(Error::Config(format!("unknown padding `{other}`"))),
        }
    }
}

/// Output extent and leading pad for a window of size `k` sliding over `n`.
///
/// `same` pads `max((out-1)·s + k - n, 0)` in total with the smaller half
/// before, so an even kernel at stride 1 pads only bottom/right.
pub fn output_extent(n: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if n == 0 || k == 0 || stride == 0 {
        return Err(Error::shape(format!(
            "extent {n}, window {k} and stride {stride} must all be positive"
        )));
    }
    match padding {
        Padding::Valid => {
            if k > n {
                return Err(Error::shape(format!("window {k} larger than input extent {n}")));
            }
            Ok(((n - k) / stride + 1, 0))
        }
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            Ok((out, total / 2))
        }
    }
}

fn expect_rank4(shape: &[usize], what: &str) -> Result<[usize; 4]> {
    match shape {
        &[n, h, w, c] => Ok([n, h, w, c]),
        _ => Err(Error::shape(format!("{what} expects an NHWC tensor, got {shape:?}"))),
    }
}
