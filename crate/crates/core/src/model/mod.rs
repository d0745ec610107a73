//! The dual-pooling network: layer specifications, the fixed architecture,
//! parameter storage, execution and checkpoints.
//!
//! Kernel, stride and padding of each layer follow from its output shape
//! and parameter count:
//!
//! | layer | kernel / stride / padding | follows from |
//! |-------|---------------------------|-----|
//! | Conv1 | 5×5 / 2 / valid | 38,912 = 5·5·3·512 + 512 and 256 → 126 |
//! | Conv2–Conv4, Conv6 | 3×3 / 1 / same | shape preserving, 9·c_in·c_out + c_out |
//! | Conv5 | 2×2 / 1 / same | 65,664 = 2·2·128·128 + 128, 15 → 15 |
//! | Conv7 | 3×3 / 2 / same | 36,928 = 3·3·64·64 + 64, 7 → 4 |
//! | MaxPool4 | 2 / 1 / same | the only shape-preserving choice, 15 → 15 |
//! | other pools | 2 / 2 / valid | 126 → 63 → 31, 31 → 15, 15 → 7 |
//!
//! Both residual adds use an identity skip from the block input. Every
//! convolution is followed by ReLU; the dense layer feeds softmax directly.
//! The block-9 convolution is named `Conv_2D_7`.

mod checkpoint;
mod graph;
mod summary;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, TensorEntry, FORMAT_VERSION, MAGIC};
pub use graph::{ForwardCache, Gradients};
pub use summary::{format_count, parse_architecture, render_architecture};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{output_extent, ConvParams, Padding};
use crate::rng::{derive_seed, Rng};
use crate::tensor::{Real, Tensor};

const INIT_STREAM: u64 = 0x1417;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Input { height: usize, width: usize, channels: usize },
    Conv { kernel: usize, stride: usize, padding: Padding, in_channels: usize, out_channels: usize },
    Relu,
    MaxPool { window: usize, stride: usize, padding: Padding },
    Add,
    GlobalAvgPool,
    GlobalMaxPool,
    Concat,
    Dropout { rate: f64 },
    Dense { in_features: usize, out_features: usize },
    Softmax,
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Input { .. } => "input",
            LayerKind::Conv { .. } => "conv",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::Add => "add",
            LayerKind::GlobalAvgPool => "gap",
            LayerKind::GlobalMaxPool => "gmp",
            LayerKind::Concat => "concat",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Softmax => "softmax",
        }
    }

    fn arity(&self) -> usize {
        match self {
            LayerKind::Input { .. } => 0,
            LayerKind::Add | LayerKind::Concat => 2,
            _ => 1,
        }
    }

    /// Learnable parameters this layer holds.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Conv { kernel, in_channels, out_channels, .. } => {
                kernel * kernel * in_channels * out_channels + out_channels
            }
            LayerKind::Dense { in_features, out_features } => in_features * out_features + out_features,
            _ => 0,
        }
    }
}

/// One node of the graph. `inputs` index earlier layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub id: String,
    pub name: String,
    pub block: String,
    #[serde(flatten)]
    pub kind: LayerKind,
    pub inputs: Vec<usize>,
}

/// Channel widths and input size for the dual-pooling topology.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub name: String,
    pub input_size: usize,
    /// Output channels of Conv1, Conv2 (= Conv3), Conv4 (= Conv5), Conv6, Conv7.
    pub widths: [usize; 5],
    pub dropout_rate: f64,
}

impl ArchConfig {
    pub fn earnet() -> Self {
        ArchConfig {
            name: "earnet".into(),
            input_size: 256,
            widths: [512, 256, 128, 64, 64],
            dropout_rate: 0.2,
        }
    }

    /// Same topology with every width divided by 8 and a small input.
    ///
    /// 36 is the smallest even input for which every valid-padded pool in
    /// the trunk still fits (32 collapses to 1×1 before the last 2×2 pool).
    pub fn shrunken() -> Self {
        Self::shrunken_with_input(36)
    }

    pub fn shrunken_with_input(input_size: usize) -> Self {
        ArchConfig {
            name: format!("shrunken{input_size}"),
            input_size,
            widths: [64, 32, 16, 8, 8],
            dropout_rate: 0.2,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    /// Looks up a named architecture: `earnet`, `shrunken` or `shrunken<N>`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "earnet" => Ok(Self::earnet()),
            "shrunken" => Ok(Self::shrunken()),
            other => other
                .strip_prefix("shrunken")
                .and_then(|n| n.parse().ok())
                .map(Self::shrunken_with_input)
                .ok_or_else(|| Error::Config(format!("unknown architecture `{other}`"))),
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let [w1, w2, w4, w6, w7] = self.widths;
        let mut b = Builder::default();
        let conv = |k, s, p, i, o| LayerKind::Conv { kernel: k, stride: s, padding: p, in_channels: i, out_channels: o };
        let pool = |w, s, p| LayerKind::MaxPool { window: w, stride: s, padding: p };
        use Padding::{Same, Valid};

        let x = b.add("input", "Input Layer", "", LayerKind::Input { height: self.input_size, width: self.input_size, channels: 3 }, &[]);
        let c1 = b.add("conv1", "Conv_2D_1", "B1", conv(5, 2, Valid, 3, w1), &[x]);
        let r1 = b.add("relu1", "ReLU_1", "B1", LayerKind::Relu, &[c1]);
        let c2 = b.add("conv2", "Conv_2D_2", "B2", conv(3, 1, Same, w1, w2), &[r1]);
        let r2 = b.add("relu2", "ReLU_2", "B2", LayerKind::Relu, &[c2]);
        let p1 = b.add("maxpool1", "Maxpooling_2D_1", "B3", pool(2, 2, Valid), &[r2]);
        let p2 = b.add("maxpool2", "Maxpooling_2D_2", "B4", pool(2, 2, Valid), &[p1]);
        let c3 = b.add("conv3", "Conv_2D_3", "B5", conv(3, 1, Same, w2, w2), &[p2]);
        let r3 = b.add("relu3", "ReLU_3", "B5", LayerKind::Relu, &[c3]);
        let a1 = b.add("add1", "Add_1", "B5", LayerKind::Add, &[p2, r3]);
        let c4 = b.add("conv4", "Conv_2D_4", "B5", conv(3, 1, Same, w2, w4), &[a1]);
        let r4 = b.add("relu4", "ReLU_4", "B5", LayerKind::Relu, &[c4]);
        let p3 = b.add("maxpool3", "Maxpooling_2D_3", "B6", pool(2, 2, Valid), &[r4]);
        let p4 = b.add("maxpool4", "Maxpooling_2D_4", "B7", pool(2, 1, Same), &[p3]);
        let c5 = b.add("conv5", "Conv_2D_5", "B7", conv(2, 1, Same, w4, w4), &[p4]);
        let r5 = b.add("relu5", "ReLU_5", "B7", LayerKind::Relu, &[c5]);
        let a2 = b.add("add2", "Add_2", "B7", LayerKind::Add, &[p4, r5]);
        let c6 = b.add("conv6", "Conv_2D_6", "B7", conv(3, 1, Same, w4, w6), &[a2]);
        let r6 = b.add("relu6", "ReLU_6", "B7", LayerKind::Relu, &[c6]);
        let p5 = b.add("maxpool5", "Maxpooling_2D_5", "B8", pool(2, 2, Valid), &[r6]);
        let c7 = b.add("conv7", "Conv_2D_7", "B9", conv(3, 2, Same, w6, w7), &[p5]);
        let r7 = b.add("relu7", "ReLU_7", "B9", LayerKind::Relu, &[c7]);
        let gap = b.add("gap", "GlobalAvgPooling_2D", "GAP", LayerKind::GlobalAvgPool, &[r7]);
        let gmp = b.add("gmp", "GlobalMaxPooling_2D", "GMP", LayerKind::GlobalMaxPool, &[r7]);
        let cat = b.add("concat", "Concatenate", "Concat", LayerKind::Concat, &[gap, gmp]);
        let drop = b.add("dropout", "Dropout", "Dense", LayerKind::Dropout { rate: self.dropout_rate }, &[cat]);
        let dense = b.add("dense", "Dense", "Dense", LayerKind::Dense { in_features: 2 * w7, out_features: 2 }, &[drop]);
        b.add("softmax", "Softmax", "Dense", LayerKind::Softmax, &[dense]);
        b.layers
    }
}

#[derive(Default)]
struct Builder {
    layers: Vec<LayerSpec>,
}

impl Builder {
    fn add(&mut self, id: &str, name: &str, block: &str, kind: LayerKind, inputs: &[usize]) -> usize {
        self.layers.push(LayerSpec {
            id: id.into(),
            name: name.into(),
            block: block.into(),
            kind,
            inputs: inputs.to_vec(),
        });
        self.layers.len() - 1
    }
}

/// Checks graph structure and returns every layer's output shape without
/// the batch axis.
pub fn infer_shapes(layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(layers.len());
    let mut used = vec![false; layers.len()];
    for (i, l) in layers.iter().enumerate() {
        let bad = |msg: String| Error::shape(format!("layer `{}`: {msg}", l.id));
        if l.inputs.len() != l.kind.arity() {
            return Err(bad(format!("expects {} inputs, has {}", l.kind.arity(), l.inputs.len())));
        }
        if (i == 0) != matches!(l.kind, LayerKind::Input { .. }) {
            return Err(bad("the graph must have exactly one input layer, first".into()));
        }
        for &j in &l.inputs {
            if j >= i {
                return Err(bad(format!("input {j} is not an earlier layer")));
            }
            used[j] = true;
        }
        let ins: Vec<&[usize]> = l.inputs.iter().map(|&j| shapes[j].as_slice()).collect();
        let spatial = |s: &[usize]| -> Result<[usize; 3]> {
            match *s {
                [h, w, c] => Ok([h, w, c]),
                _ => Err(bad(format!("needs a spatial input, got {s:?}"))),
            }
        };
        let shape = match &l.kind {
            LayerKind::Input { height, width, channels } => vec![*height, *width, *channels],
            LayerKind::Conv { kernel, stride, padding, in_channels, out_channels } => {
                let [h, w, c] = spatial(ins[0])?;
                if c != *in_channels {
                    return Err(bad(format!("input has {c} channels, expected {in_channels}")));
                }
                let (oh, _) = output_extent(h, *kernel, *stride, *padding).map_err(|e| bad(e.to_string()))?;
                let (ow, _) = output_extent(w, *kernel, *stride, *padding).map_err(|e| bad(e.to_string()))?;
                vec![oh, ow, *out_channels]
            }
            LayerKind::MaxPool { window, stride, padding } => {
                let [h, w, c] = spatial(ins[0])?;
                let (oh, _) = output_extent(h, *window, *stride, *padding).map_err(|e| bad(e.to_string()))?;
                let (ow, _) = output_extent(w, *window, *stride, *padding).map_err(|e| bad(e.to_string()))?;
                vec![oh, ow, c]
            }
            LayerKind::Relu | LayerKind::Softmax | LayerKind::Dropout { .. } => ins[0].to_vec(),
            LayerKind::Add => {
                if ins[0] != ins[1] {
                    return Err(bad(format!("cannot add {:?} and {:?}", ins[0], ins[1])));
                }
                ins[0].to_vec()
            }
            LayerKind::GlobalAvgPool | LayerKind::GlobalMaxPool => vec![spatial(ins[0])?[2]],
            LayerKind::Concat => match (ins[0], ins[1]) {
                (&[a], &[b]) => vec![a + b],
                (a, b) => return Err(bad(format!("cannot concatenate {a:?} and {b:?}"))),
            },
            LayerKind::Dense { in_features, out_features } => {
                if ins[0] != [*in_features] {
                    return Err(bad(format!("input {:?} does not have {in_features} features", ins[0])));
                }
                vec![*out_features]
            }
        };
        shapes.push(shape);
    }
    let last = layers.len().checked_sub(1).ok_or_else(|| Error::shape("empty graph"))?;
    if let Some(dangling) = (0..last).find(|&i| !used[i]) {
        return Err(Error::shape(format!("layer `{}` feeds nothing", layers[dangling].id)));
    }
    if !matches!(layers[last].kind, LayerKind::Softmax) || shapes[last] != [2] {
        return Err(Error::shape("the graph must end in a two-way softmax"));
    }
    Ok(shapes)
}

/// Learnable tensors of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights<T> {
    Conv(ConvParams<T>),
    Dense { weights: Tensor<T>, bias: Tensor<T> },
}

impl<T: Real> LayerWeights<T> {
    fn tensors(&self) -> [&Tensor<T>; 2] {
        match self {
            LayerWeights::Conv(p) => [&p.weights, &p.bias],
            LayerWeights::Dense { weights, bias } => [weights, bias],
        }
    }

    fn tensors_mut(&mut self) -> [&mut Tensor<T>; 2] {
        match self {
            LayerWeights::Conv(p) => [&mut p.weights, &mut p.bias],
            LayerWeights::Dense { weights, bias } => [weights, bias],
        }
    }
}

/// Provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub arch: String,
    pub seed: u64,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph<T = f32> {
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    weights: Vec<Option<LayerWeights<T>>>,
    pub meta: ModelMeta,
}

/// Shapes of the weight and bias tensors a layer kind needs.
fn param_shapes(kind: &LayerKind) -> Option<[Vec<usize>; 2]> {
    match *kind {
        LayerKind::Conv { kernel, in_channels, out_channels, .. } => {
            Some([vec![kernel, kernel, in_channels, out_channels], vec![out_channels]])
        }
        LayerKind::Dense { in_features, out_features } => {
            Some([vec![in_features, out_features], vec![out_features]])
        }
        _ => None,
    }
}

impl<T: Real> ModelGraph<T> {
    /// Validates `layers` and allocates zeroed parameters.
    pub fn from_layers(layers: Vec<LayerSpec>, meta: ModelMeta) -> Result<Self> {
        let shapes = infer_shapes(&layers)?;
        let weights = layers
            .iter()
            .map(|l| -> Result<Option<LayerWeights<T>>> {
                let Some([ws, bs]) = param_shapes(&l.kind) else { return Ok(None) };
                let (weights, bias) = (Tensor::zeros(&ws)?, Tensor::zeros(&bs)?);
                Ok(Some(match l.kind {
                    LayerKind::Conv { stride, padding, .. } => {
                        LayerWeights::Conv(ConvParams { weights, bias, stride, padding })
                    }
                    _ => LayerWeights::Dense { weights, bias },
                }))
            })
            .collect::<Result<_>>()?;
        Ok(ModelGraph { layers, shapes, weights, meta })
    }

    /// Uniform fan-in initialisation, `bound = sqrt(6 / fan_in)`, zero biases.
    /// Each weight tensor draws from its own stream of `seed`.
    pub fn init_params(&mut self, seed: u64) {
        self.meta.seed = seed;
        for (i, w) in self.weights.iter_mut().enumerate() {
            let Some(w) = w else { continue };
            let [weights, bias] = w.tensors_mut();
            let fan_in: usize = weights.shape()[..weights.rank() - 1].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let mut rng = Rng::new(derive_seed(seed, &[INIT_STREAM, i as u64]));
            *weights = rng.uniform(weights.shape(), -bound, bound).expect("valid bound");
            bias.data_mut().fill(T::zero());
        }
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Output shape of every layer, batch axis omitted.
    pub fn output_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn layer_weights(&self, layer: usize) -> Option<&LayerWeights<T>> {
        self.weights.get(layer).and_then(Option::as_ref)
    }

    pub fn layer_weights_mut(&mut self, layer: usize) -> Option<&mut LayerWeights<T>> {
        self.weights.get_mut(layer).and_then(Option::as_mut)
    }

    /// Index of a layer by id or display name (case-insensitive).
    pub fn find_layer(&self, key: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.id.eq_ignore_ascii_case(key) || l.name.eq_ignore_ascii_case(key))
            .ok_or_else(|| Error::UnknownLayer {
                name: key.to_string(),
                valid: self.layers.iter().map(|l| l.id.clone()).collect(),
            })
    }

    /// Parameter tensors in canonical order (layer order, weight then bias)
    /// with names like `conv1.weight`.
    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (l, w) in self.layers.iter().zip(&self.weights) {
            if let Some(w) = w {
                let [a, b] = w.tensors();
                out.push((format!("{}.weight", l.id), a));
                out.push((format!("{}.bias", l.id), b));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.weights
            .iter_mut()
            .flatten()
            .flat_map(|w| w.tensors_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.kind.param_count()).sum()
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Range(format!("dropout rate {rate} outside [0, 1)")));
        }
        for l in &mut self.layers {
            if let LayerKind::Dropout { rate: r } = &mut l.kind {
                *r = rate;
            }
        }
        Ok(())
    }

    /// Same graph and metadata with parameters converted to another scalar type.
    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        let mut out = ModelGraph::<U>::from_layers(self.layers.clone(), self.meta.clone())
            .expect("layers were validated");
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.1.cast();
        }
        out
    }
}

/// The full-size network, initialised from `seed`.
pub fn build_earnet(seed: u64) -> ModelGraph<f32> {
    build(&ArchConfig::earnet(), seed).expect("fixed architecture is valid")
}

/// Reduced-width clone of the network for tests and desk-scale training.
pub fn build_shrunken<T: Real>(seed: u64) -> ModelGraph<T> {
    build(&ArchConfig::shrunken(), seed).expect("fixed architecture is valid")
}

pub fn build<T: Real>(cfg: &ArchConfig, seed: u64) -> Result<ModelGraph<T>> {
    let meta = ModelMeta { arch: cfg.name.clone(), seed, epoch: 0 };
    let mut m = ModelGraph::from_layers(cfg.layers(), meta)?;
    m.init_params(seed);
    Ok(m)
}
