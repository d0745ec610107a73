use super::{LayerKind, LayerWeights, ModelGraph};
use crate::error::{Error, Result};
use crate::layers::{self, PoolParams};
use crate::rng::Rng;
use crate::tensor::{elementwise_add, Real, Tensor};
use crate::Mode;

#[derive(Debug, Clone)]
enum Aux<T> {
    None,
    Argmax(Vec<usize>),
    Mask(Option<Tensor<T>>),
}

/// Every intermediate tensor of one forward pass, plus what backward needs
/// (pooling argmax maps and dropout masks).
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    mode: Mode,
    outputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output of layer `layer` (batched).
    pub fn output(&self, layer: usize) -> &Tensor<T> {
        &self.outputs[layer]
    }
}

/// Parameter gradients in the canonical order of [`ModelGraph::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn is_all_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.data().iter().all(|v| v.is_zero()))
    }
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

impl<T: Real> ModelGraph<T> {
    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.rank() != 4 || x.shape()[1..] != *self.input_shape() {
            return Err(Error::shape(format!(
                "model expects (N, {}, {}, {}) input, got {:?}",
                self.input_shape()[0],
                self.input_shape()[1],
                self.input_shape()[2],
                x.shape()
            )));
        }
        Ok(())
    }

    fn eval_layer(
        &self,
        i: usize,
        inputs: &[&Tensor<T>],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Tensor<T>, Aux<T>)> {
        let spec = &self.layers[i];
        let plain = |t| Ok((t, Aux::None));
        match &spec.kind {
            LayerKind::Input { .. } => plain(inputs[0].clone()),
            LayerKind::Conv { .. } => match &self.weights[i] {
                Some(LayerWeights::Conv(p)) => plain(layers::conv2d_forward(inputs[0], p)?),
                _ => unreachable!("conv layer without conv weights"),
            },
            LayerKind::Relu => plain(layers::relu_forward(inputs[0])),
            LayerKind::MaxPool { window, stride, padding } => {
                let p = PoolParams { window: *window, stride: *stride, padding: *padding };
                let (y, arg) = layers::maxpool_forward(inputs[0], p)?;
                Ok((y, Aux::Argmax(arg)))
            }
            LayerKind::Add => plain(elementwise_add(inputs[0], inputs[1])?),
            LayerKind::GlobalAvgPool => plain(layers::global_avg_pool(inputs[0])?),
            LayerKind::GlobalMaxPool => {
                let (y, arg) = layers::global_max_pool(inputs[0])?;
                Ok((y, Aux::Argmax(arg)))
            }
            LayerKind::Concat => plain(layers::concat_channels(inputs[0], inputs[1])?),
            LayerKind::Dropout { rate } => {
                let (y, mask) = layers::dropout(inputs[0], *rate, mode, rng)?;
                Ok((y, Aux::Mask(mask)))
            }
            LayerKind::Dense { .. } => match &self.weights[i] {
                Some(LayerWeights::Dense { weights, bias }) => {
                    plain(layers::dense_forward(inputs[0], weights, bias)?)
                }
                _ => unreachable!("dense layer without dense weights"),
            },
            LayerKind::Softmax => plain(layers::softmax(inputs[0])?),
        }
    }

    /// Runs the graph on `x` of shape `(N, H, W, 3)` and returns class
    /// probabilities `(N, 2)` with the full activation cache. `rng` drives
    /// dropout in train mode only.
    pub fn forward(&self, x: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.layers.len());
        let mut aux = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let ins: Vec<&Tensor<T>> = if i == 0 {
                vec![x]
            } else {
                spec.inputs.iter().map(|&j| &outputs[j]).collect()
            };
            let (y, a) = self.eval_layer(i, &ins, mode, rng)?;
            outputs.push(y);
            aux.push(a);
        }
        let probs = outputs.last().unwrap().clone();
        Ok((probs, ForwardCache { mode, outputs, aux }))
    }

    /// Eval-mode forward that frees each intermediate after its last use.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let n = self.layers.len();
        let mut last_use = vec![0usize; n];
        for (i, l) in self.layers.iter().enumerate() {
            for &j in &l.inputs {
                last_use[j] = i;
            }
        }
        let mut outputs: Vec<Option<Tensor<T>>> = vec![None; n];
        let mut rng = Rng::new(0);
        for (i, spec) in self.layers.iter().enumerate() {
            let y = {
                let ins: Vec<&Tensor<T>> = if i == 0 {
                    vec![x]
                } else {
                    spec.inputs.iter().map(|&j| outputs[j].as_ref().expect("live input")).collect()
                };
                self.eval_layer(i, &ins, Mode::Eval, &mut rng)?.0
            };
            outputs[i] = Some(y);
            for &j in &spec.inputs {
                if last_use[j] == i {
                    outputs[j] = None;
                }
            }
        }
        Ok(outputs.pop().flatten().expect("graph output"))
    }

    /// Reverse-mode pass from the gradient of a scalar loss w.r.t. the
    /// output probabilities. Needs a train-mode cache.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_probs: &Tensor<T>) -> Result<Gradients<T>> {
        if cache.mode != Mode::Train {
            return Err(Error::Usage("backward needs a cache from a train-mode forward".into()));
        }
        let n = self.layers.len();
        if cache.outputs.len() != n || grad_probs.shape() != cache.outputs[n - 1].shape() {
            return Err(Error::shape("cache or gradient does not match this model"));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        grads[n - 1] = Some(grad_probs.clone());
        let mut layer_grads: Vec<Option<[Tensor<T>; 2]>> = vec![None; n];

        for i in (1..n).rev() {
            let Some(g) = grads[i].take() else { continue };
            let spec = &self.layers[i];
            let input = |k: usize| &cache.outputs[spec.inputs[k]];
            let mut push = |k: usize, t: Tensor<T>| accumulate(&mut grads[spec.inputs[k]], t);
            match (&spec.kind, &cache.aux[i]) {
                (LayerKind::Conv { .. }, _) => {
                    let Some(LayerWeights::Conv(p)) = &self.weights[i] else { unreachable!() };
                    let cg = layers::conv2d_backward(input(0), p, &g)?;
                    layer_grads[i] = Some([cg.weights, cg.bias]);
                    if spec.inputs[0] != 0 {
                        push(0, cg.input)?;
                    }
                }
                (LayerKind::Relu, _) => push(0, layers::relu_backward(input(0), &g)?)?,
                (LayerKind::MaxPool { .. } | LayerKind::GlobalMaxPool, Aux::Argmax(arg)) => {
                    push(0, layers::maxpool_backward(input(0).shape(), arg, &g)?)?
                }
                (LayerKind::Add, _) => {
                    push(0, g.clone())?;
                    push(1, g)?;
                }
                (LayerKind::GlobalAvgPool, _) => {
                    push(0, layers::global_avg_pool_backward(input(0).shape(), &g)?)?
                }
                (LayerKind::Concat, _) => {
                    let c1 = *input(0).shape().last().unwrap();
                    let (a, b) = layers::concat_channels_backward(&g, c1)?;
                    push(0, a)?;
                    push(1, b)?;
                }
                (LayerKind::Dropout { .. }, Aux::Mask(mask)) => {
                    push(0, layers::dropout_backward(mask.as_ref(), &g)?)?
                }
                (LayerKind::Dense { .. }, _) => {
                    let Some(LayerWeights::Dense { weights, bias }) = &self.weights[i] else { unreachable!() };
                    let dg = layers::dense_backward(input(0), weights, bias, &g)?;
                    layer_grads[i] = Some([dg.weights, dg.bias]);
                    push(0, dg.input)?;
                }
                (LayerKind::Softmax, _) => {
                    push(0, layers::softmax_backward(&cache.outputs[i], &g)?)?
                }
                (kind, _) => unreachable!("no backward rule for {kind:?} with this cache"),
            }
        }

        let mut tensors = Vec::new();
        for (i, w) in self.weights.iter().enumerate() {
            if let Some(w) = w {
                match layer_grads[i].take() {
                    Some([gw, gb]) => tensors.extend([gw, gb]),
                    None => tensors.extend(w.tensors().map(|t| t.zeros_like())),
                }
            }
        }
        Ok(Gradients { tensors })
    }

    /// Post-activation outputs of the requested layers for `x` (eval mode).
    /// A convolution id resolves to the ReLU that follows it.
    pub fn extract_feature_maps(&self, x: &Tensor<T>, ids: &[&str]) -> Result<Vec<Tensor<T>>> {
        let targets = ids
            .iter()
            .map(|id| self.find_layer(id).map(|i| self.activation_of(i)))
            .collect::<Result<Vec<_>>>()?;
        let (_, cache) = self.forward(x, Mode::Eval, &mut Rng::new(0))?;
        Ok(targets.into_iter().map(|i| cache.outputs[i].clone()).collect())
    }

    fn activation_of(&self, layer: usize) -> usize {
        if !matches!(self.layers[layer].kind, LayerKind::Conv { .. }) {
            return layer;
        }
        self.layers
            .iter()
            .position(|l| matches!(l.kind, LayerKind::Relu) && l.inputs == [layer])
            .unwrap_or(layer)
    }
}

#[cfg(test)]
mod tests {
    use crate::model::build_shrunken;
    use crate::{Mode, Rng, Tensor};

    #[test]
    fn eval_cache_cannot_backprop() {
        let m = build_shrunken::<f32>(1);
        let x = Tensor::zeros(&[1, 36, 36, 3]).unwrap();
        let (p, cache) = m.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
        assert!(matches!(m.backward(&cache, &p), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn predict_matches_forward() {
        let m = build_shrunken::<f32>(2);
        let x = Rng::new(3).uniform(&[2, 36, 36, 3], 0.0, 1.0).unwrap();
        let (p, _) = m.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap();
        assert_eq!(p, m.predict(&x).unwrap());
    }

    #[test]
    fn wrong_input_shape() {
        let m = build_shrunken::<f32>(2);
        let x = Tensor::zeros(&[1, 32, 32, 3]).unwrap();
        assert!(m.predict(&x).is_err());
    }
}
