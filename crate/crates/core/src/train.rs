//! Minibatch training with Adam on the binary cross-entropy of the class-1
//! probability, plus batched evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, AugmentParams, SampleSource};
use crate::error::{Error, Result};
use crate::metrics::{predict_class, EvalReport};
use crate::model::ModelGraph;
use crate::rng::{derive_seed, Rng};
use crate::tensor::{Real, Tensor};
use crate::Mode;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

const STREAM_SHUFFLE: u64 = 0x5348;
const STREAM_AUGMENT: u64 = 0x4155;
const STREAM_DROPOUT: u64 = 0x4452;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 32,
            dropout_rate: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} = {b} outside [0, 1)"));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        let a = &self.augment;
        if !(0.0..=1.0).contains(&a.flip_prob) || a.max_rotation.is_nan() || a.max_rotation < 0.0 {
            return bad("augmentation probabilities or angles out of range".into());
        }
        Ok(())
    }
}

/// Mean binary cross-entropy of `probs[:, 1]` against `labels`, and its
/// gradient with respect to `probs`. Column 0 receives no gradient; entries
/// where the clamp was active get zero gradient.
pub fn bce_loss<T: Real>(probs: &Tensor<T>, labels: &[u8]) -> Result<(T, Tensor<T>)> {
    let &[n, 2] = probs.shape() else {
        return Err(Error::shape(format!("loss expects (N, 2) probabilities, got {:?}", probs.shape())));
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{n} probability rows but {} labels", labels.len())));
    }
    let mut grad = probs.zeros_like();
    let mut total = 0.0f64;
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(Error::Label(format!("label {y} at row {i}")));
        }
        let raw = probs.data()[2 * i + 1].as_f64();
        let p = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = y as f64;
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        if p == raw {
            grad.data_mut()[2 * i + 1] = T::lit((-y / p + (1.0 - y) / (1.0 - p)) / n as f64);
        }
    }
    Ok((T::lit(total / n as f64), grad))
}

/// First and second moment estimates for every parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &ModelGraph<T>, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Tensor<T>> = model.params().iter().map(|(_, p)| p.zeros_like()).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::shape(format!(
                "{} parameters, {} gradients, optimiser tracks {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() {
                return Err(Error::shape(format!("gradient {:?} for parameter {:?}", g.shape(), p.shape())));
            }
            let it = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut());
            for (((p, &g), m), v) in it {
                let g = g.as_f64();
                let mn = b1 * m.as_f64() + (1.0 - b1) * g;
                let vn = b2 * v.as_f64() + (1.0 - b2) * g * g;
                *m = T::lit(mn);
                *v = T::lit(vn);
                let update = self.learning_rate * (mn / c1) / ((vn / c2).sqrt() + self.epsilon);
                *p = T::lit(p.as_f64() - update);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the train-mode forward passes seen during the epoch.
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
        for r in &self.epochs {
            let test = r.test_acc.map(|a| format!("{a:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{:.6},{:.6},{}\n", r.epoch, r.train_loss, r.train_acc, test));
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Stacks samples `indices` into a batch, optionally augmenting each
/// image with its own stream derived from `(seed, index, epoch)`.
fn load_batch<T: Real>(
    data: &dyn SampleSource,
    indices: &[usize],
    augment: Option<(&AugmentConfig, u64, usize)>,
) -> Result<(Tensor<T>, Vec<u8>)> {
    let images: Vec<Tensor<f32>> = indices
        .par_iter()
        .map(|&i| {
            let img = data.image(i)?;
            Ok(match augment {
                Some((cfg, seed, epoch)) if cfg.enabled => {
                    let mut rng = Rng::new(derive_seed(seed, &[STREAM_AUGMENT, i as u64, epoch as u64]));
                    AugmentParams::sample(cfg, &mut rng).apply(&img)
                }
                _ => img,
            })
        })
        .collect::<Result<_>>()?;
    let labels = indices.iter().map(|&i| data.label(i)).collect();
    Ok((Tensor::stack(&images)?.cast(), labels))
}

/// Trains `model` in place. `on_epoch` sees each record after it is
/// appended to the log; returning an error aborts training.
pub fn train_loop<T: Real>(
    model: &mut ModelGraph<T>,
    train: &dyn SampleSource,
    test: Option<&dyn SampleSource>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelGraph<T>) -> Result<()>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    model.set_dropout_rate(cfg.dropout_rate)?;
    let mut adam = AdamState::new(model, cfg);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        Rng::new(derive_seed(cfg.seed, &[STREAM_SHUFFLE, epoch as u64])).shuffle(&mut order);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, labels) = load_batch::<T>(train, chunk, Some((&cfg.augment, cfg.seed, epoch)))?;
            let mut rng = Rng::new(derive_seed(cfg.seed, &[STREAM_DROPOUT, epoch as u64, b as u64]));
            let (probs, cache) = model.forward(&x, Mode::Train, &mut rng)?;
            let (loss, grad) = bce_loss(&probs, &labels)?;
            loss_sum += loss.as_f64() * chunk.len() as f64;
            for (row, &y) in probs.data().chunks(2).zip(&labels) {
                correct += usize::from(predict_class(row[0].as_f64(), row[1].as_f64()) == y);
            }
            let grads = model.backward(&cache, &grad)?;
            adam.step(model.params_mut(), &grads.tensors)?;
        }
        model.meta.epoch = epoch as u64 + 1;
        let test_acc = match test {
            Some(t) if !t.is_empty() => Some(evaluate(model, t, cfg.batch_size)?.accuracy),
            _ => None,
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            test_acc,
        };
        log.epochs.push(record);
        on_epoch(&record, model)?;
    }
    Ok(log)
}

/// Eval-mode probabilities `[p_female, p_male]` for every sample, in order.
pub fn evaluate_probs<T: Real>(
    model: &ModelGraph<T>,
    data: &dyn SampleSource,
    batch_size: usize,
) -> Result<Vec<[f64; 2]>> {
    let batch_size = batch_size.max(1);
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in indices.chunks(batch_size) {
        let (x, _) = load_batch::<T>(data, chunk, None)?;
        let probs = model.predict(&x)?;
        out.extend(probs.data().chunks(2).map(|r| [r[0].as_f64(), r[1].as_f64()]));
    }
    Ok(out)
}

pub fn evaluate<T: Real>(model: &ModelGraph<T>, data: &dyn SampleSource, batch_size: usize) -> Result<EvalReport> {
    let probs = evaluate_probs(model, data, batch_size)?;
    let labels: Vec<u8> = (0..data.len()).map(|i| data.label(i)).collect();
    EvalReport::from_probs(&probs, &labels)
}
