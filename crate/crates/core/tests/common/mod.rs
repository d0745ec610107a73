//! Reference implementations shared by the integration tests. Nothing here
//! calls into the fast paths it is used to check.
#![allow(dead_code)]

use earconv::data::{synthetic_image, InMemoryDataset};
use earconv::layers::Padding;
use earconv::train::bce_loss;
use earconv::{Mode, ModelGraph, Real, Rng, Tensor};

/// Output extent and leading pad computed straight from the definitions.
pub fn extent(n: usize, k: usize, s: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => ((n - k) / s + 1, 0),
        Padding::Same => {
            let out = n.div_ceil(s);
            let need = ((out - 1) * s + k).saturating_sub(n);
            (out, need / 2)
        }
    }
}

/// Seven nested loops over `(n, oh, ow, co, kh, kw, ci)`.
pub fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: usize, padding: Padding) -> Tensor<f64> {
    let [n, h, wd, ci] = x.shape().try_into().unwrap();
    let [kh, kw, _, co] = w.shape().try_into().unwrap();
    let (oh, pt) = extent(h, kh, s, padding);
    let (ow, pl) = extent(wd, kw, s, padding);
    let mut out = vec![0.0; n * oh * ow * co];
    for b_ in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for o in 0..co {
                    let mut acc = b.data()[o];
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let iy = (oy * s + dy) as isize - pt as isize;
                            let ix = (ox * s + dx) as isize - pl as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            for c in 0..ci {
                                acc += x.at4(b_, iy as usize, ix as usize, c)
                                    * w.data()[((dy * kw + dx) * ci + c) * co + o];
                            }
                        }
                    }
                    out[((b_ * oh + oy) * ow + ox) * co + o] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[n, oh, ow, co], out).unwrap()
}

pub fn naive_maxpool(x: &Tensor<f64>, k: usize, s: usize, padding: Padding) -> Tensor<f64> {
    let [n, h, w, c] = x.shape().try_into().unwrap();
    let (oh, pt) = extent(h, k, s, padding);
    let (ow, pl) = extent(w, k, s, padding);
    let mut out = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    for dy in 0..k {
                        for dx in 0..k {
                            let iy = (oy * s + dy) as isize - pt as isize;
                            let ix = (ox * s + dx) as isize - pl as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                best = best.max(x.at4(b, iy as usize, ix as usize, ch));
                            }
                        }
                    }
                    out.push(best);
                }
            }
        }
    }
    Tensor::from_vec(&[n, oh, ow, c], out).unwrap()
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting ½.
pub fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

/// `|a - n| / max(1, |a|, |n|)`: relative for large values, absolute near zero.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

fn model_loss<T: Real>(model: &ModelGraph<T>, x: &Tensor<T>, labels: &[u8], dropout_seed: u64) -> f64 {
    let (p, _) = model.forward(x, Mode::Train, &mut Rng::new(dropout_seed)).unwrap();
    bce_loss(&p, labels).unwrap().0.as_f64()
}

/// Worst relative error between backprop in precision `T` and central
/// differences of the batch loss, over `per_tensor` sampled entries of every
/// parameter tensor. Differences are always taken in 64-bit arithmetic on
/// the same weights, with the dropout mask held fixed by reusing its seed.
pub fn end_to_end_check<T: Real>(seed: u64, per_tensor: usize) -> f64 {
    const H: f64 = 1e-6;
    let model: ModelGraph<T> = earconv::build_shrunken(seed);
    let shape: Vec<usize> = std::iter::once(2).chain(model.input_shape().iter().copied()).collect();
    let mut rng = Rng::new(seed ^ 0xfeed);
    let x: Tensor<T> = rng.uniform(&shape, 0.0, 1.0).unwrap();
    let labels = [0u8, 1];
    let dropout_seed = seed + 17;

    let (p, cache) = model.forward(&x, Mode::Train, &mut Rng::new(dropout_seed)).unwrap();
    let (_, gp) = bce_loss(&p, &labels).unwrap();
    let grads = model.backward(&cache, &gp).unwrap();

    let mut reference: ModelGraph<f64> = model.cast();
    let x64: Tensor<f64> = x.cast();
    let mut worst = 0.0f64;
    for (t, analytic) in grads.tensors.iter().enumerate() {
        for _ in 0..per_tensor {
            let j = rng.below(analytic.len());
            let orig = reference.params_mut()[t].data()[j];
            reference.params_mut()[t].data_mut()[j] = orig + H;
            let up = model_loss(&reference, &x64, &labels, dropout_seed);
            reference.params_mut()[t].data_mut()[j] = orig - H;
            let down = model_loss(&reference, &x64, &labels, dropout_seed);
            reference.params_mut()[t].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max(rel_err(analytic.data()[j].as_f64(), numeric));
        }
    }
    worst
}

/// Synthetic two-class images at `size`, labels alternating 0, 1, 0, ...
pub fn synthetic_set(n: usize, size: usize, seed: u64) -> InMemoryDataset {
    let root = Rng::new(seed);
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let images = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| synthetic_image(l, size, &mut root.fork(&[i as u64])))
        .collect();
    InMemoryDataset { images, labels }
}
