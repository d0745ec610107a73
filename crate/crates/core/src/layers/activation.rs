use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};
use crate::Mode;

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::shape(format!(
            "relu grad {:?} vs input {:?}",
            grad_out.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Softmax over the last axis, max-subtracted.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let k = *logits.shape().last().unwrap();
    if k < 2 {
        return Err(Error::shape("softmax needs at least two classes"));
    }
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(out)
}

/// Gradient w.r.t. logits given the softmax output and the gradient w.r.t. it.
pub fn softmax_backward<T: Real>(probs: &Tensor<T>, grad_probs: &Tensor<T>) -> Result<Tensor<T>> {
    if probs.shape() != grad_probs.shape() {
        return Err(Error::shape("softmax grad shape mismatch"));
    }
    let k = *probs.shape().last().unwrap();
    let mut out = probs.zeros_like();
    for ((o, p), g) in out
        .data_mut()
        .chunks_exact_mut(k)
        .zip(probs.data().chunks_exact(k))
        .zip(grad_probs.data().chunks_exact(k))
    {
        let dot: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for i in 0..k {
            o[i] = p[i] * (g[i] - dot);
        }
    }
    Ok(out)
}

/// Inverted dropout. In train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; the returned mask holds
/// those per-element factors. Eval mode (or rate 0) is the identity and
/// returns no mask.
pub fn dropout<T: Real>(
    x: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor<T>, Option<Tensor<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Range(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let mut mask = x.zeros_like();
    for m in mask.data_mut() {
        *m = if rng.bernoulli(rate) { T::zero() } else { keep };
    }
    let data = x.data().iter().zip(mask.data()).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::from_vec(x.shape(), data)?, Some(mask)))
}

pub fn dropout_backward<T: Real>(mask: Option<&Tensor<T>>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    match mask {
        None => Ok(grad_out.clone()),
        Some(m) if m.shape() == grad_out.shape() => {
            let data = grad_out.data().iter().zip(m.data()).map(|(&g, &k)| g * k).collect();
            Tensor::from_vec(grad_out.shape(), data)
        }
        Some(_) => Err(Error::shape("dropout mask shape mismatch")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let x = Tensor::from_vec(&[2], vec![-1.0f32, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 2.0]);
        let pos = Tensor::from_vec(&[3], vec![0.1f32, 2.0, 9.0]).unwrap();
        assert_eq!(relu_forward(&pos), pos);

        let x = Tensor::from_vec(&[3], vec![-0.5f32, 0.5, 0.0]).unwrap();
        let g = Tensor::from_vec(&[3], vec![3.0f32, 3.0, 3.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 3.0, 0.0]);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&Tensor::from_vec(&[2], vec![0.0f64, 0.0]).unwrap()).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
        let p = softmax(&Tensor::from_vec(&[2], vec![0.0f64, 3f64.ln()]).unwrap()).unwrap();
        assert!((p.data()[0] - 0.25).abs() < 1e-12 && (p.data()[1] - 0.75).abs() < 1e-12);

        let logits = Tensor::from_vec(&[2, 3], vec![1.0f32, -2.0, 0.5, 3.0, 3.0, -1.0]).unwrap();
        let a = softmax(&logits).unwrap();
        let b = softmax(&logits.map(|v| v + 17.0)).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-6);
        for row in a.data().chunks(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let p = softmax(&Tensor::from_vec(&[2], vec![1e30f32, -1e30]).unwrap()).unwrap();
        assert_eq!(p.data(), &[1.0, 0.0]);
        assert!(softmax(&Tensor::from_vec(&[1], vec![1.0f32]).unwrap()).is_err());
    }

    #[test]
    fn dropout_modes() {
        let mut rng = Rng::new(9);
        let x: Tensor<f32> = rng.uniform(&[100], -1.0, 1.0).unwrap();
        let (y, m) = dropout(&x, 0.2, Mode::Eval, &mut rng).unwrap();
        assert!(m.is_none());
        assert_eq!(y.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let (y, m) = dropout(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert!(m.is_none());
        assert_eq!(y, x);
        assert!(matches!(dropout(&x, 1.0, Mode::Train, &mut rng), Err(Error::Range(_))));
    }

    #[test]
    fn dropout_rate_concentrates() {
        let mut rng = Rng::new(10);
        let x = Tensor::<f32>::new(&[1_000_000], 1.0).unwrap();
        let (y, _) = dropout(&x, 0.2, Mode::Train, &mut rng).unwrap();
        let zeroed = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / 1e6;
        assert!((zeroed - 0.2).abs() < 0.002, "zeroed {zeroed}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 1.25));
    }
}
