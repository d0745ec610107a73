use super::expect_rank4;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Accepts `(h, w, c)` as a batch of one.
fn batched(shape: &[usize]) -> Result<[usize; 4]> {
    match shape {
        &[h, w, c] => Ok([1, h, w, c]),
        s => expect_rank4(s, "global pooling"),
    }
}

fn out_shape(input: &[usize], n: usize, c: usize) -> Vec<usize> {
    if input.len() == 3 { vec![c] } else { vec![n, c] }
}

/// Per-channel mean over all spatial positions: `(n, h, w, c) -> (n, c)`.
pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w, c] = batched(x.shape())?;
    let mut out = vec![T::zero(); n * c];
    let area = h * w;
    for b in 0..n {
        let acc = &mut out[b * c..(b + 1) * c];
        for px in x.data()[b * area * c..(b + 1) * area * c].chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a = *a + v;
            }
        }
        let scale = T::lit(area as f64);
        acc.iter_mut().for_each(|a| *a = *a / scale);
    }
    Tensor::from_vec(&out_shape(x.shape(), n, c), out)
}

pub fn global_avg_pool_backward<T: Real>(input_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, h, w, c] = batched(input_shape)?;
    if grad_out.len() != n * c {
        return Err(Error::shape("global avg pool grad shape mismatch"));
    }
    let scale = T::lit((h * w) as f64);
    let mut grad = Tensor::zeros(input_shape)?;
    for (b, px_block) in grad.data_mut().chunks_exact_mut(h * w * c).enumerate() {
        let g = &grad_out.data()[b * c..(b + 1) * c];
        for px in px_block.chunks_exact_mut(c) {
            for (d, &v) in px.iter_mut().zip(g) {
                *d = v / scale;
            }
        }
    }
    Ok(grad)
}

/// Per-channel maximum over all spatial positions, with the flat input
/// offset of each winner (first occurrence on ties).
pub fn global_max_pool<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, h, w, c] = batched(x.shape())?;
    let area = h * w;
    let mut out = vec![T::neg_infinity(); n * c];
    let mut arg = vec![0usize; n * c];
    for b in 0..n {
        for p in 0..area {
            let base = (b * area + p) * c;
            for ch in 0..c {
                let v = x.data()[base + ch];
                if p == 0 || v > out[b * c + ch] {
                    out[b * c + ch] = v;
                    arg[b * c + ch] = base + ch;
                }
            }
        }
    }
    Ok((Tensor::from_vec(&out_shape(x.shape(), n, c), out)?, arg))
}

pub fn global_max_pool_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    super::maxpool_backward(input_shape, argmax, grad_out)
}

/// Joins `(n, c1)` and `(n, c2)` into `(n, c1 + c2)`, `a` first.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c1, c2) = match (a.shape(), b.shape()) {
        (&[c1], &[c2]) => (1, c1, c2),
        (&[n1, c1], &[n2, c2]) if n1 == n2 => (n1, c1, c2),
        (sa, sb) => return Err(Error::shape(format!("cannot concatenate {sa:?} and {sb:?}"))),
    };
    let mut data = Vec::with_capacity(n * (c1 + c2));
    for i in 0..n {
        data.extend_from_slice(&a.data()[i * c1..(i + 1) * c1]);
        data.extend_from_slice(&b.data()[i * c2..(i + 1) * c2]);
    }
    let shape = if a.rank() == 1 { vec![c1 + c2] } else { vec![n, c1 + c2] };
    Tensor::from_vec(&shape, data)
}

/// Splits a concatenated gradient back into its two operands' gradients.
pub fn concat_channels_backward<T: Real>(
    grad_out: &Tensor<T>,
    c1: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let width = *grad_out.shape().last().unwrap();
    if c1 == 0 || c1 >= width {
        return Err(Error::shape(format!("split point {c1} invalid for width {width}")));
    }
    let c2 = width - c1;
    let n = grad_out.len() / width;
    let (mut a, mut b) = (Vec::with_capacity(n * c1), Vec::with_capacity(n * c2));
    for row in grad_out.data().chunks_exact(width) {
        a.extend_from_slice(&row[..c1]);
        b.extend_from_slice(&row[c1..]);
    }
    let lead = &grad_out.shape()[..grad_out.rank() - 1];
    let shape = |c: usize| lead.iter().copied().chain([c]).collect::<Vec<_>>();
    Ok((Tensor::from_vec(&shape(c1), a)?, Tensor::from_vec(&shape(c2), b)?))
}
