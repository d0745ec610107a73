use crate::error::{Error, Result};
use crate::linalg::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn dims<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (n, f) = match x.shape() {
        &[f] => (1, f),
        &[n, f] => (n, f),
        s => return Err(Error::shape(format!("dense input must be (f) or (n, f), got {s:?}"))),
    };
    match (w.shape(), b.shape()) {
        (&[wf, k], &[bk]) if wf == f && bk == k => Ok((n, f, k)),
        (ws, bs) => Err(Error::shape(format!(
            "dense weights {ws:?} / bias {bs:?} do not fit {f} input features"
        ))),
    }
}

/// `x·w + b` for `x` of shape `(n, f)` or `(f)`, `w` of shape `(f, k)`.
pub fn dense_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f, k) = dims(x, w, b)?;
    let mut out_shape = x.shape().to_vec();
    *out_shape.last_mut().unwrap() = k;
    let mut out = Tensor::zeros(&out_shape)?;
    for row in out.data_mut().chunks_exact_mut(k) {
        row.copy_from_slice(b.data());
    }
    gemm_nn(n, f, k, x.data(), w.data(), out.data_mut(), true);
    Ok(out)
}

pub fn dense_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, f, k) = dims(x, w, b)?;
    if grad_out.len() != n * k {
        return Err(Error::shape("dense grad_out shape mismatch"));
    }
    let mut gx = x.zeros_like();
    gemm_nt(n, k, f, grad_out.data(), w.data(), gx.data_mut(), false);
    let mut gw = w.zeros_like();
    gemm_tn(f, n, k, x.data(), grad_out.data(), gw.data_mut(), false);
    let mut gb = b.zeros_like();
    for row in grad_out.data().chunks_exact(k) {
        for (acc, &g) in gb.data_mut().iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    Ok(DenseGrads { input: gx, weights: gw, bias: gb })
}
