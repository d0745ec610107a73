use super::{expect_rank4, output_extent, Padding};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolParams {
    pub window: usize,
    pub stride: usize,
    pub padding: Padding,
}

/// Max pooling. Padded cells never win; ties go to the first cell in
/// row-major window order. Returns the output and, per output element, the
/// flat input offset that produced it.
pub fn maxpool_forward<T: Real>(x: &Tensor<T>, p: PoolParams) -> Result<(Tensor<T>, Vec<usize>)> {
    if p.window == 0 || p.stride == 0 {
        return Err(Error::shape("pool window and stride must be ≥ 1"));
    }
    let [n, h, w, c] = expect_rank4(x.shape(), "maxpool")?;
    let (oh, pad_t) = output_extent(h, p.window, p.stride, p.padding)?;
    let (ow, pad_l) = output_extent(w, p.window, p.stride, p.padding)?;
    let mut out = Tensor::zeros(&[n, oh, ow, c])?;
    let mut argmax = vec![0usize; out.len()];
    let xd = x.data();
    let mut o = 0;
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let y0 = (oy * p.stride) as isize - pad_t as isize;
                let x0 = (ox * p.stride) as isize - pad_l as isize;
                for ch in 0..c {
                    let mut best: Option<(T, usize)> = None;
                    for dy in 0..p.window as isize {
                        let iy = y0 + dy;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for dx in 0..p.window as isize {
                            let ix = x0 + dx;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = ((b * h + iy as usize) * w + ix as usize) * c + ch;
                            if best.is_none_or(|(v, _)| xd[idx] > v) {
                                best = Some((xd[idx], idx));
                            }
                        }
                    }
                    let (v, idx) = best.expect("window overlaps the input");
                    out.data_mut()[o] = v;
                    argmax[o] = idx;
                    o += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the input cell recorded in `argmax`.
pub fn maxpool_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::shape(format!(
            "argmax map has {} entries, grad_out {}",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut grad = Tensor::zeros(input_shape)?;
    let gd = grad.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        let slot = gd
            .get_mut(idx)
            .ok_or_else(|| Error::shape(format!("argmax offset {idx} outside input")))?;
        *slot = *slot + g;
    }
    Ok(grad)
}
