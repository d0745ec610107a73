use rayon::prelude::*;

use super::{expect_rank4, output_extent, Padding};
use crate::error::{Error, Result};
use crate::linalg::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::{Real, Tensor};

/// Upper bound on elements in one im2col panel.
const PANEL_ELEMS: usize = 1 << 20;

/// Convolution weights `(kh, kw, c_in, c_out)`, bias `(c_out)` and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: Padding,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn dims(&self) -> Result<[usize; 4]> {
        let [kh, kw, ci, co] = expect_rank4(self.weights.shape(), "conv weights")?;
        if self.bias.shape() != [co] {
            return Err(Error::shape(format!(
                "bias {:?} does not match {co} output channels",
                self.bias.shape()
            )));
        }
        Ok([kh, kw, ci, co])
    }
}

struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    ci: usize,
    kh: usize,
    kw: usize,
    co: usize,
    oh: usize,
    ow: usize,
    pad_t: usize,
    pad_l: usize,
    stride: usize,
}

impl Geometry {
    fn new<T: Real>(x_shape: &[usize], p: &ConvParams<T>) -> Result<Self> {
        let [n, h, w, c] = expect_rank4(x_shape, "conv2d")?;
        let [kh, kw, ci, co] = p.dims()?;
        if c != ci {
            return Err(Error::shape(format!(
                "conv2d input has {c} channels, weights expect {ci}"
            )));
        }
        let (oh, pad_t) = output_extent(h, kh, p.stride, p.padding)?;
        let (ow, pad_l) = output_extent(w, kw, p.stride, p.padding)?;
        Ok(Geometry { n, h, w, ci, kh, kw, co, oh, ow, pad_t, pad_l, stride: p.stride })
    }

    fn patch(&self) -> usize {
        self.kh * self.kw * self.ci
    }

    fn rows(&self) -> usize {
        self.n * self.oh * self.ow
    }

    fn rows_per_panel(&self) -> usize {
        (PANEL_ELEMS / self.patch()).max(1)
    }

    /// Input offset of patch cell `(ky, kx)` for output row `r`, if it lies
    /// inside the unpadded input.
    fn source(&self, r: usize, ky: usize, kx: usize) -> Option<usize> {
        let ox = r % self.ow;
        let oy = (r / self.ow) % self.oh;
        let b = r / (self.ow * self.oh);
        let iy = (oy * self.stride + ky) as isize - self.pad_t as isize;
        let ix = (ox * self.stride + kx) as isize - self.pad_l as isize;
        if iy < 0 || ix < 0 || iy >= self.h as isize || ix >= self.w as isize {
            return None;
        }
        Some(((b * self.h + iy as usize) * self.w + ix as usize) * self.ci)
    }

    fn im2col<T: Real>(&self, x: &[T], first_row: usize, rows: usize, col: &mut [T]) {
        let patch = self.patch();
        for (i, dst) in col[..rows * patch].chunks_exact_mut(patch).enumerate() {
            let r = first_row + i;
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let cell = (ky * self.kw + kx) * self.ci;
                    let dst = &mut dst[cell..cell + self.ci];
                    match self.source(r, ky, kx) {
                        Some(src) => dst.copy_from_slice(&x[src..src + self.ci]),
                        None => dst.fill(T::zero()),
                    }
                }
            }
        }
    }

    fn col2im_add<T: Real>(&self, dcol: &[T], first_row: usize, rows: usize, dx: &mut [T]) {
        let patch = self.patch();
        for (i, src) in dcol[..rows * patch].chunks_exact(patch).enumerate() {
            let r = first_row + i;
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    if let Some(dst) = self.source(r, ky, kx) {
                        let cell = (ky * self.kw + kx) * self.ci;
                        for (d, &s) in dx[dst..dst + self.ci].iter_mut().zip(&src[cell..cell + self.ci]) {
                            *d = *d + s;
                        }
                    }
                }
            }
        }
    }
}

/// 2-D convolution via im2col panels and a matrix product; panels of
/// output rows are computed in parallel.
pub fn conv2d_forward<T: Real>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), p)?;
    let mut out = Tensor::zeros(&[g.n, g.oh, g.ow, g.co])?;
    let patch = g.patch();
    let panel_rows = g.rows_per_panel();
    let (xd, wd, bias) = (x.data(), p.weights.data(), p.bias.data());
    out.data_mut()
        .par_chunks_mut(panel_rows * g.co)
        .enumerate()
        .for_each(|(i, out_panel)| {
            let rows = out_panel.len() / g.co;
            let mut col = vec![T::zero(); rows * patch];
            g.im2col(xd, i * panel_rows, rows, &mut col);
            gemm_nn(rows, patch, g.co, &col, wd, out_panel, false);
            for row in out_panel.chunks_exact_mut(g.co) {
                for (o, &b) in row.iter_mut().zip(bias) {
                    *o = *o + b;
                }
            }
        });
    Ok(out)
}

/// Reference convolution by direct summation over each window.
pub fn conv2d_forward_direct<T: Real>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), p)?;
    let mut out = Tensor::zeros(&[g.n, g.oh, g.ow, g.co])?;
    let w = p.weights.data();
    for r in 0..g.rows() {
        for co in 0..g.co {
            let mut acc = p.bias.data()[co];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    if let Some(src) = g.source(r, ky, kx) {
                        for ci in 0..g.ci {
                            let wi = ((ky * g.kw + kx) * g.ci + ci) * g.co + co;
                            acc = acc + x.data()[src + ci] * w[wi];
                        }
                    }
                }
            }
            out.data_mut()[r * g.co + co] = acc;
        }
    }
    Ok(out)
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(x.shape(), p)?;
    if grad_out.shape() != [g.n, g.oh, g.ow, g.co] {
        return Err(Error::shape(format!(
            "conv2d grad_out {:?} does not match output {:?}",
            grad_out.shape(),
            [g.n, g.oh, g.ow, g.co]
        )));
    }
    let patch = g.patch();
    let mut grad_x = x.zeros_like();
    let mut grad_w = p.weights.zeros_like();
    let mut grad_b = p.bias.zeros_like();

    for row in grad_out.data().chunks_exact(g.co) {
        for (b, &v) in grad_b.data_mut().iter_mut().zip(row) {
            *b = *b + v;
        }
    }

    let panel_rows = g.rows_per_panel();
    let mut col = vec![T::zero(); panel_rows.min(g.rows()) * patch];
    let mut dcol = col.clone();
    let mut first = 0;
    while first < g.rows() {
        let rows = panel_rows.min(g.rows() - first);
        let gpanel = &grad_out.data()[first * g.co..(first + rows) * g.co];
        g.im2col(x.data(), first, rows, &mut col);
        gemm_tn(patch, rows, g.co, &col, gpanel, grad_w.data_mut(), first > 0);
        gemm_nt(rows, g.co, patch, gpanel, p.weights.data(), &mut dcol, false);
        g.col2im_add(&dcol, first, rows, grad_x.data_mut());
        first += rows;
    }

    Ok(ConvGrads { input: grad_x, weights: grad_w, bias: grad_b })
}
