use std::f64::consts::PI;

use crate::rng::Rng;
use crate::tensor::Tensor;

/// Random horizontal flip and rotation about the image centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub flip_prob: f64,
    /// Largest rotation magnitude in radians.
    pub max_rotation: f64,
}

impl Default for AugmentConfig {
    /// Flip with probability 0.2; rotate by up to ±0.2 of a full turn.
    fn default() -> Self {
        AugmentConfig { enabled: true, flip_prob: 0.2, max_rotation: 0.2 * 2.0 * PI }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        AugmentConfig { enabled: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    /// Radians, counter-clockwise.
    pub angle: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { flip: false, angle: 0.0 };

    /// Flip and angle are drawn independently, in that order.
    pub fn sample(cfg: &AugmentConfig, rng: &mut Rng) -> Self {
        if !cfg.enabled {
            return Self::IDENTITY;
        }
        let flip = rng.bernoulli(cfg.flip_prob);
        let u = rng.next_f64();
        let angle = if cfg.max_rotation > 0.0 { cfg.max_rotation * (2.0 * u - 1.0) } else { 0.0 };
        AugmentParams { flip, angle }
    }

    pub fn apply(&self, x: &Tensor<f32>) -> Tensor<f32> {
        let flipped;
        let src = if self.flip {
            flipped = flip_horizontal(x);
            &flipped
        } else {
            x
        };
        if self.angle == 0.0 {
            src.clone()
        } else {
            rotate(src, self.angle)
        }
    }
}

/// Augments an `(h, w, c)` image with the default settings.
pub fn augment(x: &Tensor<f32>, rng: &mut Rng) -> Tensor<f32> {
    AugmentParams::sample(&AugmentConfig::default(), rng).apply(x)
}

pub fn flip_horizontal(x: &Tensor<f32>) -> Tensor<f32> {
    let &[h, w, c] = x.shape() else { panic!("flip expects (h, w, c), got {:?}", x.shape()) };
    let mut out = x.clone();
    for y in 0..h {
        for col in 0..w {
            let src = (y * w + (w - 1 - col)) * c;
            let dst = (y * w + col) * c;
            out.data_mut()[dst..dst + c].copy_from_slice(&x.data()[src..src + c]);
        }
    }
    out
}

/// Rotates counter-clockwise as displayed (rows running down) by `angle`
/// radians about the centre with bilinear sampling. Samples outside the
/// source read as zero.
pub fn rotate(x: &Tensor<f32>, angle: f64) -> Tensor<f32> {
    let &[h, w, c] = x.shape() else { panic!("rotate expects (h, w, c), got {:?}", x.shape()) };
    let (sin, cos) = angle.sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let src = x.data();
    let mut out = x.zeros_like();
    let dst = out.data_mut();
    let fetch = |yy: i64, xx: i64, ch: usize| -> f64 {
        if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
            0.0
        } else {
            src[(yy as usize * w + xx as usize) * c + ch] as f64
        }
    };
    for y in 0..h {
        for xo in 0..w {
            let (dx, dy) = (xo as f64 - cx, y as f64 - cy);
            // inverse map: where in the source does this output pixel come from
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..c {
                let v = fetch(y0, x0, ch) * (1.0 - fx) * (1.0 - fy)
                    + fetch(y0, x0 + 1, ch) * fx * (1.0 - fy)
                    + fetch(y0 + 1, x0, ch) * (1.0 - fx) * fy
                    + fetch(y0 + 1, x0 + 1, ch) * fx * fy;
                dst[(y * w + xo) * c + ch] = v as f32;
            }
        }
    }
    out
}
