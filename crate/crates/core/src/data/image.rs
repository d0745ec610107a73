use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Side length of the network's input images.
pub const INPUT_SIZE: usize = 256;

/// Decodes a PNG or JPEG into an `(h, w, 3)` tensor scaled to `[0, 1]`.
pub fn decode_image(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let img = ::image::open(path)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
    Tensor::from_vec(&[h, w, 3], data)
}

pub fn decode_and_resize(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    decode_and_resize_to(path, INPUT_SIZE, INPUT_SIZE)
}

pub fn decode_and_resize_to(path: impl AsRef<Path>, height: usize, width: usize) -> Result<Tensor<f32>> {
    let img = decode_image(path)?;
    resize_bilinear(&img, height, width)
}

fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Bilinear resize of an `(h, w, c)` tensor with half-pixel centres and
/// edge clamping.
pub fn resize_bilinear(img: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    let &[h, w, c] = img.shape() else {
        return Err(Error::shape(format!("resize expects (h, w, c), got {:?}", img.shape())));
    };
    if (h, w) == (out_h, out_w) {
        return Ok(img.clone());
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, (src - i0 as f64) as f32)
            })
            .collect()
    };
    let ys = axis(h, out_h);
    let xs = axis(w, out_w);
    let src = img.data();
    let mut out = Tensor::zeros(&[out_h, out_w, c])?;
    let dst = out.data_mut();
    for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * w + x) * c + ch];
                let top = lerp(at(y0, x0), at(y0, x1), tx);
                let bottom = lerp(at(y1, x0), at(y1, x1), tx);
                dst[(oy * out_w + ox) * c + ch] = lerp(top, bottom, ty).clamp(0.0, 1.0);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ::image::{Rgb, RgbImage};

    #[test]
    fn same_size_is_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        RgbImage::from_fn(256, 256, |x, y| Rgb([x as u8, y as u8, 7])).save(&p).unwrap();
        let t = decode_and_resize(&p).unwrap();
        assert_eq!(t.shape(), &[256, 256, 3]);
        assert_eq!(t.data()[(10 * 256 + 20) * 3], 20.0 / 255.0);
    }

    #[test]
    fn constant_colour_survives_downscale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        RgbImage::from_pixel(512, 512, Rgb([10, 200, 255])).save(&p).unwrap();
        let t = decode_and_resize(&p).unwrap();
        assert_eq!(t.shape(), &[256, 256, 3]);
        for px in t.data().chunks(3) {
            assert_eq!(px, &[10.0 / 255.0, 200.0 / 255.0, 1.0]);
        }
    }

    #[test]
    fn two_pixel_upscale_interpolates() {
        let img = Tensor::from_vec(&[1, 2, 1], vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 2, 4).unwrap();
        let row = &out.data()[..4];
        assert_eq!(row[0], 0.0);
        assert_eq!(row[3], 1.0);
        assert!(row[1] > 0.0 && row[1] < 1.0 && row[2] > 0.0 && row[2] < 1.0);
        assert!((row[1] - 0.25).abs() < 1e-6 && (row[2] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn undecodable_file_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.png");
        std::fs::write(&p, b"not an image").unwrap();
        match decode_image(&p) {
            Err(Error::Decode { path, .. }) => assert_eq!(path, p),
            other => panic!("unexpected {other:?}"),
        }
    }
}
