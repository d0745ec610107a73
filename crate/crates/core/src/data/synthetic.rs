//! Two-class texture corpus for smoke tests and desk-scale runs: class 0
//! images carry broad stripes at a random angle, class 1 images a finer
//! checkerboard. Colour, phase and scale are randomised per image.

use std::path::{Path, PathBuf};

use ::image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn synthetic_image(label: u8, size: usize, rng: &mut Rng) -> Tensor<f32> {
    let s = size as f64;
    // light and dark shades of one random colour
    let base = [0, 1, 2].map(|_| 0.3 + 0.4 * rng.next_f64());
    let (fg, bg) = (base.map(|v| v + 0.25), base.map(|v| v - 0.25));
    let angle = rng.next_f64() * std::f64::consts::PI;
    let (sin, cos) = angle.sin_cos();
    let phase = rng.next_f64();
    let (ox, oy) = (rng.next_f64(), rng.next_f64());
    let scale = 0.85 + 0.3 * rng.next_f64();
    let stripe_period = s / 3.0 * scale;
    let cell = s / 6.0 * scale;

    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64, y as f64);
            let on = if label == 0 {
                let u = (fx * cos + fy * sin) / stripe_period + phase;
                u.rem_euclid(1.0) < 0.5
            } else {
                let cx = ((fx / cell) + ox).floor() as i64;
                let cy = ((fy / cell) + oy).floor() as i64;
                (cx + cy).rem_euclid(2) == 0
            };
            let base = if on { fg } else { bg };
            for v in base {
                let noise = 0.06 * (rng.next_f64() - 0.5);
                data.push((v + noise).clamp(0.0, 1.0) as f32);
            }
        }
    }
    Tensor::from_vec(&[size, size, 3], data).expect("consistent size")
}

/// Writes `n` PNGs (alternating labels) and `manifest.csv` into `dir`;
/// returns the manifest path. Subject ids group images in fours.
pub fn write_synthetic_corpus(dir: impl AsRef<Path>, n: usize, size: usize, seed: u64) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let io = |what: &str, e: std::io::Error| Error::io(format!("{what} in {}", dir.display()), e);
    std::fs::create_dir_all(dir).map_err(|e| io("create directory", e))?;
    let root = Rng::new(seed);
    let mut manifest = String::from("image_path,label,subject_id\n");
    for i in 0..n {
        let label = (i % 2) as u8;
        let img = synthetic_image(label, size, &mut root.fork(&[i as u64]));
        let name = format!("synth_{i:04}_{label}.png");
        let png = RgbImage::from_fn(size as u32, size as u32, |x, y| {
            let at = (y as usize * size + x as usize) * 3;
            let px = &img.data()[at..at + 3];
            Rgb([0, 1, 2].map(|c| (px[c] * 255.0).round() as u8))
        });
        png.save(dir.join(&name))
            .map_err(|e| Error::Decode { path: dir.join(&name), message: e.to_string() })?;
        manifest.push_str(&format!("{name},{label},subject{:03}\n", i / 4));
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).map_err(|e| io("write manifest", e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_manifest;

    #[test]
    fn corpus_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_synthetic_corpus(dir.path(), 6, 40, 1).unwrap();
        let recs = load_manifest(&path).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!(recs.iter().filter(|r| r.label.index() == 1).count(), 3);
        let img = crate::data::decode_and_resize_to(&recs[0].image_path, 36, 36).unwrap();
        assert_eq!(img.shape(), &[36, 36, 3]);
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn generation_is_seeded() {
        let a = synthetic_image(1, 16, &mut Rng::new(5));
        let b = synthetic_image(1, 16, &mut Rng::new(5));
        assert_eq!(a, b);
    }
}
