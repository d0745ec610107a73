//! Feature-map grids: one tile per channel, each contrast-stretched on its own.

use std::path::Path;

use image::GrayImage;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub const MAX_TILES: usize = 64;
pub const GRID_COLUMNS: usize = 8;

/// Lays out the first `min(64, C)` channels of an `(H, W, C)` map (or a
/// batch of one) eight tiles per row. Each channel is min-max scaled to
/// 0..=255; a flat channel renders as mid-grey.
pub fn render_feature_grid<T: Real>(map: &Tensor<T>) -> Result<GrayImage> {
    let (h, w, c) = match *map.shape() {
        [h, w, c] | [1, h, w, c] => (h, w, c),
        _ => return Err(Error::shape(format!("feature map must be (H, W, C), got {:?}", map.shape()))),
    };
    let tiles = c.min(MAX_TILES);
    let cols = tiles.min(GRID_COLUMNS);
    let rows = tiles.div_ceil(GRID_COLUMNS);
    let mut img = GrayImage::new((cols * w) as u32, (rows * h) as u32);
    let data = map.data();
    for ch in 0..tiles {
        let values = (0..h * w).map(|i| data[i * c + ch].as_f64());
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (ox, oy) = ((ch % GRID_COLUMNS) * w, (ch / GRID_COLUMNS) * h);
        for y in 0..h {
            for x in 0..w {
                let v = data[(y * w + x) * c + ch].as_f64();
                let level = if hi > lo { ((v - lo) / (hi - lo) * 255.0).round() as u8 } else { 128 };
                img.put_pixel((ox + x) as u32, (oy + y) as u32, image::Luma([level]));
            }
        }
    }
    Ok(img)
}

pub fn save_feature_grid<T: Real>(map: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    render_feature_grid(map)?
        .save(path)
        .map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })
}
