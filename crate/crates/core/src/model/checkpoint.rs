//! Binary checkpoint format.
//!
//! ```text
//! "EARCONV1"                      8 bytes magic
//! header_len                      u32 little-endian
//! header                          header_len bytes of UTF-8 JSON
//! payload                         little-endian f32 blobs
//! ```
//!
//! The header lists every parameter tensor with its shape and its byte
//! offset relative to the start of the payload, in canonical parameter
//! order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, ModelGraph, ModelMeta};
use crate::error::{CheckpointError, Error, Result};
use crate::tensor::{Real, Tensor};

pub const MAGIC: &[u8; 8] = b"EARCONV1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub nbytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub meta: ModelMeta,
    pub layers: Vec<LayerSpec>,
    pub tensors: Vec<TensorEntry>,
    pub total_param_bytes: usize,
}

impl CheckpointHeader {
    pub fn for_model<T: Real>(model: &ModelGraph<T>) -> Self {
        let mut offset = 0;
        let tensors = model
            .params()
            .into_iter()
            .map(|(name, t)| {
                let nbytes = t.len() * 4;
                let e = TensorEntry { name, shape: t.shape().to_vec(), offset, nbytes };
                offset += nbytes;
                e
            })
            .collect();
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            meta: model.meta.clone(),
            layers: model.layers().to_vec(),
            tensors,
            total_param_bytes: offset,
        }
    }
}

/// Serialises `model` (parameters rounded to f32) into `w`.
pub fn write_checkpoint<T: Real>(model: &ModelGraph<T>, mut w: impl Write) -> std::io::Result<()> {
    let header = serde_json::to_vec(&CheckpointHeader::for_model(model)).map_err(std::io::Error::other)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::new();
    for (_, t) in model.params() {
        buf.clear();
        buf.extend(t.data().iter().flat_map(|v| (v.as_f64() as f32).to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn save_checkpoint<T: Real>(model: &ModelGraph<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
    write_checkpoint(model, std::io::BufWriter::new(file))
        .map_err(|e| Error::io(format!("write {}", path.display()), e))
}

/// Parses a checkpoint held in memory.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(CheckpointHeader, ModelGraph<f32>)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let rest = &bytes[MAGIC.len()..];
    let len_bytes: [u8; 4] = rest
        .get(..4)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| CheckpointError::CorruptHeader("missing header length".into()))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let header_bytes = rest
        .get(4..4 + header_len)
        .ok_or_else(|| CheckpointError::CorruptHeader(format!("header length {header_len} exceeds file")))?;
    let header: CheckpointHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| CheckpointError::CorruptHeader(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(header.format_version).into());
    }
    let payload = &rest[4 + header_len..];

    let mut model = ModelGraph::<f32>::from_layers(header.layers.clone(), header.meta.clone())
        .map_err(|e| CheckpointError::CorruptHeader(format!("invalid layer graph: {e}")))?;
    let expected: Vec<(String, Vec<usize>)> = model
        .params()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected.len() != header.tensors.len() {
        return Err(CheckpointError::CorruptHeader(format!(
            "header lists {} tensors, architecture has {}",
            header.tensors.len(),
            expected.len()
        ))
        .into());
    }
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if name != &entry.name || shape != &entry.shape {
            return Err(CheckpointError::ShapeMismatch {
                name: entry.name.clone(),
                expected: shape.clone(),
                found: entry.shape.clone(),
            }
            .into());
        }
        if entry.nbytes != shape.iter().product::<usize>() * 4 {
            return Err(CheckpointError::CorruptHeader(format!("`{name}` byte count disagrees with its shape")).into());
        }
    }
    let needed = header.tensors.iter().map(|e| e.offset + e.nbytes).max().unwrap_or(0);
    if payload.len() < needed {
        return Err(CheckpointError::TruncatedPayload { expected: needed, found: payload.len() }.into());
    }
    for (dst, entry) in model.params_mut().into_iter().zip(&header.tensors) {
        let blob = &payload[entry.offset..entry.offset + entry.nbytes];
        let data = blob
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        *dst = Tensor::from_vec(&entry.shape, data)?;
    }
    Ok((header, model))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelGraph<f32>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("read {}", path.display()), e))?;
    Ok(read_checkpoint(&bytes)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_earnet, build_shrunken};
    use crate::{Mode, Rng};

    fn bytes(model: &ModelGraph<f32>) -> Vec<u8> {
        let mut v = Vec::new();
        write_checkpoint(model, &mut v).unwrap();
        v
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = build_shrunken::<f32>(5);
        let (_, back) = read_checkpoint(&bytes(&m)).unwrap();
        assert_eq!(back, m);
        let x = Rng::new(1).uniform(&[2, 36, 36, 3], 0.0, 1.0).unwrap();
        let a = m.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap().0;
        let b = back.forward(&x, Mode::Eval, &mut Rng::new(0)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn header_counts_full_model_bytes() {
        let h = CheckpointHeader::for_model(&build_earnet(0));
        assert_eq!(h.total_param_bytes, 2_280_578 * 4);
    }

    #[test]
    fn load_errors_are_distinct() {
        let m = build_shrunken::<f32>(5);
        let good = bytes(&m);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad), Err(Error::Checkpoint(CheckpointError::BadMagic))));

        let truncated = &good[..good.len() - 10];
        assert!(matches!(
            read_checkpoint(truncated),
            Err(Error::Checkpoint(CheckpointError::TruncatedPayload { .. }))
        ));

        let mut bad = good.clone();
        bad[13] = b'!';
        assert!(matches!(read_checkpoint(&bad), Err(Error::Checkpoint(CheckpointError::CorruptHeader(_)))));

        let mut header = CheckpointHeader::for_model(&m);
        header.tensors[0].shape = vec![5, 5, 3, 63];
        let mut forged = MAGIC.to_vec();
        let json = serde_json::to_vec(&header).unwrap();
        forged.extend((json.len() as u32).to_le_bytes());
        forged.extend(json);
        assert!(matches!(
            read_checkpoint(&forged),
            Err(Error::Checkpoint(CheckpointError::ShapeMismatch { .. }))
        ));

        header = CheckpointHeader::for_model(&m);
        header.format_version = 9;
        let mut forged = MAGIC.to_vec();
        let json = serde_json::to_vec(&header).unwrap();
        forged.extend((json.len() as u32).to_le_bytes());
        forged.extend(json);
        assert!(matches!(
            read_checkpoint(&forged),
            Err(Error::Checkpoint(CheckpointError::UnsupportedVersion(9)))
        ));
    }
}
