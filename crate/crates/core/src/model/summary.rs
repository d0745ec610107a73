//! Text rendering of the architecture as a layer table, and
//! the parser that reads it back.

use std::fmt::Write;

use super::{infer_shapes, LayerKind, LayerSpec};
use crate::error::{Error, Result};

/// `2280578` → `2,280,578`.
pub fn format_count(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn format_shape(shape: &[usize]) -> String {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    format!("(None, {})", dims.join(", "))
}

fn config(spec: &LayerSpec, layers: &[LayerSpec]) -> String {
    let mut s = format!("id={} kind={}", spec.id, spec.kind.tag());
    match &spec.kind {
        LayerKind::Input { height, width, channels } => {
            let _ = write!(s, " h={height} w={width} c={channels}");
        }
        LayerKind::Conv { kernel, stride, padding, in_channels, out_channels } => {
            let _ = write!(s, " k={kernel} s={stride} pad={} in={in_channels} out={out_channels}", padding.as_str());
        }
        LayerKind::MaxPool { window, stride, padding } => {
            let _ = write!(s, " k={window} s={stride} pad={}", padding.as_str());
        }
        LayerKind::Dropout { rate } => {
            let _ = write!(s, " rate={rate}");
        }
        LayerKind::Dense { in_features, out_features } => {
            let _ = write!(s, " in={in_features} out={out_features}");
        }
        _ => {}
    }
    if !spec.inputs.is_empty() {
        let from: Vec<&str> = spec.inputs.iter().map(|&j| layers[j].id.as_str()).collect();
        let _ = write!(s, " from={}", from.join(","));
    }
    s
}

/// One row per layer: block, display name, batch-agnostic output shape,
/// parameter count and a machine-readable config column, then the total.
pub fn render_architecture(layers: &[LayerSpec]) -> Result<String> {
    let shapes = infer_shapes(layers)?;
    let rows: Vec<[String; 5]> = layers
        .iter()
        .zip(&shapes)
        .map(|(l, shape)| {
            [
                l.block.clone(),
                l.name.clone(),
                format_shape(shape),
                format_count(l.kind.param_count()),
                config(l, layers),
            ]
        })
        .collect();
    let header = ["Blks", "Layer (type)", "Output Shape", "Param #", "Config"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };
    let rule = widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-");
    let mut out = String::new();
    out.push_str(&line(&header));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    let total: usize = layers.iter().map(|l| l.kind.param_count()).sum();
    let _ = writeln!(out, "Total params: {}", format_count(total));
    Ok(out)
}

/// Reads a table produced by [`render_architecture`] back into layer specs.
pub fn parse_architecture(text: &str) -> Result<Vec<LayerSpec>> {
    let bad = |msg: String| Error::Config(format!("architecture table: {msg}"));
    let mut layers: Vec<LayerSpec> = Vec::new();
    for line in text.lines() {
        let cells: Vec<&str> = line.split(" | ").map(str::trim).collect();
        if cells.len() != 5 || cells[0] == "Blks" {
            continue;
        }
        let kv: std::collections::HashMap<&str, &str> = cells[4]
            .split_whitespace()
            .filter_map(|tok| tok.split_once('='))
            .collect();
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("missing `{k}` in `{}`", cells[4])));
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| bad(format!("`{k}` is not an integer in `{}`", cells[4])))
        };
        let kind = match get("kind")? {
            "input" => LayerKind::Input { height: num("h")?, width: num("w")?, channels: num("c")? },
            "conv" => LayerKind::Conv {
                kernel: num("k")?,
                stride: num("s")?,
                padding: get("pad")?.parse()?,
                in_channels: num("in")?,
                out_channels: num("out")?,
            },
            "relu" => LayerKind::Relu,
            "maxpool" => LayerKind::MaxPool { window: num("k")?, stride: num("s")?, padding: get("pad")?.parse()? },
            "add" => LayerKind::Add,
            "gap" => LayerKind::GlobalAvgPool,
            "gmp" => LayerKind::GlobalMaxPool,
            "concat" => LayerKind::Concat,
            "dropout" => LayerKind::Dropout {
                rate: get("rate")?.parse().map_err(|_| bad("bad dropout rate".into()))?,
            },
            "dense" => LayerKind::Dense { in_features: num("in")?, out_features: num("out")? },
            "softmax" => LayerKind::Softmax,
            other => return Err(bad(format!("unknown kind `{other}`"))),
        };
        let inputs = match kv.get("from") {
            None => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|id| {
                    layers
                        .iter()
                        .position(|l| l.id == id)
                        .ok_or_else(|| bad(format!("`from={id}` names no earlier layer")))
                })
                .collect::<Result<_>>()?,
        };
        layers.push(LayerSpec {
            id: get("id")?.to_string(),
            name: cells[1].to_string(),
            block: cells[0].to_string(),
            kind,
            inputs,
        });
    }
    infer_shapes(&layers)?;
    Ok(layers)
}
