//! Versioned text checkpoints.
//!
//! Line 1 is `SFE-CKPT v1`. Each tensor is a `tensor <name> <dims...>`
//! header line followed by one line of values printed with 17 significant
//! decimal digits. Structural scalars (dims, gating mode, active mask)
//! travel as `meta.*` tensors ahead of the parameters, so the file format
//! stays uniform. The loader rejects unknown versions, unknown names,
//! missing tensors, and shape mismatches.

use std::fs;
use std::path::Path;

use super::model::{GateMode, ModelDims, SfeModel};
use super::SfenetError;

const MAGIC: &str = "SFE-CKPT v1";

fn fmt_values(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders a checkpoint to its exact on-disk text.
pub fn write_checkpoint_string(model: &SfeModel) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let mut push = |name: &str, dims: &[usize], values: &[f64]| {
        out.push_str("tensor ");
        out.push_str(name);
        for d in dims {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        out.push_str(&fmt_values(values));
        out.push('\n');
    };
    let mode = match model.gate_mode {
        GateMode::Softmax => 0.0,
        GateMode::Uniform => 1.0,
    };
    push("meta.gate_mode", &[1], &[mode]);
    let active: Vec<f64> = model.active.iter().map(|&a| f64::from(u8::from(a))).collect();
    push("meta.active", &[5], &active);
    let sd: Vec<f64> = model.dims.stream_dims.iter().map(|&d| d as f64).collect();
    push("meta.stream_dims", &[5], &sd);
    push("meta.hidden", &[1], &[model.dims.hidden as f64]);
    push("meta.landmark_dim", &[1], &[model.dims.landmark_dim as f64]);
    for (k, stream) in crate::pooling::Stream::ALL.iter().enumerate() {
        let dim = model.dims.stream_dims[k];
        push(&format!("norm.{}.mean", stream.name()), &[dim], &model.feat_mean[k]);
        push(&format!("norm.{}.std", stream.name()), &[dim], &model.feat_std[k]);
    }
    let shapes = model.tensor_shapes();
    for ((name, values), (sname, shape)) in model.tensors().iter().zip(shapes.iter()) {
        debug_assert_eq!(name, sname);
        push(name, shape, values);
    }
    out
}

pub fn save_checkpoint(model: &SfeModel, path: impl AsRef<Path>) -> Result<(), SfenetError> {
    fs::write(path, write_checkpoint_string(model))?;
    Ok(())
}

struct RawTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

fn parse_tensors(text: &str) -> Result<Vec<(String, RawTensor)>, SfenetError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == MAGIC => {}
        Some(other) => {
            return Err(SfenetError::BadCheckpoint(format!("unknown version line {other:?}")))
        }
        None => return Err(SfenetError::BadCheckpoint("empty file".into())),
    }
    let mut out = Vec::new();
    while let Some(header) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(SfenetError::BadCheckpoint(format!("bad header line {header:?}")));
        }
        let name = parts
            .next()
            .ok_or_else(|| SfenetError::BadCheckpoint("header missing name".into()))?
            .to_string();
        let dims = parts
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| SfenetError::BadCheckpoint(format!("bad dim {p:?} in {name}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let value_line = lines
            .next()
            .ok_or_else(|| SfenetError::BadCheckpoint(format!("missing values for {name}")))?;
        let values = value_line
            .split_whitespace()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| SfenetError::BadCheckpoint(format!("bad value in {name}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let expect: usize = dims.iter().product();
        if values.len() != expect {
            return Err(SfenetError::BadCheckpoint(format!(
                "{name}: {} values for shape {:?}",
                values.len(),
                dims
            )));
        }
        out.push((name, RawTensor { dims, values }));
    }
    Ok(out)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SfeModel, SfenetError> {
    let text = fs::read_to_string(path)?;
    let tensors = parse_tensors(&text)?;
    let get = |name: &str| -> Result<&RawTensor, SfenetError> {
        tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| SfenetError::BadCheckpoint(format!("missing tensor {name}")))
    };
    let gate_mode = match get("meta.gate_mode")?.values[0] as i64 {
        0 => GateMode::Softmax,
        1 => GateMode::Uniform,
        other => {
            return Err(SfenetError::BadCheckpoint(format!("bad gate mode {other}")))
        }
    };
    let active_raw = &get("meta.active")?.values;
    if active_raw.len() != 5 {
        return Err(SfenetError::BadCheckpoint("meta.active must have 5 entries".into()));
    }
    let active: [bool; 5] = std::array::from_fn(|k| active_raw[k] != 0.0);
    let sd = &get("meta.stream_dims")?.values;
    if sd.len() != 5 {
        return Err(SfenetError::BadCheckpoint("meta.stream_dims must have 5 entries".into()));
    }
    let dims = ModelDims {
        stream_dims: std::array::from_fn(|k| sd[k] as usize),
        hidden: get("meta.hidden")?.values[0] as usize,
        landmark_dim: get("meta.landmark_dim")?.values[0] as usize,
    };
    let mut model = SfeModel::zeros(dims, gate_mode, active);
    for (k, stream) in crate::pooling::Stream::ALL.iter().enumerate() {
        let dim = model.dims.stream_dims[k];
        for (kind, slot) in
            [("mean", &mut model.feat_mean[k]), ("std", &mut model.feat_std[k])]
        {
            let name = format!("norm.{}.{kind}", stream.name());
            let raw = get(&name)?;
            if raw.dims != [dim] {
                return Err(SfenetError::BadCheckpoint(format!(
                    "{name}: shape {:?} does not match expected [{dim}]",
                    raw.dims
                )));
            }
            slot.copy_from_slice(&raw.values);
        }
    }
    let shapes = model.tensor_shapes();
    let mut known: Vec<String> = shapes.iter().map(|(n, _)| n.clone()).collect();
    for stream in crate::pooling::Stream::ALL {
        known.push(format!("norm.{}.mean", stream.name()));
        known.push(format!("norm.{}.std", stream.name()));
    }
    for (name, _) in &tensors {
        if !name.starts_with("meta.") && !known.iter().any(|k| k == name) {
            return Err(SfenetError::BadCheckpoint(format!("unknown tensor {name}")));
        }
    }
    for ((name, shape), (mname, slot)) in shapes.iter().zip(model.tensors_mut()) {
        debug_assert_eq!(name, &mname);
        let raw = tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| SfenetError::BadCheckpoint(format!("missing tensor {name}")))?;
        if &raw.dims != shape {
            return Err(SfenetError::BadCheckpoint(format!(
                "{name}: shape {:?} does not match expected {:?}",
                raw.dims, shape
            )));
        }
        slot.copy_from_slice(&raw.values);
    }
    Ok(model)
}
