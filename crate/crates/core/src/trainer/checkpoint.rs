use super::{AdamState, RunState, TrainConfig, TrainError};
use crate::model::{EncoderParams, FfeParams, ModelParams, PrototypeBank};
use crate::synthdata::Mode;
use crate::util::fmt_f64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

const CKPT_SCHEMA: u32 = 1;

/// Scalar/topology header; the float payload lives in the table below it.
#[derive(Debug, Serialize, Deserialize)]
struct CkptManifest {
    schema_version: u32,
    epoch_completed: usize,
    adam_t: u64,
    gap_ratio: f64,
    config: TrainConfig,
    mode: Mode,
    input_dim: usize,
    hidden_dim: usize,
    feature_dim: usize,
    ffe_side: Option<usize>,
    ffe_enabled: Option<bool>,
    k_total: usize,
    k_known: usize,
    live: Vec<bool>,
}

fn write_row(out: &mut String, name: &str, shape: &[usize], values: &[f64]) {
    out.push_str(name);
    out.push(',');
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    out.push_str(&dims.join("x"));
    out.push(',');
    let mut first = true;
    for &v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&fmt_f64(v));
        first = false;
    }
    out.push('\n');
}

/// Writes one run state as a single text file: a JSON manifest line followed
/// by a `name,shape,values` table covering every parameter and optimizer
/// moment.
pub fn checkpoint_save(
    config: &TrainConfig,
    state: &RunState,
    path: &Path,
) -> Result<(), TrainError> {
    let enc = &state.model.encoder;
    let manifest = CkptManifest {
        schema_version: CKPT_SCHEMA,
        epoch_completed: state.epoch_completed,
        adam_t: state.adam.t,
        gap_ratio: state.gap_ratio,
        config: config.clone(),
        mode: state.model.mode,
        input_dim: enc.input_dim,
        hidden_dim: enc.hidden_dim,
        feature_dim: enc.feature_dim,
        ffe_side: state.model.ffe.as_ref().map(|f| f.side),
        ffe_enabled: state.model.ffe.as_ref().map(|f| f.enabled),
        k_total: state.bank.k_total,
        k_known: state.bank.k_known,
        live: state.bank.live.clone(),
    };
    let mut text = serde_json::to_string(&manifest)?;
    text.push('\n');
    write_row(&mut text, "encoder.w1", &[enc.input_dim, enc.hidden_dim], &enc.w1);
    write_row(&mut text, "encoder.b1", &[enc.hidden_dim], &enc.b1);
    write_row(&mut text, "encoder.w2", &[enc.hidden_dim, enc.feature_dim], &enc.w2);
    write_row(&mut text, "encoder.b2", &[enc.feature_dim], &enc.b2);
    if let Some(ffe) = &state.model.ffe {
        write_row(&mut text, "ffe.gain", &[ffe.side, ffe.side], &ffe.gain);
        write_row(&mut text, "ffe.bias", &[ffe.side, ffe.side], &ffe.bias);
    }
    write_row(
        &mut text,
        "prototypes",
        &[state.bank.k_total, state.bank.dim],
        &state.bank.protos,
    );
    for (name, buf) in &state.adam.m {
        write_row(&mut text, &format!("adam.m.{name}"), &[buf.len()], buf);
    }
    for (name, buf) in &state.adam.v {
        write_row(&mut text, &format!("adam.v.{name}"), &[buf.len()], buf);
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

fn parse_table(lines: std::str::Lines<'_>) -> Result<BTreeMap<String, Vec<f64>>, TrainError> {
    let mut table = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (name, _shape, values) = (
            parts
                .next()
                .ok_or_else(|| TrainError::CheckpointFormat(format!("row {i}: missing name")))?,
            parts
                .next()
                .ok_or_else(|| TrainError::CheckpointFormat(format!("row {i}: missing shape")))?,
            parts
                .next()
                .ok_or_else(|| TrainError::CheckpointFormat(format!("row {i}: missing values")))?,
        );
        let parsed: Result<Vec<f64>, _> = values.split(' ').map(str::parse::<f64>).collect();
        let parsed = parsed.map_err(|e| {
            TrainError::CheckpointFormat(format!("row {i} ({name}): bad float: {e}"))
        })?;
        table.insert(name.to_string(), parsed);
    }
    Ok(table)
}

fn take(
    table: &mut BTreeMap<String, Vec<f64>>,
    name: &str,
    expect_len: usize,
) -> Result<Vec<f64>, TrainError> {
    let buf = table
        .remove(name)
        .ok_or_else(|| TrainError::CheckpointFormat(format!("missing tensor {name}")))?;
    if buf.len() != expect_len {
        return Err(TrainError::CheckpointFormat(format!(
            "tensor {name} has {} values, expected {expect_len}",
            buf.len()
        )));
    }
    Ok(buf)
}

/// Reads a checkpoint back into (config, state).
pub fn checkpoint_load(path: &Path) -> Result<(TrainConfig, RunState), TrainError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let manifest_line = lines
        .next()
        .ok_or_else(|| TrainError::CheckpointFormat("empty file".into()))?;
    let manifest: CkptManifest = serde_json::from_str(manifest_line)
        .map_err(|e| TrainError::CheckpointFormat(format!("bad manifest: {e}")))?;
    if manifest.schema_version != CKPT_SCHEMA {
        return Err(TrainError::CheckpointFormat(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    let mut table = parse_table(lines)?;

    let (di, dh, df) = (manifest.input_dim, manifest.hidden_dim, manifest.feature_dim);
    let encoder = EncoderParams {
        input_dim: di,
        hidden_dim: dh,
        feature_dim: df,
        w1: take(&mut table, "encoder.w1", di * dh)?,
        b1: take(&mut table, "encoder.b1", dh)?,
        w2: take(&mut table, "encoder.w2", dh * df)?,
        b2: take(&mut table, "encoder.b2", df)?,
    };
    let ffe = match (manifest.ffe_side, manifest.ffe_enabled) {
        (Some(side), Some(enabled)) => Some(FfeParams {
            side,
            gain: take(&mut table, "ffe.gain", side * side)?,
            bias: take(&mut table, "ffe.bias", side * side)?,
            enabled,
        }),
        _ => None,
    };
    let model = ModelParams::new(manifest.mode, encoder, ffe)?;
    let bank = PrototypeBank {
        k_total: manifest.k_total,
        k_known: manifest.k_known,
        dim: df,
        protos: take(&mut table, "prototypes", manifest.k_total * df)?,
        live: manifest.live,
    };
    let mut adam = AdamState {
        t: manifest.adam_t,
        ..Default::default()
    };
    let names: Vec<String> = table.keys().cloned().collect();
    for name in names {
        let buf = table.remove(&name).expect("key just listed");
        if let Some(param) = name.strip_prefix("adam.m.") {
            adam.m.insert(param.to_string(), buf);
        } else if let Some(param) = name.strip_prefix("adam.v.") {
            adam.v.insert(param.to_string(), buf);
        } else {
            return Err(TrainError::CheckpointFormat(format!(
                "unexpected tensor {name}"
            )));
        }
    }
    Ok((
        manifest.config,
        RunState {
            epoch_completed: manifest.epoch_completed,
            model,
            bank,
            adam,
            gap_ratio: manifest.gap_ratio,
        },
    ))
}
