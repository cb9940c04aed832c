use super::{Fingerprint, SynthConfig, SynthDataset, SynthError};
use crate::util::fmt_f64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    config: SynthConfig,
    class_means: Vec<Vec<f64>>,
    fingerprints: Vec<Fingerprint>,
    roles: Vec<String>,
    checksum: String,
}

fn render_samples(dataset: &SynthDataset) -> String {
    let dim = dataset.config.input_dim();
    let col = match dataset.config.mode {
        super::Mode::FeatureVector => "f",
        super::Mode::ToyImage => "p",
    };
    let mut out = String::new();
    out.push_str("id,split,true_class");
    for i in 0..dim {
        out.push_str(&format!(",{col}{i}"));
    }
    out.push('\n');
    let mut id = 0u64;
    for (features, class) in dataset.labeled() {
        out.push_str(&format!("{id},labeled,{class}"));
        for v in features {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
        id += 1;
    }
    for (i, features) in dataset.unlabeled().iter().enumerate() {
        let class = dataset.hidden_truths()[i];
        out.push_str(&format!("{id},unlabeled,{class}"));
        for v in features {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
        id += 1;
    }
    out
}

/// Writes `manifest.json` and `samples.csv` into `dir`.
pub fn save(dataset: &SynthDataset, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let samples = render_samples(dataset);
    let checksum = hex::encode(Sha256::digest(samples.as_bytes()));
    let roles = (0..dataset.config.total_classes())
        .map(|c| {
            if dataset.is_novel_class(c) {
                "novel".to_string()
            } else {
                "known".to_string()
            }
        })
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config: dataset.config.clone(),
        class_means: dataset.class_means.clone(),
        fingerprints: dataset.fingerprints.clone(),
        roles,
        checksum,
    };
    let mut mf = fs::File::create(dir.join("manifest.json"))?;
    mf.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    mf.write_all(b"\n")?;
    fs::write(dir.join("samples.csv"), samples)?;
    Ok(())
}

/// Loads a dataset directory, verifying schema version and checksum.
pub fn load(dir: &Path) -> Result<SynthDataset, SynthError> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(SynthError::SchemaVersion {
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let samples = fs::read_to_string(dir.join("samples.csv"))?;
    let checksum = hex::encode(Sha256::digest(samples.as_bytes()));
    if checksum != manifest.checksum {
        return Err(SynthError::ChecksumMismatch);
    }

    let dim = manifest.config.input_dim();
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    let mut hidden = Vec::new();
    for (row, line) in samples.lines().enumerate().skip(1) {
        let bad = |reason: &str| SynthError::MalformedRow {
            row,
            reason: reason.to_string(),
        };
        let mut fields = line.split(',');
        let _id = fields.next().ok_or_else(|| bad("missing id"))?;
        let split = fields.next().ok_or_else(|| bad("missing split"))?;
        let class: usize = fields
            .next()
            .ok_or_else(|| bad("missing true_class"))?
            .parse()
            .map_err(|_| bad("unparseable true_class"))?;
        let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
        let values = values.map_err(|_| bad("unparseable feature value"))?;
        if values.len() != dim {
            return Err(bad(&format!(
                "expected {dim} feature columns, got {}",
                values.len()
            )));
        }
        match split {
            "labeled" => {
                if class >= manifest.config.k_known {
                    return Err(bad("labeled sample carries a novel class"));
                }
                labeled.push((values, class));
            }
            "unlabeled" => {
                unlabeled.push(values);
                hidden.push(class);
            }
            other => return Err(bad(&format!("unknown split {other:?}"))),
        }
    }

    Ok(SynthDataset::from_parts(
        manifest.config,
        manifest.class_means,
        manifest.fingerprints,
        labeled,
        unlabeled,
        hidden,
    ))
}
