//! Ensemble directory format.
//!
//! ```text
//! <dir>/manifest.json      format_version, member_count, input_dim, members[{file, labels}]
//! <dir>/member_000.json    spec, label_map, head (centroid document), layers
//! ```
//!
//! Weights are base64 little-endian f32. Trained models hold f32-exact values,
//! so a restored ensemble predicts bit-for-bit like the original.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::EnsembleModel;
use crate::centroids::{CentroidDocument, CentroidSet};
use crate::codec::{decode_f32, encode_f32};
use crate::error::{Error, Result};
use crate::netcore::{DenseLayer, NetworkModel, NetworkSpec};
use crate::ClassId;

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub labels: Vec<ClassId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub format_version: u32,
    pub member_count: usize,
    pub input_dim: usize,
    pub members: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerDocument {
    fan_in: usize,
    fan_out: usize,
    weight: String,
    bias: String,
}

/// A self-describing member file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberDocument {
    format_version: u32,
    spec: NetworkSpec,
    label_map: Vec<ClassId>,
    head: CentroidDocument,
    layers: Vec<LayerDocument>,
}

impl MemberDocument {
    pub fn from_model(model: &NetworkModel) -> Self {
        Self {
            format_version: ENSEMBLE_FORMAT_VERSION,
            spec: model.spec().clone(),
            label_map: model.label_map().to_vec(),
            head: model.head().to_document(),
            layers: model
                .layers()
                .iter()
                .map(|l| LayerDocument {
                    fan_in: l.fan_in(),
                    fan_out: l.fan_out(),
                    weight: encode_f32(l.weight.iter()),
                    bias: encode_f32(l.bias.iter()),
                })
                .collect(),
        }
    }

    pub fn into_model(self, origin: &Path) -> Result<NetworkModel> {
        if self.format_version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                path: origin.to_path_buf(),
                found: self.format_version,
                supported: ENSEMBLE_FORMAT_VERSION,
            });
        }
        let corrupted = |reason: String| Error::CorruptedPayload {
            path: origin.to_path_buf(),
            reason,
        };
        let head = CentroidSet::from_document(&self.head, origin)?;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let weight = decode_f32(&l.weight, l.fan_in * l.fan_out)
                    .map_err(|r| corrupted(format!("layer {i} weight: {r}")))?;
                let bias = decode_f32(&l.bias, l.fan_out)
                    .map_err(|r| corrupted(format!("layer {i} bias: {r}")))?;
                Ok(DenseLayer {
                    weight: Array2::from_shape_vec((l.fan_out, l.fan_in), weight)
                        .expect("length checked"),
                    bias: Array1::from(bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkModel::from_parts(self.spec, layers, head, self.label_map)
    }

    fn label_map(&self) -> &[ClassId] {
        &self.label_map
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize") + "\n"
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn member_file_name(index: usize) -> String {
    format!("member_{index:03}.json")
}

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<()> {
    write(path, &to_json(&MemberDocument::from_model(model)))
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    let doc: MemberDocument = read_json(path)?;
    doc.into_model(path)
}

/// Writes the manifest and one file per member into `dir` (created if
/// needed). Output is deterministic, so re-persisting an unchanged member
/// rewrites identical bytes.
pub fn persist(ensemble: &EnsembleModel, dir: &Path) -> Result<EnsembleManifest> {
    let input_dim = ensemble
        .input_dim()
        .ok_or_else(|| Error::Domain("cannot persist an empty ensemble".to_string()))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(ensemble.len());
    for (j, m) in ensemble.members().iter().enumerate() {
        let file = member_file_name(j);
        save_model(m, &dir.join(&file))?;
        entries.push(ManifestEntry {
            file,
            labels: m.label_map().to_vec(),
        });
    }
    let manifest = EnsembleManifest {
        format_version: ENSEMBLE_FORMAT_VERSION,
        member_count: entries.len(),
        input_dim,
        members: entries,
    };
    write(&dir.join(MANIFEST_FILE), &to_json(&manifest))?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

pub fn restore(dir: &Path) -> Result<EnsembleModel> {
    let path = manifest_path(dir);
    let manifest: EnsembleManifest = read_json(&path)?;
    if manifest.format_version != ENSEMBLE_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            path,
            found: manifest.format_version,
            supported: ENSEMBLE_FORMAT_VERSION,
        });
    }
    if manifest.member_count != manifest.members.len() {
        return Err(Error::MemberCountMismatch {
            declared: manifest.member_count,
            listed: manifest.members.len(),
        });
    }
    let mut members = Vec::with_capacity(manifest.members.len());
    for entry in &manifest.members {
        let member_path = dir.join(&entry.file);
        let doc: MemberDocument = read_json(&member_path)?;
        if doc.label_map() != entry.labels.as_slice() {
            return Err(Error::Format {
                path: member_path,
                reason: "label map disagrees with the manifest".to_string(),
            });
        }
        let model = doc.into_model(&member_path)?;
        if model.input_dim() != manifest.input_dim {
            return Err(Error::Format {
                path: member_path,
                reason: format!(
                    "input width {} disagrees with manifest {}",
                    model.input_dim(),
                    manifest.input_dim
                ),
            });
        }
        members.push(model);
    }
    EnsembleModel::from_members(members)
}
