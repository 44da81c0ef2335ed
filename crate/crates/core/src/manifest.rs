//! On-disk ensembles: `manifest.json` plus a `weights.bin` container.
//!
//! `weights.bin` layout, all little-endian:
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 8     | magic `CENSWGT\0`             |
//! | 4     | container version (u32)       |
//! | 4     | scalar width in bytes (u32)   |
//! | 8     | scalar count (u64)            |
//! | n*w   | parameters of every member    |
//!
//! The manifest records the SHA-256 of the whole weights file; loading fails
//! when it does not match.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{batch_evaluate, EvaluationRecord, RuntimeConfig};
use crate::classifiers::{ClassifierSpec, TrainedModel};
use crate::datasets::Dataset;
use crate::ensemble::SelectionRule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
const WEIGHTS_MAGIC: &[u8; 8] = b"CENSWGT\0";
const WEIGHTS_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberInfo {
    pub level: usize,
    pub subset_size: usize,
    pub subset_digest: String,
}

/// A trained ensemble: members in level order plus the schedules that
/// produced them and the default run-time configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleManifest<T> {
    pub members: Vec<TrainedModel<T>>,
    pub member_info: Vec<MemberInfo>,
    pub selection_rule: SelectionRule,
    pub training_thresholds: Vec<f64>,
    pub runtime: RuntimeConfig,
    pub dataset_id: String,
    pub dataset_digest: String,
}

impl<T: Scalar> EnsembleManifest<T> {
    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].spec().input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.members[0].spec().num_classes
    }

    pub fn evaluate(&self, rcfg: &RuntimeConfig, data: &Dataset<T>) -> Result<EvaluationRecord<T>> {
        self.check_compatible(data)?;
        batch_evaluate(&self.members, rcfg, data)
    }

    pub fn check_compatible(&self, data: &Dataset<T>) -> Result<()> {
        if data.feature_dim() != self.input_dim() {
            return Err(Error::invalid(format!(
                "dataset has {} features, ensemble expects {}",
                data.feature_dim(),
                self.input_dim()
            )));
        }
        if data.num_classes() > self.num_classes() {
            return Err(Error::invalid(format!(
                "dataset has {} classes, ensemble predicts {}",
                data.num_classes(),
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// Encoded `(manifest.json, weights.bin)` contents.
    pub fn encode(&self) -> Result<(Vec<u8>, Vec<u8>)> {
        if self.members.is_empty() || self.members.len() != self.member_info.len() {
            return Err(Error::Manifest("member list and member info disagree".into()));
        }
        let total: usize = self.members.iter().map(|m| m.parameters().len()).sum();
        let mut weights = Vec::with_capacity(WEIGHTS_HEADER_LEN + total * T::BYTES);
        weights.extend_from_slice(WEIGHTS_MAGIC);
        weights.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        weights.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        weights.extend_from_slice(&(total as u64).to_le_bytes());

        let mut members = Vec::with_capacity(self.members.len());
        let mut offset = 0;
        for (model, info) in self.members.iter().zip(&self.member_info) {
            for &p in model.parameters() {
                p.write_le(&mut weights);
            }
            members.push(MemberEntry {
                level: info.level,
                spec: model.spec().clone(),
                training_fingerprint: model.training_fingerprint().to_string(),
                weights_offset: offset,
                weights_len: model.parameters().len(),
                subset_size: info.subset_size,
                subset_digest: info.subset_digest.clone(),
            });
            offset += model.parameters().len();
        }

        let file = ManifestFile {
            format_version: FORMAT_VERSION,
            dtype: T::DTYPE.to_string(),
            selection_rule: self.selection_rule,
            training_thresholds: self.training_thresholds.clone(),
            runtime: self.runtime.clone(),
            dataset: DatasetRef {
                id: self.dataset_id.clone(),
                digest: self.dataset_digest.clone(),
            },
            weights: WeightsRef {
                file: WEIGHTS_FILE.to_string(),
                sha256: sha256_hex(&weights),
                scalar_count: total,
            },
            members,
        };
        let mut json = serde_json::to_vec_pretty(&file)?;
        json.push(b'\n');
        Ok((json, weights))
    }

    /// SHA-256 over the encoded manifest and weights.
    pub fn digest(&self) -> Result<String> {
        let (json, weights) = self.encode()?;
        let mut h = Sha256::new();
        h.update(&json);
        h.update(&weights);
        Ok(hex::encode(h.finalize()))
    }

    pub fn decode(json: &[u8], weights: &[u8]) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_slice(json).map_err(|e| Error::Manifest(e.to_string()))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Manifest("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version.min(u32::MAX as u64) as u32,
                expected: FORMAT_VERSION,
            });
        }
        let file: ManifestFile = serde_json::from_value(raw).map_err(|e| Error::Manifest(e.to_string()))?;
        if file.dtype != T::DTYPE {
            return Err(Error::Manifest(format!(
                "weights are {}, requested {}",
                file.dtype,
                T::DTYPE
            )));
        }

        let computed = sha256_hex(weights);
        if computed != file.weights.sha256 {
            return Err(Error::DigestMismatch {
                what: WEIGHTS_FILE.to_string(),
                recorded: file.weights.sha256,
                computed,
            });
        }
        if weights.len() < WEIGHTS_HEADER_LEN || &weights[..8] != WEIGHTS_MAGIC {
            return Err(Error::Manifest("weights file has a bad header".into()));
        }
        let word = |at: usize| u32::from_le_bytes(weights[at..at + 4].try_into().expect("4 bytes"));
        if word(8) != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: word(8),
                expected: FORMAT_VERSION,
            });
        }
        if word(12) as usize != T::BYTES {
            return Err(Error::Manifest(format!("weights scalar width {} != {}", word(12), T::BYTES)));
        }
        let count = u64::from_le_bytes(weights[16..24].try_into().expect("8 bytes")) as usize;
        let body = &weights[WEIGHTS_HEADER_LEN..];
        if count != file.weights.scalar_count || body.len() != count * T::BYTES {
            return Err(Error::Manifest(format!(
                "weights body holds {} bytes, header declares {count} scalars",
                body.len()
            )));
        }
        let scalars: Vec<T> = body.chunks_exact(T::BYTES).map(T::read_le).collect();

        if file.members.is_empty() {
            return Err(Error::Manifest("manifest lists no members".into()));
        }
        let mut members = Vec::with_capacity(file.members.len());
        let mut member_info = Vec::with_capacity(file.members.len());
        for (expected_level, m) in file.members.into_iter().enumerate() {
            if m.level != expected_level {
                return Err(Error::Manifest(format!(
                    "member levels must be contiguous: found {} at position {expected_level}",
                    m.level
                )));
            }
            let end = m
                .weights_offset
                .checked_add(m.weights_len)
                .filter(|&e| e <= scalars.len())
                .ok_or_else(|| Error::Manifest(format!("member {} weights out of range", m.level)))?;
            let model = TrainedModel::from_parameters(
                m.spec,
                scalars[m.weights_offset..end].to_vec(),
                m.training_fingerprint,
            )
            .map_err(|e| Error::Manifest(format!("member {}: {e}", m.level)))?;
            members.push(model);
            member_info.push(MemberInfo {
                level: m.level,
                subset_size: m.subset_size,
                subset_digest: m.subset_digest,
            });
        }
        if file.training_thresholds.len() + 1 != members.len() {
            return Err(Error::Manifest(format!(
                "{} members but {} training thresholds",
                members.len(),
                file.training_thresholds.len()
            )));
        }
        file.runtime
            .validate(members.len())
            .map_err(|e| Error::Manifest(e.to_string()))?;

        Ok(EnsembleManifest {
            members,
            member_info,
            selection_rule: file.selection_rule,
            training_thresholds: file.training_thresholds,
            runtime: file.runtime,
            dataset_id: file.dataset.id,
            dataset_digest: file.dataset.digest,
        })
    }
}

pub fn save_manifest<T: Scalar>(manifest: &EnsembleManifest<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (json, weights) = manifest.encode()?;
    let wpath = dir.join(WEIGHTS_FILE);
    fs::write(&wpath, weights).map_err(|e| Error::io(&wpath, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
}

pub fn load_manifest<T: Scalar>(dir: &Path) -> Result<EnsembleManifest<T>> {
    let mpath = dir.join(MANIFEST_FILE);
    let json = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let wpath = dir.join(WEIGHTS_FILE);
    let weights = fs::read(&wpath).map_err(|e| Error::io(&wpath, e))?;
    EnsembleManifest::decode(&json, &weights)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format_version: u32,
    dtype: String,
    selection_rule: SelectionRule,
    training_thresholds: Vec<f64>,
    runtime: RuntimeConfig,
    dataset: DatasetRef,
    weights: WeightsRef,
    members: Vec<MemberEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRef {
    id: String,
    digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsRef {
    file: String,
    sha256: String,
    scalar_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemberEntry {
    level: usize,
    spec: ClassifierSpec,
    training_fingerprint: String,
    weights_offset: usize,
    weights_len: usize,
    subset_size: usize,
    subset_digest: String,
}
