//! On-disk model artifacts: a directory holding `manifest.json` and
//! `weights.bin`.
//!
//! The blob is every parameter value as a little-endian `f64`, in node order
//! and, within a node, in the order the manifest's `parameters` list gives.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wqnet_core::data::{Scaler, Task};
use wqnet_core::models::{HeldOutReport, LabelCodec, ModelArtifact, TargetScaler, TrainingSummary};
use wqnet_core::nn::{NetworkGraph, ParamStore};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CorruptBlob: weights.bin holds {found} bytes, manifest needs {expected}")]
    CorruptBlob { expected: usize, found: usize },
    #[error("UnknownVersion: format_version {0} is not supported")]
    UnknownVersion(u64),
    #[error("ManifestGraphMismatch: {0}")]
    ManifestGraphMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub node: usize,
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub graph: NetworkGraph,
    pub parameters: Vec<ParamEntry>,
    pub scaler: Scaler,
    pub target_scaler: Option<TargetScaler>,
    pub label_codec: Option<LabelCodec>,
    pub training: TrainingSummary,
    pub held_out: Option<HeldOutReport>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.display().to_string(), source }
}

fn layout(params: &ParamStore, graph: &NetworkGraph) -> Vec<ParamEntry> {
    (1..=graph.nodes.len())
        .flat_map(|id| params.node_params(id).iter().map(move |p| ParamEntry { node: id, name: p.name.clone(), shape: p.shape.clone() }))
        .collect()
}

pub fn manifest_of(artifact: &ModelArtifact) -> Manifest {
    Manifest {
        format_version: FORMAT_VERSION,
        task: artifact.task,
        feature_names: artifact.feature_names.clone(),
        graph: artifact.graph.clone(),
        parameters: layout(&artifact.params, &artifact.graph),
        scaler: artifact.scaler.clone(),
        target_scaler: artifact.target_scaler,
        label_codec: artifact.label_codec.clone(),
        training: artifact.training,
        held_out: artifact.held_out.clone(),
    }
}

pub fn encode_weights(params: &ParamStore) -> Vec<u8> {
    params.flat_values().iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn save_artifact(artifact: &ModelArtifact, dir: &Path) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = serde_json::to_string_pretty(&manifest_of(artifact))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, manifest + "\n").map_err(io_err(&mpath))?;
    let wpath = dir.join(WEIGHTS_FILE);
    fs::write(&wpath, encode_weights(&artifact.params)).map_err(io_err(&wpath))
}

pub fn load_artifact(dir: &Path) -> Result<ModelArtifact, ArtifactError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let wpath = dir.join(WEIGHTS_FILE);
    let blob = fs::read(&wpath).map_err(io_err(&wpath))?;
    from_parts(&text, &blob)
}

/// Validates a manifest and blob and assembles the artifact. The version is
/// checked before the rest of the manifest is interpreted, and the manifest
/// before the blob.
pub fn from_parts(manifest_json: &str, blob: &[u8]) -> Result<ModelArtifact, ArtifactError> {
    let raw: serde_json::Value = serde_json::from_str(manifest_json)?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(ArtifactError::UnknownVersion(v)),
        None => return Err(ArtifactError::ManifestGraphMismatch("format_version missing".into())),
    }
    let m: Manifest = serde_json::from_value(raw)?;
    let mismatch = |msg: String| ArtifactError::ManifestGraphMismatch(msg);

    let mut params = ParamStore::zeros(&m.graph).map_err(|e| mismatch(e.to_string()))?;
    let expected = layout(&params, &m.graph);
    if expected != m.parameters {
        let at = expected.iter().zip(&m.parameters).position(|(a, b)| a != b).unwrap_or(expected.len().min(m.parameters.len()));
        return Err(mismatch(format!("parameter entry {at} disagrees with the graph")));
    }
    let d = m.graph.input_dim;
    if m.scaler.means.len() != d || m.scaler.stds.len() != d || m.feature_names.len() != d {
        return Err(mismatch(format!("graph takes {d} inputs but scaler or feature names differ")));
    }
    let out: usize = m.graph.output_shape().map_err(|e| mismatch(e.to_string()))?.iter().product();
    match m.task {
        Task::Regression if out != 1 => return Err(mismatch(format!("regression graph has {out} outputs"))),
        Task::Classification if m.label_codec.as_ref().is_some_and(|c| c.labels.len() != out) => {
            return Err(mismatch(format!("label codec size differs from the {out} graph outputs")))
        }
        _ => {}
    }

    let expected_len = params.total_len() * 8;
    if blob.len() != expected_len {
        return Err(ArtifactError::CorruptBlob { expected: expected_len, found: blob.len() });
    }
    let values: Vec<f64> = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    params.set_flat_values(&values).map_err(|e| mismatch(e.to_string()))?;
    Ok(ModelArtifact {
        task: m.task,
        feature_names: m.feature_names,
        graph: m.graph,
        params,
        scaler: m.scaler,
        target_scaler: m.target_scaler,
        label_codec: m.label_codec,
        training: m.training,
        held_out: m.held_out,
    })
}
