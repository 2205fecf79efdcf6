use std::collections::HashMap;
use std::path::{Path, PathBuf};

use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};

use super::model::{build_model, Model, ModelSpec};
use super::optim::OptimizerSpec;
use crate::error::{Error, Result};

const SPEC_KEY: &str = "model_spec";

/// Sidecar written next to each checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: ModelSpec,
    pub optimizer: Option<OptimizerSpec>,
    pub seed: u64,
    pub epoch: Option<usize>,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(model: &Model, optimizer: Option<&OptimizerSpec>, epoch: Option<usize>) -> Self {
        Self {
            model: model.spec.clone(),
            optimizer: optimizer.cloned(),
            seed: model.spec.seed,
            epoch,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes all parameters and batch-norm statistics as f64 safetensors, with
/// the model spec in the header metadata, plus a JSON provenance sidecar.
pub fn save_checkpoint(model: &Model, path: &Path, provenance: &Provenance) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let state = model.network.state();
    let bytes: Vec<(String, Vec<u8>, usize)> = state
        .into_iter()
        .map(|(k, v)| {
            let n = v.len();
            (k, v.iter().flat_map(|x| x.to_le_bytes()).collect(), n)
        })
        .collect();
    let views = bytes
        .iter()
        .map(|(k, b, n)| {
            safetensors::tensor::TensorView::new(Dtype::F64, vec![*n], b)
                .map(|v| (k.clone(), v))
                .map_err(|e| Error::Checkpoint(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = HashMap::from([(SPEC_KEY.to_string(), serde_json::to_string(&model.spec)?)]);
    safetensors::serialize_to_file(views, Some(meta), path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(provenance)?)?;
    Ok(())
}

/// Rebuilds the model described in the checkpoint header and restores its
/// tensors.
pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let buf = std::fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let (_, meta) = SafeTensors::read_metadata(&buf).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let spec_json = meta
        .metadata()
        .as_ref()
        .and_then(|m| m.get(SPEC_KEY))
        .ok_or_else(|| Error::Checkpoint(format!("{} has no model spec", path.display())))?;
    let spec: ModelSpec = serde_json::from_str(spec_json)?;
    let tensors = SafeTensors::deserialize(&buf).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut state = Vec::new();
    for (name, view) in tensors.tensors() {
        if view.dtype() != Dtype::F64 {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` is {:?}, expected F64",
                view.dtype()
            )));
        }
        let values = view
            .data()
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        state.push((name, values));
    }
    let mut model = build_model(&spec)?;
    model.network.load_state(&state)?;
    Ok(model)
}

pub fn load_provenance(path: &Path) -> Result<Provenance> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}
