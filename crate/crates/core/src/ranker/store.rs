//! Model files: JSON holding the configuration and every tensor. Floats are
//! written in shortest round-trip form, so a reload is bit-identical.

use super::config::ScorerConfig;
use super::network::{ModelError, RankerModel, Tensor};
use crate::io::write_atomic;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT: &str = "restartlab-ranker";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Siamese,
    Regression,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub config: ScorerConfig,
    pub tensors: Vec<Tensor>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a ranker model file (format {0:?})")]
    Format(String),
    #[error("unsupported model file version {0}")]
    Version(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn save_model(path: &Path, model: &RankerModel, kind: ModelKind) -> Result<(), StoreError> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        kind,
        config: model.config().clone(),
        tensors: model.tensors().to_vec(),
    };
    write_atomic(path, &serde_json::to_vec(&file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(RankerModel, ModelKind), StoreError> {
    let file: ModelFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.format != MODEL_FORMAT {
        return Err(StoreError::Format(file.format));
    }
    if file.version != MODEL_VERSION {
        return Err(StoreError::Version(file.version));
    }
    let model = RankerModel::from_tensors(file.config, file.tensors)?;
    Ok((model, file.kind))
}
