//! Versioned JSON checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::m3s::M3sModel;
use crate::error::{M3sError, Result};

pub const CHECKPOINT_FORMAT: &str = "m3s-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config_hash: String,
    pub model: M3sModel,
}

impl Checkpoint {
    pub fn new(model: M3sModel) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            config_hash: model.config.hash(),
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| M3sError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(M3sError::Checkpoint(format!(
                "unsupported format `{}`, expected `{CHECKPOINT_FORMAT}`",
                ck.format
            )));
        }
        ck.model.validate()?;
        if ck.config_hash != ck.model.config.hash() {
            return Err(M3sError::Checkpoint(
                "config hash does not match the stored config".into(),
            ));
        }
        Ok(ck)
    }
}

pub fn save_checkpoint(model: &M3sModel, path: &Path) -> Result<()> {
    fs::write(path, Checkpoint::new(model.clone()).to_json()).map_err(|e| M3sError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<M3sModel> {
    let text = fs::read_to_string(path).map_err(|e| M3sError::io(path, e))?;
    Ok(Checkpoint::from_json(&text)?.model)
}
