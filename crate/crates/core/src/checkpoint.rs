//! Model checkpoint files.
//!
//! A checkpoint is a JSON document holding a version tag, the model
//! configuration, the flat parameter vector and, after calibration, the
//! detection thresholds. Floats are written in shortest round-trip form and
//! parsed exactly, so saving and loading reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{ClstmParams, ModelConfig};

pub const CHECKPOINT_VERSION: &str = "clad-checkpoint/1";

/// Detection thresholds fitted on labeled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tau: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: String,
    pub config: ModelConfig,
    pub epoch: usize,
    pub params: Vec<f64>,
    #[serde(default)]
    pub calibration: Option<Calibration>,
}

impl ModelCheckpoint {
    pub fn new(config: &ModelConfig, params: &ClstmParams, epoch: usize) -> Self {
        ModelCheckpoint {
            version: CHECKPOINT_VERSION.to_string(),
            config: config.clone(),
            epoch,
            params: params.flatten(),
            calibration: None,
        }
    }

    pub fn params(&self) -> Result<ClstmParams> {
        let c = &self.config;
        ClstmParams::from_flat(c.d1, c.d2, c.h1, c.h2, c.coupling, &self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Invariant(format!("serialising checkpoint: {e}")))
    }

    /// Parses a checkpoint, checking the version tag before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Malformed {
            what: "checkpoint",
            detail: e.to_string(),
        })?;
        match value.get("version").and_then(|v| v.as_str()) {
            Some(CHECKPOINT_VERSION) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.to_string(),
                    expected: CHECKPOINT_VERSION.to_string(),
                })
            }
            None => {
                return Err(Error::Malformed {
                    what: "checkpoint",
                    detail: "missing version tag".into(),
                })
            }
        }
        let ckpt: ModelCheckpoint = serde_json::from_value(value).map_err(|e| Error::Malformed {
            what: "checkpoint",
            detail: e.to_string(),
        })?;
        ckpt.config.validate()?;
        ckpt.params()?;
        Ok(ckpt)
    }
}

pub fn save(path: &Path, ckpt: &ModelCheckpoint) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(ckpt.to_json()?.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelCheckpoint> {
    ModelCheckpoint::from_json(&fs::read_to_string(path)?)
}
