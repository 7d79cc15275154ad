//! Model files: JSON with base64-encoded little-endian `f64` parameters.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::any::AnyModel;
use crate::error::{Error, Result};
use crate::flow::{FlowMap, ModelKind};
use crate::mlp::MlpFlowModel;
use crate::model::SympFlowModel;

pub const MAGIC: &str = "sympflow-ckpt-v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    magic: String,
    kind: String,
    d: usize,
    #[serde(rename = "L")]
    layers: usize,
    h: usize,
    seed: u64,
    params: String,
}

/// A loaded model and the seed recorded with it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: AnyModel,
    pub seed: u64,
}

fn encode(params: &[f64]) -> String {
    let bytes: Vec<u8> = params.iter().flat_map(|p| p.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(s: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Format(format!("parameter payload is not base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("parameter payload has {} bytes, not a multiple of 8", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn to_json(model: &AnyModel, seed: u64) -> Result<String> {
    let raw = Raw {
        magic: MAGIC.into(),
        kind: model.kind().as_str().into(),
        d: model.half_dim(),
        layers: model.layers(),
        h: model.hidden(),
        seed,
        params: encode(model.params()),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

pub fn from_json(text: &str) -> Result<Checkpoint> {
    let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Format(format!("not a checkpoint: {e}")))?;
    if raw.magic != MAGIC {
        return Err(Error::Format(format!("bad magic `{}`", raw.magic)));
    }
    let kind: ModelKind = raw
        .kind
        .parse()
        .map_err(|_| Error::Format(format!("unknown model kind `{}`", raw.kind)))?;
    let params = decode(&raw.params)?;
    let model = match kind {
        ModelKind::SympFlow => AnyModel::SympFlow(SympFlowModel::from_params(raw.d, raw.h, raw.layers, params)?),
        ModelKind::Mlp => {
            if raw.h != crate::mlp::MLP_HIDDEN {
                return Err(Error::Format(format!("MLP hidden width must be {}", crate::mlp::MLP_HIDDEN)));
            }
            AnyModel::Mlp(MlpFlowModel::from_params(raw.d, raw.layers, params)?)
        }
    };
    Ok(Checkpoint { model, seed: raw.seed })
}

pub fn save_checkpoint(model: &AnyModel, seed: u64, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model, seed)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    from_json(&std::fs::read_to_string(path)?)
}

fn mismatch(expected: ModelKind, found: ModelKind) -> Error {
    Error::KindMismatch {
        expected: expected.as_str().into(),
        found: found.as_str().into(),
    }
}

pub fn load_sympflow(path: &Path) -> Result<SympFlowModel> {
    match load_checkpoint(path)?.model {
        AnyModel::SympFlow(m) => Ok(m),
        other => Err(mismatch(ModelKind::SympFlow, other.kind())),
    }
}

pub fn load_mlp(path: &Path) -> Result<MlpFlowModel> {
    match load_checkpoint(path)?.model {
        AnyModel::Mlp(m) => Ok(m),
        other => Err(mismatch(ModelKind::Mlp, other.kind())),
    }
}
