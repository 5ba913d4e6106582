use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, NeuralScorerParams};
use super::NeuralScorer;
use crate::scoring::tokenize::{Vocab, SPECIAL_TOKENS};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "figsum-cross-encoder";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    config: ModelConfig,
    vocab: Vocab,
    tensors: Vec<NamedTensor>,
    checksum: String,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    values: Vec<f64>,
}

pub fn save_model(model: &NeuralScorer, path: &Path) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        config: model.params.config,
        vocab: model.vocab.clone(),
        tensors: model
            .params
            .tensors()
            .into_iter()
            .map(|(name, _, values)| NamedTensor {
                name,
                values: values.to_vec(),
            })
            .collect(),
        checksum: model.params.checksum(None),
    };
    let json = serde_json::to_string(&file).map_err(|e| Error::ModelFormat(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Reads a model written by [`save_model`]. The tensor checksum must match,
/// so a loaded model scores bit-identically to the saved one.
pub fn load_model(path: &Path) -> Result<NeuralScorer> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&raw).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "unexpected format {:?}",
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {}",
            file.version
        )));
    }
    file.config.check()?;
    if file.vocab.len() != file.config.vocab_size {
        return Err(Error::ModelFormat(format!(
            "vocabulary has {} entries, config says {}",
            file.vocab.len(),
            file.config.vocab_size
        )));
    }
    for (id, special) in SPECIAL_TOKENS.iter().enumerate() {
        if file.vocab.token(id as u32) != *special {
            return Err(Error::ModelFormat(format!("token {id} must be {special}")));
        }
    }

    let mut params = NeuralScorerParams::init(file.config, &mut ChaCha8Rng::seed_from_u64(0))?;
    {
        let mut slots = params.tensors_mut();
        if slots.len() != file.tensors.len() {
            return Err(Error::ModelFormat(format!(
                "expected {} tensors, found {}",
                slots.len(),
                file.tensors.len()
            )));
        }
        for ((name, _, slot), stored) in slots.iter_mut().zip(&file.tensors) {
            if *name != stored.name || slot.len() != stored.values.len() {
                return Err(Error::ModelFormat(format!(
                    "tensor {:?} does not match {name}",
                    stored.name
                )));
            }
            slot.copy_from_slice(&stored.values);
        }
    }
    if params.checksum(None) != file.checksum {
        return Err(Error::ModelFormat("checksum mismatch".into()));
    }
    Ok(NeuralScorer {
        vocab: file.vocab,
        params,
    })
}
