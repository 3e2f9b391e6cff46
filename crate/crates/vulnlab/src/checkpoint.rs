//! Loading frozen RoBERTa-family checkpoints from a local model cache.
//!
//! A checkpoint directory holds the usual Hugging Face files:
//! `config.json`, `vocab.json`, `merges.txt` and `model.safetensors`
//! (float32 tensors).

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use safetensors::{Dtype, SafeTensors};
use vulnlab_core::embeddings::{BpeTokenizer, EncoderConfig, EncoderHandle, RobertaEncoder, TensorSource};

use crate::error::{Error, IoContext, Result};

pub const CACHE_ENV: &str = "VULNLAB_MODEL_CACHE";
const REQUIRED: [&str; 4] = ["config.json", "vocab.json", "merges.txt", "model.safetensors"];

/// Finds the directory of checkpoint `identifier`.
///
/// The cache directory comes from `VULNLAB_MODEL_CACHE` when set, else from
/// `cache`. `identifier` may be a name under the cache (`microsoft/codebert-base`
/// maps to `<cache>/microsoft/codebert-base`) or a path to a checkpoint
/// directory.
pub fn resolve(identifier: &str, cache: Option<&Path>) -> Result<PathBuf> {
    let env_cache = env::var_os(CACHE_ENV).map(PathBuf::from);
    let cache = env_cache.as_deref().or(cache);
    let mut candidates = Vec::new();
    if let Some(cache) = cache {
        candidates.push(cache.join(identifier));
        // hub-style flattened names
        candidates.push(cache.join(identifier.replace('/', "--")));
    }
    candidates.push(PathBuf::from(identifier));
    for dir in &candidates {
        if dir.join("config.json").is_file() {
            return Ok(dir.clone());
        }
    }
    Err(Error::Missing {
        path: candidates[0].clone(),
        hint: format!(
            "checkpoint `{identifier}` not found; set {CACHE_ENV} or `model_cache` to a directory containing it"
        ),
    })
}

struct SafetensorsSource<'a> {
    path: &'a Path,
    tensors: SafeTensors<'a>,
    error: Option<Error>,
}

impl TensorSource for SafetensorsSource<'_> {
    fn tensor(&mut self, name: &str) -> Option<(Vec<usize>, Vec<f32>)> {
        let view = self.tensors.tensor(name).ok()?;
        if view.dtype() != Dtype::F32 {
            self.error.get_or_insert_with(|| {
                Error::format(self.path, format!("tensor `{name}` is {:?}; only F32 checkpoints are supported", view.dtype()))
            });
            return None;
        }
        let values = view.data().chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Some((view.shape().to_vec(), values))
    }
}

/// Loads the checkpoint in `dir` as an encoder handle named `identifier`.
pub fn load_dir(identifier: &str, dir: &Path) -> Result<EncoderHandle> {
    for name in REQUIRED {
        let p = dir.join(name);
        if !p.is_file() {
            return Err(Error::Missing { path: p, hint: format!("checkpoint `{identifier}` is incomplete") });
        }
    }
    let config_path = dir.join("config.json");
    let config: EncoderConfig = serde_json::from_str(&fs::read_to_string(&config_path).at(&config_path)?)
        .map_err(|e| Error::format(&config_path, e.to_string()))?;

    let vocab_path = dir.join("vocab.json");
    let vocab: BTreeMap<String, u32> = serde_json::from_str(&fs::read_to_string(&vocab_path).at(&vocab_path)?)
        .map_err(|e| Error::format(&vocab_path, e.to_string()))?;
    let merges_path = dir.join("merges.txt");
    let merges = fs::read_to_string(&merges_path).at(&merges_path)?;
    let tokenizer = BpeTokenizer::new(vocab, &merges, "<unk>")?;

    let weights_path = dir.join("model.safetensors");
    let bytes = fs::read(&weights_path).at(&weights_path)?;
    let tensors = SafeTensors::deserialize(&bytes).map_err(|e| Error::format(&weights_path, e.to_string()))?;
    let mut source = SafetensorsSource { path: &weights_path, tensors, error: None };
    let encoder = RobertaEncoder::load(config, &mut source);
    if let Some(e) = source.error {
        return Err(e);
    }
    Ok(EncoderHandle::new(identifier, tokenizer, encoder?))
}

/// Resolves and loads checkpoint `identifier`.
pub fn load(identifier: &str, cache: Option<&Path>) -> Result<EncoderHandle> {
    let dir = resolve(identifier, cache)?;
    log::info!("loading encoder `{identifier}` from {}", dir.display());
    load_dir(identifier, &dir)
}
