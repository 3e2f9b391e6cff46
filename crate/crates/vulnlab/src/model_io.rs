//! Trained-model directories: `params.bin` (parameter blob), `config.json`
//! (architecture, hyperparameters and the fingerprints tying the model to
//! its embedding) and `history.json` (per-epoch training log).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vulnlab_core::datasets::{ClassWeights, WindowGeometry};
use vulnlab_core::embeddings::BackendKind;
use vulnlab_core::eval::EmbeddingKind;
use vulnlab_core::lexer::LexerOptions;
use vulnlab_core::models::{Architecture, ClassifierConfig, TrainedClassifier, TrainingHistory};
use vulnlab_core::VulnerabilityCategory;

use crate::error::{Error, IoContext, Result};

pub const PARAMS_FILE: &str = "params.bin";
pub const CONFIG_FILE: &str = "config.json";
pub const HISTORY_FILE: &str = "history.json";
pub const FORMAT_VERSION: u32 = 1;

/// How to rebuild the embedding a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDescriptor {
    pub kind: EmbeddingKind,
    pub backend: BackendKind,
    pub dim: usize,
    pub fingerprint: String,
    /// Skip-gram artifact file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<PathBuf>,
    /// Encoder checkpoint identifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub format_version: u32,
    pub vulnerability: VulnerabilityCategory,
    pub architecture: Architecture,
    pub classifier: ClassifierConfig,
    pub config_fingerprint: String,
    pub param_count: usize,
    pub embedding: EmbeddingDescriptor,
    pub windows: WindowGeometry,
    pub lexer: LexerOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<ClassWeights>,
}

pub fn save(dir: &Path, model: &TrainedClassifier, descriptor: &ModelDescriptor, history: &TrainingHistory) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let write = |name: &str, bytes: Vec<u8>| {
        let p = dir.join(name);
        fs::write(&p, bytes).at(&p)
    };
    write(PARAMS_FILE, model.to_blob())?;
    write(CONFIG_FILE, pretty(descriptor))?;
    write(HISTORY_FILE, pretty(history))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

pub fn read_descriptor(dir: &Path) -> Result<ModelDescriptor> {
    let path = dir.join(CONFIG_FILE);
    if !path.is_file() {
        return Err(Error::Missing { path, hint: "not a model directory (run `vulnlab train` first)".into() });
    }
    let text = fs::read_to_string(&path).at(&path)?;
    let d: ModelDescriptor = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if d.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("format version mismatch: expected {FORMAT_VERSION}, found {}", d.format_version),
        ));
    }
    Ok(d)
}

/// Loads a model directory. When `embedding_fingerprint` is given, a model
/// trained on any other embedding is refused.
pub fn load(dir: &Path, embedding_fingerprint: Option<&str>) -> Result<(TrainedClassifier, ModelDescriptor)> {
    let d = read_descriptor(dir)?;
    if let Some(expected) = embedding_fingerprint {
        if d.embedding.fingerprint != expected {
            return Err(Error::Fingerprint {
                what: format!("embedding of model {}", dir.display()),
                expected: expected.into(),
                found: d.embedding.fingerprint.clone(),
            });
        }
    }
    let found = d.classifier.fingerprint();
    if found != d.config_fingerprint {
        return Err(Error::Fingerprint {
            what: format!("classifier config in {}", dir.join(CONFIG_FILE).display()),
            expected: d.config_fingerprint.clone(),
            found,
        });
    }
    let params = dir.join(PARAMS_FILE);
    let blob = fs::read(&params).at(&params)?;
    let model = TrainedClassifier::from_blob(d.classifier.clone(), &d.embedding.fingerprint, &blob)
        .map_err(|e| Error::format(&params, e.to_string()))?;
    Ok((model, d))
}

pub fn load_history(dir: &Path) -> Result<TrainingHistory> {
    let path = dir.join(HISTORY_FILE);
    let text = fs::read_to_string(&path).at(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}
