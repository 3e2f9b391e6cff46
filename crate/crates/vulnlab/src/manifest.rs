//! Experiment manifests: one JSON file holding every pipeline setting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vulnlab_core::corpus::DEFAULT_CONTEXT_CHARS;
use vulnlab_core::datasets::{SplitSpec, WindowGeometry};
use vulnlab_core::embeddings::SkipgramConfig;
use vulnlab_core::eval::{EmbeddingKind, DEFAULT_THRESHOLD};
use vulnlab_core::lexer::LexerOptions;
use vulnlab_core::models::ClassifierConfig;
use vulnlab_core::VulnerabilityCategory;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// Line-delimited source units.
    #[default]
    Canonical,
    /// Nested repository → commit → file container.
    Upstream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub category: VulnerabilityCategory,
    pub corpus: PathBuf,
    #[serde(default)]
    pub format: CorpusFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingSpec {
    /// A skip-gram table trained by `train-embedding`.
    Skipgram {
        #[serde(default)]
        config: SkipgramConfig,
        /// Training text: `.py` files, directories searched for `.py`
        /// files, or canonical `.jsonl` corpora. Empty means the sources of
        /// the manifest's own corpora.
        #[serde(default)]
        corpus: Vec<PathBuf>,
    },
    /// A frozen pretrained encoder from the model cache.
    Contextual {
        model: String,
        /// Column the results are reported under.
        embedding: EmbeddingKind,
    },
}

/// One entry of the bundled default skip-gram corpus list.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CorpusRepository {
    pub name: String,
    pub url: String,
}

const DEFAULT_CORPUS_REPOS: &str = include_str!("../data/skipgram_corpus_repos.json");

/// Repositories whose Python source forms the default skip-gram corpus.
/// The pipeline never fetches them; clone them and list the checkouts
/// under `embedding.corpus`.
pub fn default_corpus_repositories() -> Vec<CorpusRepository> {
    #[derive(Deserialize)]
    struct File {
        repositories: Vec<CorpusRepository>,
    }
    serde_json::from_str::<File>(DEFAULT_CORPUS_REPOS).expect("bundled repository list is valid").repositories
}

impl EmbeddingSpec {
    pub fn kind(&self) -> EmbeddingKind {
        match self {
            EmbeddingSpec::Skipgram { .. } => EmbeddingKind::Word2vec,
            EmbeddingSpec::Contextual { embedding, .. } => *embedding,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_context() -> usize {
    DEFAULT_CONTEXT_CHARS
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// When set, replaces the skip-gram, split and classifier seeds.
    #[serde(default)]
    pub seed: Option<u64>,
    pub vulnerabilities: Vec<CorpusEntry>,
    /// Characters of context added around each changed region of a fix.
    #[serde(default = "default_context")]
    pub context_chars: usize,
    #[serde(default)]
    pub lexer: LexerOptions,
    pub embedding: EmbeddingSpec,
    #[serde(default)]
    pub windows: WindowGeometry,
    #[serde(default)]
    pub split: SplitSpec,
    /// Classifier settings; its input length and width are taken from
    /// `windows.length` and the embedding dimension.
    pub classifier: ClassifierConfig,
    /// Cap on windows per vulnerability, drawn with class ratios kept.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub model_cache: Option<PathBuf>,
    /// Store labels and raw scores in each report.
    #[serde(default)]
    pub keep_scores: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

/// Command-line settings that take precedence over the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
}

impl ExperimentManifest {
    /// Reads a manifest, resolves its relative paths against the manifest's
    /// directory and applies `overrides`.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        let mut manifest: ExperimentManifest = serde_json::from_str(&text).map_err(|e| manifest_parse_error(path, &e))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = base.canonicalize().at(base)?;
        manifest.resolve_paths(&base);
        manifest.apply(overrides);
        manifest.validate()?;
        Ok(manifest)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for v in &mut self.vulnerabilities {
            fix(&mut v.corpus);
        }
        if let EmbeddingSpec::Skipgram { corpus, .. } = &mut self.embedding {
            corpus.iter_mut().for_each(fix);
        }
        if let Some(c) = &mut self.model_cache {
            fix(c);
        }
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(out) = &overrides.output_dir {
            self.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(seed) = overrides.seed {
            self.seed = Some(seed);
        }
        if let Some(t) = overrides.threshold {
            self.threshold = t;
        }
        if let Some(seed) = self.seed {
            self.split.seed = seed;
            self.classifier.set_seed(seed);
            if let EmbeddingSpec::Skipgram { config, .. } = &mut self.embedding {
                config.seed = seed;
            }
        }
        let dim = match &self.embedding {
            EmbeddingSpec::Skipgram { config, .. } => Some(config.dim),
            // known only once the checkpoint is loaded
            EmbeddingSpec::Contextual { .. } => None,
        };
        let (_, current_dim) = self.classifier.input_shape();
        self.classifier.set_input_shape(self.windows.length, dim.unwrap_or(current_dim));
    }

    /// Checks every field, naming the offending one on failure.
    pub fn validate(&self) -> Result<()> {
        if self.vulnerabilities.is_empty() {
            return Err(Error::manifest("vulnerabilities", "at least one corpus is required"));
        }
        for (i, a) in self.vulnerabilities.iter().enumerate() {
            if self.vulnerabilities[..i].iter().any(|b| b.category == a.category) {
                return Err(Error::manifest("vulnerabilities", format!("category `{}` listed twice", a.category)));
            }
        }
        self.windows.validate().map_err(field("windows"))?;
        self.split.validate().map_err(field("split"))?;
        if let EmbeddingSpec::Skipgram { config, .. } = &self.embedding {
            config.validate().map_err(field("embedding.config"))?;
        }
        if let EmbeddingSpec::Contextual { model, embedding } = &self.embedding {
            if model.trim().is_empty() {
                return Err(Error::manifest("embedding.model", "must name a checkpoint"));
            }
            if *embedding == EmbeddingKind::Word2vec {
                return Err(Error::manifest("embedding.embedding", "contextual encoders report as codebert or graphcodebert"));
            }
        }
        self.classifier.validate().map_err(field("classifier"))?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::manifest("threshold", "must be in [0, 1]"));
        }
        if self.subsample == Some(0) {
            return Err(Error::manifest("subsample", "must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn field(name: &'static str) -> impl Fn(vulnlab_core::Error) -> Error {
    move |e| Error::manifest(name, e.to_string())
}

/// Names the field serde complained about when it can be recovered from
/// the message.
fn manifest_parse_error(path: &Path, e: &serde_json::Error) -> Error {
    let msg = e.to_string();
    let field = ["unknown field `", "missing field `", "unknown variant `"]
        .iter()
        .find_map(|marker| {
            let start = msg.find(marker)? + marker.len();
            let end = msg[start..].find('`')?;
            Some(msg[start..start + end].to_string())
        });
    match field {
        Some(f) => Error::manifest(f, format!("{msg} (in {})", path.display())),
        None => Error::format(path, msg),
    }
}
