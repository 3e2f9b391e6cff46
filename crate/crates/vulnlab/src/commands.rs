//! The pipeline commands. Each reads the artifacts of the previous stage
//! from the manifest's output directory:
//!
//! ```text
//! train-embedding  -> embedding/skipgram.bin
//! prepare          -> <vulnerability>/dataset/{train,val,test}.vlds, summary.json
//! train            -> <vulnerability>/model/{params.bin,config.json,history.json}
//! evaluate         -> <vulnerability>/eval/{report.json,roc.svg,roc.csv}
//!                     comparison/comparison.{csv,json,md}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use vulnlab_core::corpus::{SourceUnit, Span};
use vulnlab_core::datasets::{self, build_windows, class_weights, vectorize, VectorizedWindow, Window};
use vulnlab_core::embeddings::{train_skipgram, BackendKind, EmbeddingBackend, EncoderHandle, SkipgramModel};
use vulnlab_core::eval::{self, compare, EvaluationReport, ReportKey, ScoreCard};
use vulnlab_core::lexer::{lex_source, lex_unit, LexedUnit};
use vulnlab_core::models::{self, ClassifierConfig, TrainedClassifier, TrainingHistory};
use vulnlab_core::tensor::Matrix;
use vulnlab_core::VulnerabilityCategory;

use crate::artifacts::{self, Layout};
use crate::error::{Error, IoContext, Result};
use crate::manifest::{CorpusEntry, CorpusFormat, EmbeddingSpec, ExperimentManifest};
use crate::model_io::{self, EmbeddingDescriptor, ModelDescriptor};
use crate::render::{self, Format};
use crate::{checkpoint, corpus_io, dataset_io, skipgram_io};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Leave wall-clock fields out of reports so reruns are byte-identical.
    pub reproducible: bool,
}

/// An embedding ready for vectorization.
pub enum LoadedEmbedding {
    Skipgram { model: SkipgramModel, path: PathBuf },
    Contextual { handle: Box<EncoderHandle>, cache: Option<PathBuf> },
}

impl LoadedEmbedding {
    pub fn backend(&self) -> &dyn EmbeddingBackend {
        match self {
            LoadedEmbedding::Skipgram { model, .. } => model,
            LoadedEmbedding::Contextual { handle, .. } => handle.as_ref(),
        }
    }

    pub fn descriptor(&self, kind: eval::EmbeddingKind) -> EmbeddingDescriptor {
        let b = self.backend();
        let (artifact, model, model_cache) = match self {
            LoadedEmbedding::Skipgram { path, .. } => (Some(path.clone()), None, None),
            LoadedEmbedding::Contextual { handle, cache } => (None, Some(handle.identifier.clone()), cache.clone()),
        };
        EmbeddingDescriptor { kind, backend: b.kind(), dim: b.dim(), fingerprint: b.fingerprint(), artifact, model, model_cache }
    }

    /// Rebuilds the embedding a model directory was trained on.
    pub fn from_descriptor(d: &EmbeddingDescriptor) -> Result<Self> {
        let loaded = match d.backend {
            BackendKind::Skipgram => {
                let path = d.artifact.clone().ok_or_else(|| Error::manifest("embedding.artifact", "missing"))?;
                LoadedEmbedding::Skipgram { model: skipgram_io::load(&path)?, path }
            }
            BackendKind::Contextual => {
                let id = d.model.as_deref().ok_or_else(|| Error::manifest("embedding.model", "missing"))?;
                let handle = checkpoint::load(id, d.model_cache.as_deref())?;
                LoadedEmbedding::Contextual { handle: Box::new(handle), cache: d.model_cache.clone() }
            }
        };
        let found = loaded.backend().fingerprint();
        if found != d.fingerprint {
            return Err(Error::Fingerprint { what: "embedding".into(), expected: d.fingerprint.clone(), found });
        }
        Ok(loaded)
    }
}

/// Loads the manifest's embedding: the trained skip-gram artifact or the
/// encoder checkpoint.
pub fn load_embedding(m: &ExperimentManifest) -> Result<LoadedEmbedding> {
    match &m.embedding {
        EmbeddingSpec::Skipgram { config, .. } => {
            let path = Layout::new(&m.output_dir).skipgram_file();
            if !path.is_file() {
                return Err(Error::Missing { path, hint: "skip-gram artifact not found; run `vulnlab train-embedding` first".into() });
            }
            let model = skipgram_io::load(&path)?;
            if model.config() != config {
                return Err(Error::manifest(
                    "embedding.config",
                    format!("{} was trained with different settings; rerun `vulnlab train-embedding`", path.display()),
                ));
            }
            Ok(LoadedEmbedding::Skipgram { model, path })
        }
        EmbeddingSpec::Contextual { model, .. } => {
            let handle = checkpoint::load(model, m.model_cache.as_deref())?;
            Ok(LoadedEmbedding::Contextual { handle: Box::new(handle), cache: m.model_cache.clone() })
        }
    }
}

pub fn load_entry(entry: &CorpusEntry, context_chars: usize) -> Result<Vec<SourceUnit>> {
    match entry.format {
        CorpusFormat::Canonical => corpus_io::load_corpus(&entry.corpus, entry.category),
        CorpusFormat::Upstream => {
            let (units, s) = corpus_io::import_upstream(&entry.corpus, entry.category, context_chars)?;
            log::info!(
                "{}: imported {} of {} file records ({} skipped)",
                entry.corpus.display(),
                s.emitted,
                s.read,
                s.skipped
            );
            Ok(units)
        }
    }
}

/// Text the skip-gram model is trained on, as `(id, source)` pairs in a
/// stable order.
fn skipgram_sources(m: &ExperimentManifest, paths: &[PathBuf]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if paths.is_empty() {
        for entry in &m.vulnerabilities {
            out.extend(load_entry(entry, m.context_chars)?.into_iter().map(|u| (u.id, u.source)));
        }
        return Ok(out);
    }
    for path in paths {
        if path.is_dir() {
            let walker = walkdir::WalkDir::new(path).sort_by_file_name();
            for entry in walker {
                let entry = entry.map_err(|e| Error::format(path, e.to_string()))?;
                if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "py") {
                    let text = fs::read(entry.path()).at(entry.path())?;
                    out.push((entry.path().display().to_string(), String::from_utf8_lossy(&text).into_owned()));
                }
            }
        } else if path.extension().is_some_and(|x| x == "jsonl") {
            out.extend(corpus_io::load_all(path)?.into_iter().map(|u| (u.id, u.source)));
        } else {
            let text = fs::read(path).at(path)?;
            out.push((path.display().to_string(), String::from_utf8_lossy(&text).into_owned()));
        }
    }
    Ok(out)
}

pub fn cmd_train_embedding(m: &ExperimentManifest, _opts: &RunOptions) -> Result<PathBuf> {
    let EmbeddingSpec::Skipgram { config, corpus } = &m.embedding else {
        return Err(Error::manifest("embedding.kind", "train-embedding applies to skipgram embeddings only"));
    };
    let sources = skipgram_sources(m, corpus)?;
    let streams: Vec<_> = sources.iter().map(|(id, src)| lex_source(id, src, &[], &m.lexer).stream).collect();
    let tokens: usize = streams.iter().map(|s| s.len()).sum();
    log::info!("training skip-gram on {} files, {tokens} tokens", streams.len());
    let model = train_skipgram(&streams, config)?;
    log::info!("skip-gram vocabulary: {} tokens, dim {}", model.vocab().len(), model.dim());
    let layout = Layout::new(&m.output_dir);
    let dir = layout.embedding_dir();
    artifacts::create_dir(&dir)?;
    let path = layout.skipgram_file();
    skipgram_io::save(&path, &model)?;
    artifacts::seal(&dir, m)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSummary {
    pub windows: usize,
    pub positives: usize,
}

/// Counts recorded by `prepare` for one vulnerability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub vulnerability: VulnerabilityCategory,
    pub embedding: eval::EmbeddingKind,
    pub embedding_fingerprint: String,
    pub units: usize,
    pub tokens: usize,
    /// Windows before subsampling.
    pub windows_available: usize,
    pub windows: usize,
    pub positives: usize,
    pub positive_rate: f64,
    pub train: PartSummary,
    pub val: PartSummary,
    pub test: PartSummary,
    /// Window tokens without a skip-gram vector.
    pub oov_tokens: usize,
    pub oov_rate: f64,
    /// Subwords dropped to fit the encoder's position cap or the window length.
    pub truncated: usize,
    pub all_zero_windows: usize,
}

fn part(windows: &[VectorizedWindow]) -> PartSummary {
    PartSummary { windows: windows.len(), positives: windows.iter().filter(|w| w.window.label == 1).count() }
}

/// Lexes, windows and vectorizes one vulnerability's corpus.
pub fn build_dataset(
    m: &ExperimentManifest,
    units: &[SourceUnit],
    embedding: &LoadedEmbedding,
) -> Result<(Vec<VectorizedWindow>, usize, usize)> {
    let lexed: Vec<LexedUnit> = units.iter().map(|u| lex_unit(u, &m.lexer)).collect();
    let tokens = lexed.iter().map(|l| l.stream.len()).sum();
    let mut all: Vec<(Window, usize)> = Vec::new();
    for (i, l) in lexed.iter().enumerate() {
        all.extend(build_windows(&l.stream, &l.spans, &m.windows)?.into_iter().map(|w| (w, i)));
    }
    let available = all.len();
    if let Some(cap) = m.subsample {
        let labeled: Vec<((Window, usize), u8)> = all.into_iter().map(|p| {
            let l = p.0.label;
            (p, l)
        }).collect();
        all = datasets::subsample(labeled, cap, m.split.seed)?.into_iter().map(|(p, _)| p).collect();
    }
    let mut by_unit: BTreeMap<usize, Vec<Window>> = BTreeMap::new();
    for (w, i) in all {
        by_unit.entry(i).or_default().push(w);
    }
    let mut out = Vec::new();
    for (i, windows) in by_unit {
        out.extend(vectorize(&windows, &lexed[i], embedding.backend(), m.windows.length)?);
    }
    Ok((out, available, tokens))
}

pub fn cmd_prepare(m: &ExperimentManifest, _opts: &RunOptions) -> Result<Vec<DatasetSummary>> {
    // corpora first: bad records are reported before any expensive loading
    let mut corpora = Vec::new();
    for entry in &m.vulnerabilities {
        let units = load_entry(entry, m.context_chars)?;
        if units.is_empty() {
            return Err(Error::manifest(
                "vulnerabilities",
                format!("corpus {} has no `{}` records", entry.corpus.display(), entry.category),
            ));
        }
        corpora.push((entry.category, units));
    }
    let embedding = load_embedding(m)?;
    let fingerprint = embedding.backend().fingerprint();
    let layout = Layout::new(&m.output_dir);
    let mut summaries = Vec::new();
    for (v, units) in corpora {
        let (windows, available, tokens) = build_dataset(m, &units, &embedding)?;
        let positives = windows.iter().filter(|w| w.window.label == 1).count();
        let oov_tokens: usize = windows.iter().map(|w| w.oov).sum();
        let window_tokens: usize = windows.iter().map(|w| w.window.token_range.1 - w.window.token_range.0).sum();
        let truncated = windows.iter().map(|w| w.truncated).sum();
        let all_zero_windows = windows.iter().filter(|w| w.is_all_zero()).count();
        let total = windows.len();
        let split = datasets::split(windows, &m.split).map_err(|e| match e {
            vulnlab_core::Error::MissingClass(c) => {
                Error::manifest("split", format!("`{v}` windows contain no label-{c} samples; stratified split impossible"))
            }
            other => other.into(),
        })?;
        let summary = DatasetSummary {
            vulnerability: v,
            embedding: m.embedding.kind(),
            embedding_fingerprint: fingerprint.clone(),
            units: units.len(),
            tokens,
            windows_available: available,
            windows: total,
            positives,
            positive_rate: if total > 0 { positives as f64 / total as f64 } else { 0.0 },
            train: part(&split.train),
            val: part(&split.val),
            test: part(&split.test),
            oov_tokens,
            oov_rate: if window_tokens > 0 { oov_tokens as f64 / window_tokens as f64 } else { 0.0 },
            truncated,
            all_zero_windows,
        };
        log::info!(
            "{v}: {} windows ({} positive) -> train {} / val {} / test {}",
            total,
            positives,
            summary.train.windows,
            summary.val.windows,
            summary.test.windows
        );
        let dir = layout.dataset_dir(v);
        artifacts::create_dir(&dir)?;
        let dim = embedding.backend().dim();
        for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
            dataset_io::save(&layout.split_file(v, name), m.windows.length, dim, &fingerprint, part)?;
        }
        artifacts::write(&dir.join("summary.json"), pretty(&summary))?;
        artifacts::seal(&dir, m)?;
        summaries.push(summary);
    }
    Ok(summaries)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_split(layout: &Layout, v: VulnerabilityCategory, name: &str, fingerprint: &str) -> Result<Vec<VectorizedWindow>> {
    let path = layout.split_file(v, name);
    if !path.is_file() {
        return Err(Error::Missing { path, hint: "dataset cache not found; run `vulnlab prepare` first".into() });
    }
    Ok(dataset_io::load(&path, Some(fingerprint))?.windows)
}

/// The manifest's classifier sized for `embedding`.
pub fn classifier_config(m: &ExperimentManifest, embedding: &LoadedEmbedding) -> Result<ClassifierConfig> {
    let mut config = m.classifier.clone();
    config.set_input_shape(m.windows.length, embedding.backend().dim());
    config.validate().map_err(|e| Error::manifest("classifier", e.to_string()))?;
    Ok(config)
}

pub fn cmd_train(m: &ExperimentManifest, _opts: &RunOptions) -> Result<Vec<TrainingHistory>> {
    let embedding = load_embedding(m)?;
    let fingerprint = embedding.backend().fingerprint();
    let config = classifier_config(m, &embedding)?;
    let layout = Layout::new(&m.output_dir);
    let mut histories = Vec::new();
    for entry in &m.vulnerabilities {
        let v = entry.category;
        let train = load_split(&layout, v, "train", &fingerprint)?;
        let val = load_split(&layout, v, "val", &fingerprint)?;
        let weights = match &config {
            ClassifierConfig::Cnn(_) => Some(class_weights(&train)?),
            ClassifierConfig::Bilstm(c) if c.class_weighted => Some(class_weights(&train)?),
            ClassifierConfig::Bilstm(_) => None,
        };
        let mut model = models::build(config.clone())?;
        model.set_embedding_fingerprint(fingerprint.clone());
        log::info!(
            "{v}: training {} ({} parameters) on {} windows, validating on {}",
            model.architecture().title(),
            model.param_count(),
            train.len(),
            val.len()
        );
        let (model, history) = models::train(model, &train, &val, weights.as_ref())?;
        log::info!(
            "{v}: stopped after epoch {}, best epoch {}{}",
            history.stopped_epoch,
            history.best_epoch,
            if history.early_stopped { " (early stop)" } else { "" }
        );
        let descriptor = ModelDescriptor {
            format_version: model_io::FORMAT_VERSION,
            vulnerability: v,
            architecture: model.architecture(),
            classifier: config.clone(),
            config_fingerprint: model.config_fingerprint(),
            param_count: model.param_count(),
            embedding: embedding.descriptor(m.embedding.kind()),
            windows: m.windows,
            lexer: m.lexer,
            class_weights: weights,
        };
        let dir = layout.model_dir(v);
        model_io::save(&dir, &model, &descriptor, &history)?;
        artifacts::seal(&dir, m)?;
        histories.push(history);
    }
    Ok(histories)
}

/// Scores windows in batches.
pub fn score(model: &TrainedClassifier, windows: &[VectorizedWindow]) -> Result<Vec<f64>> {
    let mats: Vec<&Matrix> = windows.iter().map(|w| &w.matrix).collect();
    Ok(model.predict_batch(&mats)?.into_iter().map(f64::from).collect())
}

/// Report for `model` on `windows`.
pub fn evaluate_windows(
    model: &TrainedClassifier,
    windows: &[VectorizedWindow],
    key: ReportKey,
    threshold: f64,
    keep_scores: bool,
) -> Result<EvaluationReport> {
    if windows.is_empty() {
        return Err(vulnlab_core::Error::Empty("test split").into());
    }
    let scores = score(model, windows)?;
    let labels: Vec<u8> = windows.iter().map(|w| w.window.label).collect();
    Ok(eval::evaluate_scores(key, &labels, &scores, threshold, keep_scores)?)
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn cmd_evaluate(m: &ExperimentManifest, opts: &RunOptions) -> Result<Vec<EvaluationReport>> {
    let embedding = load_embedding(m)?;
    let fingerprint = embedding.backend().fingerprint();
    let layout = Layout::new(&m.output_dir);
    let mut reports = Vec::new();
    for entry in &m.vulnerabilities {
        let v = entry.category;
        let started = Instant::now();
        let (model, descriptor) = model_io::load(&layout.model_dir(v), Some(&fingerprint))?;
        let test = load_split(&layout, v, "test", &fingerprint)?;
        let key = ReportKey { vulnerability: v, embedding: descriptor.embedding.kind, classifier: model.architecture() };
        let mut report = evaluate_windows(&model, &test, key, m.threshold, m.keep_scores)?;
        if !opts.reproducible {
            report.generated_at = Some(timestamp());
            report.elapsed_seconds = Some(started.elapsed().as_secs_f64());
        }
        log::info!(
            "{v}: precision {:.3} recall {:.3} F1 {:.3} accuracy {:.3} AUC {:.3}",
            report.precision,
            report.recall,
            report.f_score,
            report.accuracy,
            report.auc
        );
        let dir = layout.eval_dir(v);
        artifacts::create_dir(&dir)?;
        artifacts::write(&dir.join("report.json"), pretty(&report))?;
        artifacts::write(&dir.join("roc.svg"), render::roc_svg(&report))?;
        artifacts::write(&dir.join("roc.csv"), render::roc_csv(&report.roc))?;
        artifacts::seal(&dir, m)?;
        reports.push(report);
    }
    let cards: Vec<ScoreCard> = reports.iter().map(ScoreCard::from).collect();
    let matrix = compare(&cards)?;
    let dir = layout.comparison_dir();
    artifacts::create_dir(&dir)?;
    for format in [Format::Csv, Format::Json, Format::Markdown] {
        artifacts::write(&dir.join(format!("comparison.{}", format.extension())), render::render(&matrix, format))?;
    }
    artifacts::seal(&dir, m)?;
    Ok(reports)
}

/// Score cards from a report file: one `EvaluationReport`, one score card,
/// or an array of either.
pub fn read_cards(path: &Path) -> Result<Vec<ScoreCard>> {
    let text = fs::read_to_string(path).at(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        single => vec![single],
    };
    items
        .into_iter()
        .map(|item| {
            if item.get("confusion").is_some() {
                let r: EvaluationReport = serde_json::from_value(item).map_err(|e| Error::format(path, e.to_string()))?;
                Ok(ScoreCard::from(&r))
            } else {
                serde_json::from_value(item).map_err(|e| Error::format(path, e.to_string()))
            }
        })
        .collect()
}

/// Report files named by `paths`; directories are searched for
/// `report.json` files.
pub fn collect_report_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
                let entry = entry.map_err(|e| Error::format(p, e.to_string()))?;
                if entry.file_type().is_file() && entry.file_name() == "report.json" {
                    files.push(entry.into_path());
                }
            }
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(Error::Missing { path: p.clone(), hint: "report file not found".into() });
        }
    }
    if files.is_empty() {
        return Err(Error::Usage("no report files found".into()));
    }
    Ok(files)
}

pub fn cmd_compare(paths: &[PathBuf], format: Format) -> Result<String> {
    let mut cards = Vec::new();
    for f in collect_report_files(paths)? {
        cards.extend(read_cards(&f)?);
    }
    Ok(render::render(&compare(&cards)?, format))
}

/// A window of a scanned file at or above the threshold. Offsets are
/// characters of the original file; lines are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub start: usize,
    pub end: usize,
    pub start_line: usize,
    pub end_line: usize,
    pub score: f64,
}

fn line_of(line_starts: &[usize], offset: usize) -> usize {
    line_starts.partition_point(|&s| s <= offset)
}

/// Scores every window of `source` with a trained model and returns those
/// at or above `threshold`, highest score first.
pub fn scan_source(
    model: &TrainedClassifier,
    descriptor: &ModelDescriptor,
    embedding: &LoadedEmbedding,
    id: &str,
    source: &str,
    threshold: f64,
) -> Result<Vec<Finding>> {
    let unit = lex_source(id, source, &[], &descriptor.lexer);
    let windows = build_windows(&unit.stream, &[], &descriptor.windows)?;
    let vectors = vectorize(&windows, &unit, embedding.backend(), descriptor.windows.length)?;
    let scores = score(model, &vectors)?;
    let mut line_starts = vec![0];
    line_starts.extend(source.chars().enumerate().filter(|(_, c)| *c == '\n').map(|(i, _)| i + 1));
    let mut findings: Vec<Finding> = windows
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s >= threshold)
        .map(|(w, score)| {
            let Span { start, end } = unit.normalized.original_span(w.char_range);
            Finding { start, end, start_line: line_of(&line_starts, start), end_line: line_of(&line_starts, end.saturating_sub(1).max(start)), score }
        })
        .collect();
    findings.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.start.cmp(&b.start)));
    Ok(findings)
}

pub fn cmd_scan(model_dir: &Path, file: &Path, threshold: f64) -> Result<Vec<Finding>> {
    let descriptor = model_io::read_descriptor(model_dir)?;
    let embedding = LoadedEmbedding::from_descriptor(&descriptor.embedding)?;
    let (model, descriptor) = model_io::load(model_dir, Some(&embedding.backend().fingerprint()))?;
    let bytes = fs::read(file).at(file)?;
    let source = String::from_utf8(bytes).map_err(|_| Error::format(file, "source file is not valid UTF-8"))?;
    scan_source(&model, &descriptor, &embedding, &file.display().to_string(), &source, threshold)
}
