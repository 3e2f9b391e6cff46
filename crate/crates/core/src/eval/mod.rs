//! Threshold metrics, ROC/AUC, per-model reports and the comparison grid.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::VulnerabilityCategory;
use crate::error::{Error, Result};
use crate::models::Architecture;

mod compare;

pub use compare::{compare, Average, ComparisonCell, ComparisonMatrix, Metric, ScoreCard};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Which token representation fed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Word2vec,
    Codebert,
    Graphcodebert,
}

impl EmbeddingKind {
    pub const ALL: [EmbeddingKind; 3] = [EmbeddingKind::Word2vec, EmbeddingKind::Codebert, EmbeddingKind::Graphcodebert];

    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Word2vec => "word2vec",
            EmbeddingKind::Codebert => "codebert",
            EmbeddingKind::Graphcodebert => "graphcodebert",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            EmbeddingKind::Word2vec => "Word2Vec",
            EmbeddingKind::Codebert => "CodeBERT",
            EmbeddingKind::Graphcodebert => "GraphCodeBERT",
        }
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        EmbeddingKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(t) || k.title().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown embedding kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_inputs(labels: &[u8], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch { left: labels.len(), right: scores.len() });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabel(l));
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::ScoreOutOfRange(s));
    }
    Ok(())
}

/// Counts with a sample predicted positive when `score >= threshold`.
pub fn confusion(labels: &[u8], scores: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    check_inputs(labels, scores)?;
    let mut c = ConfusionCounts::default();
    for (&l, &s) in labels.iter().zip(scores) {
        match (l == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall, F1 and accuracy. A ratio with a zero denominator is
/// reported as 0 and listed in `undefined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<Metric>,
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let mut undefined = Vec::new();
    let mut ratio = |num: u64, den: u64, m: Metric| {
        if den == 0 {
            undefined.push(m);
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp, Metric::Precision);
    let recall = ratio(c.tp, c.tp + c.fn_, Metric::Recall);
    let accuracy = ratio(c.tp + c.tn, c.total(), Metric::Accuracy);
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined.push(Metric::FScore);
        0.0
    };
    Metrics { precision, recall, f_score, accuracy, undefined }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
}

/// Sweeps the threshold down through the distinct scores. Tied scores
/// move together, so the trapezoid over a tie group counts its
/// positive/negative pairs as one half each.
pub fn roc(labels: &[u8], scores: &[f64]) -> Result<Roc> {
    check_inputs(labels, scores)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::SingleClass(0));
    }
    if neg == 0 {
        return Err(Error::SingleClass(1));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = alloc::vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let [x0, y0] = *points.last().unwrap();
        let p = [fp as f64 / neg as f64, tp as f64 / pos as f64];
        auc += (p[0] - x0) * (p[1] + y0) / 2.0;
        points.push(p);
    }
    Ok(Roc { points, auc })
}

/// Everything known about one (vulnerability, embedding, classifier) run
/// on its test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub vulnerability: VulnerabilityCategory,
    pub embedding: EmbeddingKind,
    pub classifier: Architecture,
    pub threshold: f64,
    pub samples: usize,
    pub confusion: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<Metric>,
    pub roc: Vec<[f64; 2]>,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    /// Wall-clock details, left out of reproducible runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportKey {
    pub vulnerability: VulnerabilityCategory,
    pub embedding: EmbeddingKind,
    pub classifier: Architecture,
}

/// Builds a report from raw test-set scores.
pub fn evaluate_scores(
    key: ReportKey,
    labels: &[u8],
    scores: &[f64],
    threshold: f64,
    keep_scores: bool,
) -> Result<EvaluationReport> {
    let confusion = confusion(labels, scores, threshold)?;
    let m = metrics(&confusion);
    let roc = roc(labels, scores)?;
    Ok(EvaluationReport {
        vulnerability: key.vulnerability,
        embedding: key.embedding,
        classifier: key.classifier,
        threshold,
        samples: labels.len(),
        confusion,
        precision: m.precision,
        recall: m.recall,
        f_score: m.f_score,
        accuracy: m.accuracy,
        undefined: m.undefined,
        roc: roc.points,
        auc: roc.auc,
        labels: keep_scores.then(|| labels.to_vec()),
        scores: keep_scores.then(|| scores.to_vec()),
        generated_at: None,
        elapsed_seconds: None,
    })
}
