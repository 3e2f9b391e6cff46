use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{EmbeddingKind, EvaluationReport};
use crate::category::VulnerabilityCategory;
use crate::error::{Error, Result};
use crate::models::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    FScore,
    Accuracy,
    Auc,
}

impl Metric {
    pub const TABLE: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::FScore, Metric::Accuracy];

    pub fn title(self) -> &'static str {
        match self {
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::FScore => "F-Score",
            Metric::Accuracy => "Accuracy",
            Metric::Auc => "AUC",
        }
    }
}

/// The headline numbers of one report; all a comparison needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub vulnerability: VulnerabilityCategory,
    pub embedding: EmbeddingKind,
    pub classifier: Architecture,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

impl ScoreCard {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::FScore => Some(self.f_score),
            Metric::Accuracy => Some(self.accuracy),
            Metric::Auc => self.auc,
        }
    }

    fn key(&self) -> (Architecture, VulnerabilityCategory, EmbeddingKind) {
        (self.classifier, self.vulnerability, self.embedding)
    }
}

impl From<&EvaluationReport> for ScoreCard {
    fn from(r: &EvaluationReport) -> Self {
        ScoreCard {
            vulnerability: r.vulnerability,
            embedding: r.embedding,
            classifier: r.classifier,
            precision: r.precision,
            recall: r.recall,
            f_score: r.f_score,
            accuracy: r.accuracy,
            auc: Some(r.auc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    #[serde(flatten)]
    pub card: ScoreCard,
    /// Metrics on which this cell ties or beats every other embedding for
    /// the same classifier and vulnerability.
    pub best: Vec<Metric>,
}

/// Mean of the present cells of one (classifier, embedding) column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub classifier: Architecture,
    pub embedding: EmbeddingKind,
    pub cells: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub best: Vec<Metric>,
}

impl Average {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::FScore => Some(self.f_score),
            Metric::Accuracy => Some(self.accuracy),
            Metric::Auc => self.auc,
        }
    }
}

/// Cells sorted by (classifier, vulnerability, embedding); averages sorted
/// by (classifier, embedding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub cells: Vec<ComparisonCell>,
    pub averages: Vec<Average>,
}

impl ComparisonMatrix {
    pub fn cell(
        &self,
        classifier: Architecture,
        vulnerability: VulnerabilityCategory,
        embedding: EmbeddingKind,
    ) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.card.key() == (classifier, vulnerability, embedding))
    }

    pub fn average(&self, classifier: Architecture, embedding: EmbeddingKind) -> Option<&Average> {
        self.averages.iter().find(|a| a.classifier == classifier && a.embedding == embedding)
    }

    pub fn classifiers(&self) -> Vec<Architecture> {
        let mut v: Vec<Architecture> = self.cells.iter().map(|c| c.card.classifier).collect();
        v.dedup();
        v
    }

    /// Embeddings present anywhere in the grid, in canonical order.
    pub fn embeddings(&self) -> Vec<EmbeddingKind> {
        EmbeddingKind::ALL.into_iter().filter(|e| self.cells.iter().any(|c| c.card.embedding == *e)).collect()
    }
}

const METRICS: [Metric; 5] = [Metric::Precision, Metric::Recall, Metric::FScore, Metric::Accuracy, Metric::Auc];

/// Marks, per metric, every item whose value equals the group maximum.
fn flag_best<T>(items: &mut [T], get: impl Fn(&T, Metric) -> Option<f64>, set: impl Fn(&mut T, Metric)) {
    for m in METRICS {
        let best = items.iter().filter_map(|it| get(it, m)).fold(f64::NEG_INFINITY, f64::max);
        for it in items.iter_mut() {
            if get(it, m) == Some(best) {
                set(it, m);
            }
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups score cards into the comparison grid. Averages depend only on
/// the set of cards, not their order.
pub fn compare(cards: &[ScoreCard]) -> Result<ComparisonMatrix> {
    let mut by_key = BTreeMap::new();
    for card in cards {
        if by_key.insert(card.key(), card.clone()).is_some() {
            return Err(Error::DuplicateReport(alloc::format!(
                "{} / {} / {}",
                card.vulnerability,
                card.embedding,
                card.classifier
            )));
        }
    }

    let mut cells: Vec<ComparisonCell> =
        by_key.into_values().map(|card| ComparisonCell { card, best: Vec::new() }).collect();
    let mut start = 0;
    while start < cells.len() {
        let (clf, vuln, _) = cells[start].card.key();
        let end = start + cells[start..].iter().take_while(|c| c.card.classifier == clf && c.card.vulnerability == vuln).count();
        flag_best(&mut cells[start..end], |c, m| c.card.get(m), |c, m| c.best.push(m));
        start = end;
    }

    let mut columns: BTreeMap<(Architecture, EmbeddingKind), Vec<&ScoreCard>> = BTreeMap::new();
    for c in &cells {
        columns.entry((c.card.classifier, c.card.embedding)).or_default().push(&c.card);
    }
    let mut averages: Vec<Average> = columns
        .into_iter()
        .map(|((classifier, embedding), col)| Average {
            classifier,
            embedding,
            cells: col.len(),
            precision: mean(col.iter().map(|c| c.precision)).unwrap_or(0.0),
            recall: mean(col.iter().map(|c| c.recall)).unwrap_or(0.0),
            f_score: mean(col.iter().map(|c| c.f_score)).unwrap_or(0.0),
            accuracy: mean(col.iter().map(|c| c.accuracy)).unwrap_or(0.0),
            auc: mean(col.iter().filter_map(|c| c.auc)),
            best: Vec::new(),
        })
        .collect();
    let mut start = 0;
    while start < averages.len() {
        let clf = averages[start].classifier;
        let end = start + averages[start..].iter().take_while(|a| a.classifier == clf).count();
        flag_best(&mut averages[start..end], |a, m| a.get(m), |a, m| a.best.push(m));
        start = end;
    }
    Ok(ComparisonMatrix { cells, averages })
}
