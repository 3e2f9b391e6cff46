//! Text renderings of comparison grids and ROC curves. Output depends only
//! on the input values, so re-rendering the same data is byte-identical.

use std::fmt::Write;
use std::str::FromStr;

use vulnlab_core::eval::{ComparisonMatrix, EvaluationReport, Metric};
use vulnlab_core::models::Architecture;
use vulnlab_core::VulnerabilityCategory;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    Json,
    #[default]
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(Error::Usage(format!("unknown format `{other}` (expected csv, json or markdown)"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

pub fn render(matrix: &ComparisonMatrix, format: Format) -> String {
    match format {
        Format::Csv => csv(matrix),
        Format::Json => json(matrix),
        Format::Markdown => markdown(matrix),
    }
}

/// Metric rows shown for a classifier: the four table metrics, plus AUC
/// when any cell carries one.
fn metric_rows(matrix: &ComparisonMatrix, classifier: Architecture) -> Vec<Metric> {
    let mut rows = Metric::TABLE.to_vec();
    if matrix.cells.iter().any(|c| c.card.classifier == classifier && c.card.auc.is_some()) {
        rows.push(Metric::Auc);
    }
    rows
}

fn vulnerabilities(matrix: &ComparisonMatrix, classifier: Architecture) -> Vec<VulnerabilityCategory> {
    let mut v: Vec<_> = matrix.cells.iter().filter(|c| c.card.classifier == classifier).map(|c| c.card.vulnerability).collect();
    v.dedup();
    v
}

/// Rows are classifier × vulnerability × metric, then the averages; one
/// column per embedding present. Values are fractions; absent cells are
/// left empty.
pub fn csv(matrix: &ComparisonMatrix) -> String {
    let embeddings = matrix.embeddings();
    let mut out = String::from("classifier,vulnerability,metric");
    for e in &embeddings {
        write!(out, ",{}", e.as_str()).unwrap();
    }
    out.push('\n');
    for clf in matrix.classifiers() {
        let metrics = metric_rows(matrix, clf);
        for vuln in vulnerabilities(matrix, clf) {
            for &m in &metrics {
                write!(out, "{},{},{}", clf.as_str(), vuln.as_str(), metric_key(m)).unwrap();
                for &e in &embeddings {
                    let v = matrix.cell(clf, vuln, e).and_then(|c| c.card.get(m));
                    write!(out, ",{}", v.map(|v| v.to_string()).unwrap_or_default()).unwrap();
                }
                out.push('\n');
            }
        }
        for &m in &metrics {
            write!(out, "{},average,{}", clf.as_str(), metric_key(m)).unwrap();
            for &e in &embeddings {
                let v = matrix.average(clf, e).and_then(|a| a.get(m));
                write!(out, ",{}", v.map(|v| v.to_string()).unwrap_or_default()).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn metric_key(m: Metric) -> &'static str {
    match m {
        Metric::Precision => "precision",
        Metric::Recall => "recall",
        Metric::FScore => "f_score",
        Metric::Accuracy => "accuracy",
        Metric::Auc => "auc",
    }
}

pub fn json(matrix: &ComparisonMatrix) -> String {
    let mut s = serde_json::to_string_pretty(matrix).expect("matrix serializes");
    s.push('\n');
    s
}

fn percent(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

/// One table per classifier in the layout of the published results:
/// vulnerability and metric down the side, embeddings across, best value
/// per row in bold.
pub fn markdown(matrix: &ComparisonMatrix) -> String {
    let embeddings = matrix.embeddings();
    let mut out = String::new();
    for clf in matrix.classifiers() {
        if !out.is_empty() {
            out.push('\n');
        }
        writeln!(out, "### {}\n", clf.title()).unwrap();
        out.push_str("| Vulnerability | Metric |");
        for e in &embeddings {
            write!(out, " {} |", e.title()).unwrap();
        }
        out.push_str("\n|---|---|");
        for _ in &embeddings {
            out.push_str("---:|");
        }
        out.push('\n');
        let metrics = metric_rows(matrix, clf);
        let mut row = |label: &str, m: Metric, value: &dyn Fn(_) -> Option<(f64, bool)>| {
            write!(out, "| {label} | {} |", m.title()).unwrap();
            for &e in &embeddings {
                match value(e) {
                    Some((v, true)) => write!(out, " **{}** |", percent(v)).unwrap(),
                    Some((v, false)) => write!(out, " {} |", percent(v)).unwrap(),
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        };
        for vuln in vulnerabilities(matrix, clf) {
            for &m in &metrics {
                row(vuln.title(), m, &|e| {
                    let c = matrix.cell(clf, vuln, e)?;
                    Some((c.card.get(m)?, c.best.contains(&m)))
                });
            }
        }
        for &m in &metrics {
            row("Average", m, &|e| {
                let a = matrix.average(clf, e)?;
                Some((a.get(m)?, a.best.contains(&m)))
            });
        }
    }
    out
}

/// `fpr,tpr` rows of a ROC curve.
pub fn roc_csv(points: &[[f64; 2]]) -> String {
    let mut out = String::from("fpr,tpr\n");
    for [x, y] in points {
        writeln!(out, "{x},{y}").unwrap();
    }
    out
}

/// A self-contained SVG plot of the report's ROC curve with the chance
/// diagonal.
pub fn roc_svg(report: &EvaluationReport) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    let x = |v: f64| PAD + v * SIZE;
    let y = |v: f64| PAD + (1.0 - v) * SIZE;
    let total = SIZE + 2.0 * PAD;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-size="14">ROC: {} + {}, {} (AUC = {:.3})</text>"#,
        total / 2.0,
        report.classifier.title(),
        report.embedding.title(),
        report.vulnerability.title(),
        report.auc
    )
    .unwrap();
    writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#).unwrap();
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t:.1}</text>"#, x(t), y(0.0) + 18.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.1}</text>"#, x(0.0) - 6.0, y(t) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#, total / 2.0, total - 8.0).unwrap();
    writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">True positive rate</text>"#,
        total / 2.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    )
    .unwrap();
    let points: Vec<String> = report.roc.iter().map(|[fx, ty]| format!("{:.2},{:.2}", x(*fx), y(*ty))).collect();
    writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, points.join(" ")).unwrap();
    s.push_str("</svg>\n");
    s
}
