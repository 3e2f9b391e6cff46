//! Canonical JSONL corpora and the upstream nested-JSON import.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use similar::{DiffTag, TextDiff};
use vulnlab_core::corpus::{unit_from_patch, Hunk, PatchPair, SourceUnit, Span};
use vulnlab_core::VulnerabilityCategory;

use crate::error::{Error, IoContext, Result};

/// Reads a canonical corpus and keeps the records of `category`, in file
/// order. Blank lines are ignored. Every record is parsed and validated,
/// including those of other categories, so a bad file fails regardless of
/// the filter.
pub fn load_corpus(path: &Path, category: VulnerabilityCategory) -> Result<Vec<SourceUnit>> {
    Ok(load_all(path)?.into_iter().filter(|u| u.category == category).collect())
}

/// Reads every record of a canonical corpus.
pub fn load_all(path: &Path) -> Result<Vec<SourceUnit>> {
    let file = fs::File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = |message: String| Error::Record { path: path.to_path_buf(), line: i + 1, message };
        let unit: SourceUnit = serde_json::from_str(&line).map_err(|e| record(e.to_string()))?;
        unit.validate().map_err(|e| record(e.to_string()))?;
        out.push(unit);
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, units: &[SourceUnit]) -> Result<()> {
    let mut buf = Vec::new();
    for u in units {
        serde_json::to_writer(&mut buf, u).expect("source units serialize");
        buf.push(b'\n');
    }
    fs::write(path, buf).at(path)
}

/// Counts from one upstream import.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ImportSummary {
    /// File entries found in the container.
    pub read: usize,
    pub emitted: usize,
    pub skipped: usize,
}

const BEFORE_KEYS: [&str; 3] = ["before", "sourceWithComments", "source"];
const AFTER_KEYS: [&str; 2] = ["after", "sourceAfter"];

fn text_field<'a>(entry: &'a Value, keys: &[&str]) -> Option<&'a str> {
    keys.iter().find_map(|k| entry.get(*k).and_then(Value::as_str))
}

/// Character offset of the start of each line, plus the total length.
fn line_offsets(text: &str) -> Vec<usize> {
    let mut offsets = vec![0];
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        pos += line.chars().count();
        offsets.push(pos);
    }
    offsets
}

/// Line-level diff of a fix, as character-range hunks.
///
/// Positions are accumulated from the op lengths rather than read from the
/// ops, whose reported indices are unreliable for some inputs.
pub fn diff_hunks(before: &str, after: &str) -> Vec<Hunk> {
    let diff = TextDiff::from_lines(before, after);
    let bo = line_offsets(before);
    let ao = line_offsets(after);
    let (mut old, mut new) = (0, 0);
    let mut hunks = Vec::new();
    for op in diff.ops() {
        let (old_len, new_len) = (op.old_range().len(), op.new_range().len());
        if op.tag() != DiffTag::Equal {
            hunks.push(Hunk {
                before: Span::new(bo[old], bo[old + old_len]),
                after: Span::new(ao[new], ao[new + new_len]),
            });
        }
        old += old_len;
        new += new_len;
    }
    hunks
}

/// Flattens an upstream container `{repo: {commit: {"files": {name: entry}}}}`
/// into source units. Each file entry supplies the pre-fix text under
/// `before` (or `sourceWithComments` / `source`) and the post-fix text
/// under `after` (or `sourceAfter`); vulnerable spans come from their line
/// diff. Entries without both versions are skipped and counted.
pub fn import_upstream(
    path: &Path,
    category: VulnerabilityCategory,
    context_chars: usize,
) -> Result<(Vec<SourceUnit>, ImportSummary)> {
    let text = fs::read_to_string(path).at(path)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let repos = root.as_object().ok_or_else(|| Error::format(path, "expected a JSON object of repositories"))?;
    let mut summary = ImportSummary::default();
    let mut units = Vec::new();
    for (repo, commits) in repos {
        let Some(commits) = commits.as_object() else {
            log::warn!("{}: repository {repo:?} is not an object; skipped", path.display());
            continue;
        };
        for (commit, body) in commits {
            let Some(files) = body.get("files").and_then(Value::as_object) else {
                log::warn!("{}: commit {repo}@{commit} has no files; skipped", path.display());
                continue;
            };
            // sorted for a stable unit order
            let files: BTreeMap<&String, &Value> = files.iter().collect();
            for (name, entry) in files {
                summary.read += 1;
                let (Some(before), Some(after)) = (text_field(entry, &BEFORE_KEYS), text_field(entry, &AFTER_KEYS)) else {
                    summary.skipped += 1;
                    continue;
                };
                let pair = PatchPair { before: before.into(), after: after.into(), hunks: diff_hunks(before, after) };
                let origin = format!("{repo}@{commit}");
                match unit_from_patch(&format!("{origin}:{name}"), category, &pair, context_chars, &origin) {
                    Ok(unit) => {
                        units.push(unit);
                        summary.emitted += 1;
                    }
                    Err(e) => {
                        log::warn!("{}: {origin}:{name}: {e}; skipped", path.display());
                        summary.skipped += 1;
                    }
                }
            }
        }
    }
    Ok((units, summary))
}

/// Writes units as JSONL to any writer.
pub fn write_jsonl<W: Write>(mut w: W, units: &[SourceUnit]) -> std::io::Result<()> {
    for u in units {
        serde_json::to_writer(&mut w, u)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
