//! Synthetic Python corpora with planted SQL-injection fixes, for smoke
//! runs and tests where the real datasets are unavailable.
//!
//! Every file is a handful of helper functions plus database accessors.
//! In a vulnerable file one accessor builds its query by string
//! concatenation or formatting and the "fixed" version passes parameters
//! instead; the diff between the two marks the vulnerable span. Clean
//! files only contain parameterized accessors.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use vulnlab_core::corpus::{unit_from_patch, PatchPair, SourceUnit, DEFAULT_CONTEXT_CHARS};
use vulnlab_core::VulnerabilityCategory;

use crate::corpus_io::diff_hunks;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub units: usize,
    /// Share of files that carry a vulnerable accessor.
    pub vulnerable_fraction: f64,
    pub context_chars: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { units: 150, vulnerable_fraction: 0.5, context_chars: DEFAULT_CONTEXT_CHARS, seed: 7 }
    }
}

const NOUNS: [&str; 16] = [
    "user", "order", "item", "account", "session", "invoice", "product", "comment", "ticket", "report", "profile",
    "payment", "address", "group", "token", "review",
];
const COLUMNS: [&str; 10] = ["id", "name", "email", "status", "created", "owner", "title", "price", "total", "code"];
const HELPER_VERBS: [&str; 8] = ["parse", "format", "count", "merge", "clean", "score", "check", "render"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).copied().unwrap()
    }

    fn helper(&mut self, out: &mut String) {
        let verb = self.pick(&HELPER_VERBS);
        let noun = self.pick(&NOUNS);
        let arg = format!("{noun}s");
        match self.rng.random_range(0..4) {
            0 => {
                writeln!(out, "def {verb}_{noun}s({arg}, limit={}):", self.rng.random_range(2..50)).unwrap();
                writeln!(out, "    result = []").unwrap();
                writeln!(out, "    for entry in {arg}:").unwrap();
                writeln!(out, "        if len(result) >= limit:").unwrap();
                writeln!(out, "            break").unwrap();
                writeln!(out, "        result.append(entry.{}.lower())", self.pick(&COLUMNS)).unwrap();
                writeln!(out, "    return result").unwrap();
            }
            1 => {
                writeln!(out, "def {verb}_{noun}(value, factor={}):", self.rng.random_range(1..9)).unwrap();
                writeln!(out, "    \"\"\"Normalize a {noun} value.\"\"\"").unwrap();
                writeln!(out, "    total = value * factor + {}", self.rng.random_range(0..100)).unwrap();
                writeln!(out, "    while total > {}:", self.rng.random_range(100..1000)).unwrap();
                writeln!(out, "        total = total // 2").unwrap();
                writeln!(out, "    return total").unwrap();
            }
            2 => {
                writeln!(out, "class {}{}:", capitalize(noun), capitalize(verb)).unwrap();
                writeln!(out, "    def __init__(self, {noun}):").unwrap();
                writeln!(out, "        self.{noun} = {noun}").unwrap();
                writeln!(out, "        self.cache = {{}}").unwrap();
                writeln!(out).unwrap();
                writeln!(out, "    def get(self, key, default=None):").unwrap();
                writeln!(out, "        # cached lookup").unwrap();
                writeln!(out, "        return self.cache.get(key, default)").unwrap();
            }
            _ => {
                writeln!(out, "def {verb}_{noun}_log(logger, {noun}):").unwrap();
                writeln!(out, "    message = \"{verb} {noun} %s\"").unwrap();
                writeln!(out, "    logger.info(message, {noun}.{})", self.pick(&COLUMNS)).unwrap();
                writeln!(out, "    return {noun} is not None").unwrap();
            }
        }
        out.push('\n');
    }

    /// A database accessor; returns `(safe, unsafe)` versions that differ
    /// only in how the query is built.
    fn accessor(&mut self) -> (String, String) {
        let noun = self.pick(&NOUNS);
        let col = self.pick(&COLUMNS);
        let key = self.pick(&COLUMNS);
        let var = format!("{noun}_{key}");
        let mut head = String::new();
        writeln!(head, "def get_{noun}_by_{key}(conn, {var}):").unwrap();
        writeln!(head, "    cursor = conn.cursor()").unwrap();
        let query = format!("SELECT {col} FROM {noun}s WHERE {key} = ");
        let safe = format!("    cursor.execute(\"{query}%s\", ({var},))\n");
        let bad = match self.rng.random_range(0..3) {
            0 => format!("    cursor.execute(\"{query}'\" + {var} + \"'\")\n"),
            1 => format!("    cursor.execute(\"{query}'%s'\" % {var})\n"),
            _ => format!("    cursor.execute(\"{query}'{{}}'\".format({var}))\n"),
        };
        let tail = "    rows = cursor.fetchall()\n    cursor.close()\n    return rows\n\n";
        (format!("{head}{safe}{tail}"), format!("{head}{bad}{tail}"))
    }

    /// `(before, after)` texts of one file; equal when the file is clean.
    fn file(&mut self, vulnerable: bool) -> (String, String) {
        let mut before = String::from("import sqlite3\n\n\n");
        let mut after = before.clone();
        let accessors = self.rng.random_range(1..3);
        let bad_index = self.rng.random_range(0..accessors);
        for a in 0..accessors {
            for _ in 0..self.rng.random_range(1..4) {
                let mut h = String::new();
                self.helper(&mut h);
                before.push_str(&h);
                after.push_str(&h);
            }
            let (safe, bad) = self.accessor();
            before.push_str(if vulnerable && a == bad_index { &bad } else { &safe });
            after.push_str(&safe);
        }
        (before, after)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Patch pairs in generation order with their vulnerability flag.
pub fn synth_pairs(config: &SynthConfig) -> Vec<(PatchPair, bool)> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(config.seed) };
    (0..config.units)
        .map(|_| {
            let vulnerable = g.rng.random_bool(config.vulnerable_fraction.clamp(0.0, 1.0));
            let (before, after) = g.file(vulnerable);
            let hunks = diff_hunks(&before, &after);
            (PatchPair { before, after, hunks }, vulnerable)
        })
        .collect()
}

/// Canonical source units for `category`.
pub fn synth_corpus(category: VulnerabilityCategory, config: &SynthConfig) -> Vec<SourceUnit> {
    synth_pairs(config)
        .into_iter()
        .enumerate()
        .map(|(i, (pair, _))| {
            let origin = format!("synthetic/repo@{:04}", i);
            unit_from_patch(&format!("{origin}:module_{i}.py"), category, &pair, config.context_chars, &origin)
                .expect("generated patches are well formed")
        })
        .collect()
}

/// The same corpus in the upstream nested layout, one commit per file.
pub fn synth_upstream(config: &SynthConfig) -> Value {
    let mut commits = Map::new();
    for (i, (pair, _)) in synth_pairs(config).into_iter().enumerate() {
        let files = json!({ format!("module_{i}.py"): { "before": pair.before, "after": pair.after } });
        commits.insert(format!("{:04}", i), json!({ "files": files }));
    }
    json!({ "synthetic/repo": commits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vulnerable_files_get_spans_and_clean_files_none() {
        let config = SynthConfig { units: 40, ..SynthConfig::default() };
        let pairs = synth_pairs(&config);
        let units = synth_corpus(VulnerabilityCategory::SqlInjection, &config);
        assert!(pairs.iter().any(|p| p.1) && pairs.iter().any(|p| !p.1));
        for ((pair, vulnerable), unit) in pairs.iter().zip(&units) {
            assert_eq!(unit.is_vulnerable(), *vulnerable);
            assert_eq!(pair.hunks.is_empty(), !vulnerable);
            unit.validate().unwrap();
        }
        assert_eq!(units, synth_corpus(VulnerabilityCategory::SqlInjection, &config));
    }
}
