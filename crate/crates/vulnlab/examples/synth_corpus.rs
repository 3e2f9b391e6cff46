//! Writes a synthetic SQL-injection corpus as canonical JSONL.
//!
//! ```text
//! cargo run -p vulnlab --example synth_corpus -- corpus.jsonl [units] [seed] [context_chars]
//! ```

use std::path::PathBuf;

use vulnlab::synth::{synth_corpus, SynthConfig};
use vulnlab_core::VulnerabilityCategory;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "corpus.jsonl".into()));
    let mut config = SynthConfig::default();
    if let Some(n) = args.next() {
        config.units = n.parse().expect("units must be a number");
    }
    if let Some(s) = args.next() {
        config.seed = s.parse().expect("seed must be a number");
    }
    if let Some(c) = args.next() {
        config.context_chars = c.parse().expect("context_chars must be a number");
    }
    let units = synth_corpus(VulnerabilityCategory::SqlInjection, &config);
    vulnlab::corpus_io::write_corpus(&path, &units).expect("write corpus");
    println!("wrote {} units to {}", units.len(), path.display());
}
