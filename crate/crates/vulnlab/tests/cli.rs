use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use vulnlab::artifacts::git_blob_hash;
use vulnlab::commands::{read_cards, Finding};
use vulnlab::corpus_io::write_corpus;
use vulnlab::render;
use vulnlab::synth::{synth_corpus, SynthConfig};
use vulnlab_core::eval::compare;
use vulnlab_core::VulnerabilityCategory as Cat;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn vulnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("VULNLAB_MODEL_CACHE")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path, value: serde_json::Value) -> String {
    let p = dir.join("manifest.json");
    fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p.display().to_string()
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(vulnlab(&["--help"]).status.code(), Some(0));
    assert_eq!(vulnlab(&["--version"]).status.code(), Some(0));
    assert_eq!(vulnlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vulnlab(&["prepare"]).status.code(), Some(1));
    let o = vulnlab(&["prepare", "--manifest", "/nonexistent/m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/m.json"));
    let o = vulnlab(&["compare", "--format", "pdf", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn prepare_reports_the_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = json!({"id": "a", "category": "xss", "source": "x = 1\n", "vulnerable_spans": []});
    fs::write(dir.path().join("c.jsonl"), format!("{good}\n{{\"id\": \"b\", \"category\": \n")).unwrap();
    let m = manifest(
        dir.path(),
        json!({"vulnerabilities": [{"category": "xss", "corpus": "c.jsonl"}],
               "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}}),
    );
    let o = vulnlab(&["prepare", "--manifest", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("c.jsonl:2:"), "{}", stderr(&o));
}

#[test]
fn compare_renders_the_reference_table() {
    let fixture = data().join("reference/table_bilstm.json");
    let o = vulnlab(&["compare", fixture.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let want = render::markdown(&compare(&read_cards(&fixture).unwrap()).unwrap());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), want);
    assert!(want.contains("**96.8%**"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = vulnlab(&["compare", "--format", "csv", "--out", out.to_str().unwrap(), fixture.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(out).unwrap().starts_with("classifier,vulnerability,metric,word2vec,codebert,graphcodebert\n"));
}

fn synth_file(dir: &Path, units: usize) -> PathBuf {
    let config = SynthConfig { units, context_chars: 40, ..SynthConfig::default() };
    let path = dir.join("corpus.jsonl");
    write_corpus(&path, &synth_corpus(Cat::SqlInjection, &config)).unwrap();
    path
}

fn assert_sealed(dir: &Path) {
    let hashes = fs::read_to_string(dir.join("hashes.txt")).unwrap();
    assert!(dir.join("manifest.json").is_file());
    for line in hashes.lines() {
        let (hash, name) = line.split_once("  ").unwrap();
        assert_eq!(hash, git_blob_hash(&fs::read(dir.join(name)).unwrap()), "{}", dir.join(name).display());
    }
    assert!(hashes.contains("  manifest.json\n"));
}

#[test]
fn contextual_pipeline_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_file(dir.path(), 20);
    let corpus_hash = git_blob_hash(&fs::read(&corpus).unwrap());
    let m = manifest(
        dir.path(),
        json!({
            "vulnerabilities": [{"category": "sql_injection", "corpus": "corpus.jsonl"}],
            "embedding": {"kind": "contextual", "model": "tiny-roberta", "embedding": "graphcodebert"},
            "model_cache": data(),
            "classifier": {"kind": "cnn", "epochs": 2},
            "keep_scores": true
        }),
    );
    let o = vulnlab(&["train-embedding", "--manifest", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("embedding.kind"));

    let o = vulnlab(&["train", "--manifest", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vulnlab prepare"), "{}", stderr(&o));

    for cmd in ["prepare", "train", "evaluate"] {
        let o = vulnlab(&[cmd, "--manifest", &m, "--reproducible"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    let out = dir.path().join("out");
    let v = out.join("sql_injection");
    for sub in ["dataset", "model", "eval"] {
        assert_sealed(&v.join(sub));
    }
    assert_sealed(&out.join("comparison"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(v.join("dataset/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["embedding"], "graphcodebert");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(v.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["embedding"], "graphcodebert");
    assert_eq!(report["classifier"], "cnn");
    assert!(report["scores"].is_array() && report.get("generated_at").is_none());
    assert!(fs::read_to_string(out.join("comparison/comparison.md")).unwrap().contains("GraphCodeBERT"));
    // inputs are left alone
    assert_eq!(git_blob_hash(&fs::read(&corpus).unwrap()), corpus_hash);

    let model = v.join("model");
    let empty = dir.path().join("empty.py");
    fs::write(&empty, "# nothing here\n").unwrap();
    let o = vulnlab(&["scan", "--model", model.to_str().unwrap(), empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "[]");

    let target = dir.path().join("target.py");
    let source = synth_corpus(Cat::SqlInjection, &SynthConfig { units: 1, seed: 99, ..SynthConfig::default() })[0].source.clone();
    fs::write(&target, &source).unwrap();
    let o = vulnlab(&["scan", "--model", model.to_str().unwrap(), "--threshold", "0", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let findings: Vec<Finding> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!findings.is_empty());
    let n = source.chars().count();
    assert!(findings.windows(2).all(|w| w[0].score >= w[1].score));
    for f in &findings {
        assert!(f.start < f.end && f.end <= n && f.start_line >= 1 && f.start_line <= f.end_line);
    }
}

#[test]
fn evaluate_refuses_a_model_from_another_embedding() {
    let dir = tempfile::tempdir().unwrap();
    synth_file(dir.path(), 20);
    let m = manifest(
        dir.path(),
        json!({
            "vulnerabilities": [{"category": "sql_injection", "corpus": "corpus.jsonl"}],
            "embedding": {"kind": "skipgram", "config": {"dim": 8, "min_count": 2, "epochs": 1}},
            "classifier": {"kind": "cnn", "epochs": 1}
        }),
    );
    for cmd in ["train-embedding", "prepare", "train"] {
        let o = vulnlab(&[cmd, "--manifest", &m]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    // a different seed gives a different skip-gram table
    let o = vulnlab(&["train-embedding", "--manifest", &m, "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let o = vulnlab(&["evaluate", "--manifest", &m, "--seed", "99"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fingerprint mismatch"), "{}", stderr(&o));
    // and the manifest's own settings no longer match the artifact
    let o = vulnlab(&["evaluate", "--manifest", &m]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("embedding.config"), "{}", stderr(&o));
}
