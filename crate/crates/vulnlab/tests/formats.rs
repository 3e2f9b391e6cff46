use std::fs;
use std::path::{Path, PathBuf};

use vulnlab::commands::read_cards;
use vulnlab::manifest::{ExperimentManifest, Overrides};
use vulnlab::model_io::{self, EmbeddingDescriptor, ModelDescriptor};
use vulnlab::render::{self, Format};
use vulnlab::{dataset_io, skipgram_io, Error};
use vulnlab_core::corpus::Span;
use vulnlab_core::datasets::{VectorizedWindow, Window, WindowGeometry};
use vulnlab_core::embeddings::{train_skipgram, BackendKind, SkipgramConfig};
use vulnlab_core::eval::{compare, evaluate_scores, EmbeddingKind, Metric, ReportKey, ScoreCard};
use vulnlab_core::lexer::{lex_source, LexerOptions};
use vulnlab_core::models::{build, Architecture, BiLstmConfig, ClassifierConfig, CnnConfig, TrainingHistory};
use vulnlab_core::tensor::Matrix;
use vulnlab_core::VulnerabilityCategory as Cat;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn small_skipgram() -> vulnlab_core::embeddings::SkipgramModel {
    let src = "def f(x):\n    return x + 1\n".repeat(20);
    let unit = lex_source("s", &src, &[], &LexerOptions::default());
    let config = SkipgramConfig { dim: 12, min_count: 5, epochs: 2, ..SkipgramConfig::default() };
    train_skipgram(&[unit.stream], &config).unwrap()
}

#[test]
fn skipgram_file_round_trips_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_skipgram();
    let path = dir.path().join("sg.bin");
    skipgram_io::save(&path, &model).unwrap();
    let back = skipgram_io::load(&path).unwrap();
    assert_eq!(back.vocab(), model.vocab());
    let bits = |m: &vulnlab_core::embeddings::SkipgramModel| m.matrix().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&model));
    assert_eq!(back.config(), model.config());
    assert_eq!(back.fingerprint(), model.fingerprint());
}

#[test]
fn damaged_skipgram_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = skipgram_io::encode(&small_skipgram());
    let path = dir.path().join("sg.bin");

    let truncated = &bytes[..bytes.len() - 3];
    assert!(skipgram_io::decode(&path, truncated).unwrap_err().to_string().contains("truncated"));

    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(skipgram_io::decode(&path, &magic).unwrap_err().to_string().contains("magic"));

    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&7u32.to_le_bytes());
    let msg = skipgram_io::decode(&path, &version).unwrap_err().to_string();
    assert!(msg.contains("expected 1") && msg.contains("found 7"), "{msg}");

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(skipgram_io::decode(&path, &trailing).is_err());
}

fn windows(n: usize, length: usize, dim: usize) -> Vec<VectorizedWindow> {
    (0..n)
        .map(|i| VectorizedWindow {
            window: Window {
                source_id: format!("src-{}", i % 3),
                token_range: (i, i + length),
                char_range: Span::new(i * 2, i * 2 + 9),
                label: (i % 2) as u8,
            },
            matrix: Matrix::from_vec(length, dim, (0..length * dim).map(|k| ((k + i) as f32 * 0.37).sin()).collect()),
            oov: i % 4,
            truncated: i % 5,
        })
        .collect()
}

#[test]
fn dataset_cache_round_trips_and_checks_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.vlds");
    let ws = windows(7, 4, 3);
    dataset_io::save(&path, 4, 3, "fp-a", &ws).unwrap();
    let cache = dataset_io::load(&path, Some("fp-a")).unwrap();
    assert_eq!((cache.length, cache.dim, cache.fingerprint.as_str()), (4, 3, "fp-a"));
    assert_eq!(cache.windows, ws);
    let err = dataset_io::load(&path, Some("fp-b")).unwrap_err();
    assert!(matches!(err, Error::Fingerprint { .. }));
    assert_eq!(err.exit_code(), 1);
}

fn descriptor(config: &ClassifierConfig, fingerprint: &str) -> ModelDescriptor {
    let (_, dim) = config.input_shape();
    ModelDescriptor {
        format_version: model_io::FORMAT_VERSION,
        vulnerability: Cat::Xss,
        architecture: config.architecture(),
        classifier: config.clone(),
        config_fingerprint: config.fingerprint(),
        param_count: config.param_count(),
        embedding: EmbeddingDescriptor {
            kind: EmbeddingKind::Word2vec,
            backend: BackendKind::Skipgram,
            dim,
            fingerprint: fingerprint.into(),
            artifact: Some("unused.bin".into()),
            model: None,
            model_cache: None,
        },
        windows: WindowGeometry::default(),
        lexer: LexerOptions::default(),
        class_weights: None,
    }
}

#[test]
fn model_directory_round_trips_predictions() {
    let configs = [
        ClassifierConfig::Bilstm(BiLstmConfig { dim: 6, units: 4, seed: 3, ..BiLstmConfig::default() }),
        ClassifierConfig::Cnn(CnnConfig { dim: 6, seed: 3, ..CnnConfig::default() }),
    ];
    for config in configs {
        let dir = tempfile::tempdir().unwrap();
        let mut model = build(config.clone()).unwrap();
        model.set_embedding_fingerprint("emb");
        let probe = windows(9, 40, 6);
        let mats: Vec<&Matrix> = probe.iter().map(|w| &w.matrix).collect();
        let before = model.predict_batch(&mats).unwrap();
        model_io::save(dir.path(), &model, &descriptor(&config, "emb"), &TrainingHistory::default()).unwrap();
        let (back, d) = model_io::load(dir.path(), Some("emb")).unwrap();
        assert_eq!(d.classifier, config);
        assert_eq!(back.predict_batch(&mats).unwrap(), before);
        assert!(matches!(model_io::load(dir.path(), Some("other")), Err(Error::Fingerprint { .. })));
    }
}

#[test]
fn model_load_refuses_bad_directories() {
    let dir = tempfile::tempdir().unwrap();
    let err = model_io::load(dir.path(), None).unwrap_err();
    assert!(matches!(err, Error::Missing { .. }), "{err}");

    let config = ClassifierConfig::Cnn(CnnConfig { dim: 4, ..CnnConfig::default() });
    let model = build(config.clone()).unwrap();
    let mut d = descriptor(&config, "");
    model_io::save(dir.path(), &model, &d, &TrainingHistory::default()).unwrap();
    // config edited after training
    if let ClassifierConfig::Cnn(c) = &mut d.classifier {
        c.dense_units = 100;
    }
    fs::write(dir.path().join(model_io::CONFIG_FILE), serde_json::to_string(&d).unwrap()).unwrap();
    assert!(matches!(model_io::load(dir.path(), None), Err(Error::Fingerprint { .. })));
}

fn table(name: &str) -> Vec<ScoreCard> {
    read_cards(&data(&format!("reference/table_{name}.json"))).unwrap()
}

#[test]
fn bilstm_table_renders_with_bold_best_cells() {
    let cards = table("bilstm");
    assert_eq!(cards.len(), 21);
    let matrix = compare(&cards).unwrap();
    let md = render::markdown(&matrix);
    assert!(md.contains("| SQL injection | Precision | **96.8%** | 66.2% | 72.8% |"), "{md}");
    assert!(md.contains("| XSS | Recall | 91.3% | 68.0% | **95.7%** |"));
    assert!(md.starts_with("### BiLSTM\n\n| Vulnerability | Metric | Word2Vec | CodeBERT | GraphCodeBERT |"));
    // averages: 96.214, 93.329, 94.729, 98.657
    assert!(md.contains("| Average | Precision | **96.2%** |"));
    assert!(md.contains("| Average | Accuracy | **98.7%** |"));
    assert_eq!(render::markdown(&matrix), md);
}

#[test]
fn cnn_table_flags_the_larger_value() {
    // The published CNN table bolds 96.0% for path disclosure accuracy;
    // the CodeBERT cell, 96.9%, is the larger value and is the one flagged.
    let matrix = compare(&table("cnn")).unwrap();
    let cell = |e| matrix.cell(Architecture::Cnn, Cat::PathDisclosure, e).unwrap();
    assert!(cell(EmbeddingKind::Codebert).best.contains(&Metric::Accuracy));
    assert!(!cell(EmbeddingKind::Graphcodebert).best.contains(&Metric::Accuracy));
    let gcb = matrix.average(Architecture::Cnn, EmbeddingKind::Graphcodebert).unwrap();
    assert!((gcb.precision * 100.0 - 94.4).abs() <= 0.1);
}

#[test]
fn single_cell_matrix_in_every_format() {
    let card = ScoreCard {
        vulnerability: Cat::Xsrf,
        embedding: EmbeddingKind::Codebert,
        classifier: Architecture::Cnn,
        precision: 0.5,
        recall: 0.25,
        f_score: 1.0 / 3.0,
        accuracy: 0.75,
        auc: None,
    };
    let m = compare(&[card]).unwrap();
    let csv = render::csv(&m);
    assert_eq!(
        csv,
        "classifier,vulnerability,metric,codebert\n\
         cnn,xsrf,precision,0.5\ncnn,xsrf,recall,0.25\ncnn,xsrf,f_score,0.3333333333333333\ncnn,xsrf,accuracy,0.75\n\
         cnn,average,precision,0.5\ncnn,average,recall,0.25\ncnn,average,f_score,0.3333333333333333\ncnn,average,accuracy,0.75\n"
    );
    let md = render::markdown(&m);
    assert!(md.contains("| XSRF | Recall | **25.0%** |"));
    let json: serde_json::Value = serde_json::from_str(&render::json(&m)).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 1);
    assert!("pdf".parse::<Format>().is_err());
}

#[test]
fn perfect_classifier_roc_plot() {
    let key = ReportKey { vulnerability: Cat::Xss, embedding: EmbeddingKind::Word2vec, classifier: Architecture::Bilstm };
    let graded = evaluate_scores(key, &[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9], 0.5, false).unwrap();
    assert!(graded.roc.contains(&[0.0, 1.0]));
    let report = evaluate_scores(key, &[0, 0, 1, 1], &[0.0, 0.0, 1.0, 1.0], 0.5, false).unwrap();
    assert_eq!(report.roc, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
    let svg = render::roc_svg(&report);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains(r#"points="50.00,450.00 50.00,50.00 450.00,50.00""#), "{svg}");
    assert_eq!(render::roc_csv(&report.roc), "fpr,tpr\n0,0\n0,1\n1,1\n");
}

fn write_manifest(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("manifest.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn manifest_defaults_paths_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_manifest(
        dir.path(),
        r#"{"vulnerabilities": [{"category": "xss", "corpus": "c.jsonl"}],
            "embedding": {"kind": "skipgram"}, "classifier": {"kind": "bilstm"}}"#,
    );
    let m = ExperimentManifest::load(&p, &Overrides::default()).unwrap();
    let base = dir.path().canonicalize().unwrap();
    assert_eq!(m.output_dir, base.join("out"));
    assert_eq!(m.vulnerabilities[0].corpus, base.join("c.jsonl"));
    assert_eq!(m.windows, WindowGeometry::default());
    assert_eq!(m.threshold, 0.5);
    assert_eq!(m.classifier.input_shape(), (40, 300));

    let o = Overrides { output_dir: Some("/tmp/elsewhere".into()), seed: Some(11), threshold: Some(0.7) };
    let m = ExperimentManifest::load(&p, &o).unwrap();
    assert_eq!(m.output_dir, PathBuf::from("/tmp/elsewhere"));
    assert_eq!((m.split.seed, m.classifier.seed(), m.threshold), (11, 11, 0.7));
    // the effective manifest re-reads to itself
    let again: ExperimentManifest = serde_json::from_str(&m.to_json()).unwrap();
    assert_eq!(again, m);
}

#[test]
fn manifest_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"vulnerabilities": [], "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}}"#, "vulnerabilities"),
        (r#"{"vulnerabilities": [{"category": "xss", "corpus": "c"}], "classifier": {"kind": "cnn"}}"#, "embedding"),
        (r#"{"vulnerabilities": [{"category": "xss", "corpus": "c"}], "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}, "windoes": {}}"#, "windoes"),
        (r#"{"vulnerabilities": [{"category": "xss", "corpus": "c"}], "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}, "windows": {"length": 20}}"#, "classifier"),
        (r#"{"vulnerabilities": [{"category": "xss", "corpus": "c"}], "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}, "split": {"train_frac": 0.9}}"#, "split"),
        (r#"{"vulnerabilities": [{"category": "xss", "corpus": "c"}], "embedding": {"kind": "skipgram"}, "classifier": {"kind": "cnn"}, "threshold": 2}"#, "threshold"),
    ];
    for (text, field) in cases {
        let err = ExperimentManifest::load(&write_manifest(dir.path(), text), &Overrides::default()).unwrap_err();
        match &err {
            Error::Manifest { field: f, .. } => assert_eq!(f, field, "{err}"),
            other => panic!("expected a manifest error for `{field}`, got {other}"),
        }
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn bundled_corpus_repository_list() {
    let repos = vulnlab::manifest::default_corpus_repositories();
    assert_eq!(repos.len(), 8);
    assert!(repos.iter().all(|r| r.url.starts_with("https://github.com/") && r.url.ends_with(&format!("/{}", r.name))));
    assert!(repos.iter().any(|r| r.name == "flask" && r.url.ends_with("pallets/flask")));
}
