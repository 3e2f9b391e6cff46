use std::path::{Path, PathBuf};

use serde::Deserialize;
use vulnlab::checkpoint;
use vulnlab::Error;
use vulnlab_core::embeddings::{contextual_embed, EmbeddingBackend};
use vulnlab_core::lexer::{lex_source, LexerOptions};

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

#[derive(Deserialize)]
struct Expected {
    hidden_dim: usize,
    max_positions: usize,
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    source: String,
    input_ids: Vec<u32>,
    hidden: Vec<Vec<f32>>,
}

fn expected() -> Expected {
    serde_json::from_str(&std::fs::read_to_string(data().join("tiny-roberta-expected.json")).unwrap()).unwrap()
}

// Reference values come from the Hugging Face implementation run on the
// same checkpoint (see tests/data/gen_tiny_roberta.py).
#[test]
fn matches_reference_implementation() {
    let handle = checkpoint::load_dir("tiny-roberta", &data().join("tiny-roberta")).unwrap();
    let want = expected();
    assert_eq!(handle.hidden_dim, want.hidden_dim);
    assert_eq!(handle.max_positions, want.max_positions);
    for case in &want.cases {
        let (ids, _) = handle.input_ids(&case.source);
        assert_eq!(ids, case.input_ids, "ids for {:?}", case.source);
        let out = contextual_embed(&handle, &case.source).unwrap();
        assert_eq!(out.matrix.rows(), case.hidden.len(), "rows for {:?}", case.source);
        for (r, row) in case.hidden.iter().enumerate() {
            for (a, b) in out.matrix.row(r).iter().zip(row) {
                assert!((a - b).abs() < 1e-4, "{:?} row {r}: {a} vs {b}", case.source);
            }
        }
    }
}

#[test]
fn long_input_is_truncated_to_the_position_cap() {
    let handle = checkpoint::load_dir("tiny-roberta", &data().join("tiny-roberta")).unwrap();
    let out = contextual_embed(&handle, &"exec(cmd) ".repeat(20)).unwrap();
    assert_eq!(out.matrix.rows(), handle.max_positions - 2);
    assert!(out.truncated > 0);
}

#[test]
fn contextual_vectors_depend_on_context() {
    let handle = checkpoint::load_dir("tiny-roberta", &data().join("tiny-roberta")).unwrap();
    let a = lex_source("a", "x = cmd\n", &[], &LexerOptions::default());
    let b = lex_source("b", "os.system(cmd)\n", &[], &LexerOptions::default());
    let ea = handle.embed_window(&a, 0..a.stream.len()).unwrap();
    let eb = handle.embed_window(&b, 0..b.stream.len()).unwrap();
    assert_eq!(ea.matrix.cols(), 16);
    assert!(ea.matrix.is_finite() && eb.matrix.is_finite());
}

#[test]
fn checkpoints_resolve_from_the_cache() {
    let handle = checkpoint::load("tiny-roberta", Some(&data())).unwrap();
    assert_eq!(handle.identifier, "tiny-roberta");
    // the same weights give the same fingerprint wherever they are found
    let direct = checkpoint::load_dir("tiny-roberta", &data().join("tiny-roberta")).unwrap();
    assert_eq!(handle.fingerprint(), direct.fingerprint());

    let err = checkpoint::load("no-such-model", Some(&data())).unwrap_err();
    assert!(matches!(err, Error::Missing { .. }));
    assert!(err.to_string().contains(checkpoint::CACHE_ENV));
}

#[test]
fn incomplete_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data().join("tiny-roberta/config.json"), dir.path().join("config.json")).unwrap();
    let err = checkpoint::load_dir("partial", dir.path()).unwrap_err();
    assert!(err.to_string().contains("vocab.json"), "{err}");
}
