//! Token vectors: a trainable skip-gram table and frozen contextual
//! encoders behind one [`EmbeddingBackend`] interface.

pub mod bpe;
pub mod encoder;
pub mod skipgram;

use alloc::string::String;
use core::ops::Range;

use serde::{Deserialize, Serialize};

pub use bpe::BpeTokenizer;
pub use encoder::{contextual_embed, ContextualOutput, EncoderConfig, EncoderHandle, RobertaEncoder, TensorSource};
pub use skipgram::{embed_tokens_skipgram, token_counts, train_skipgram, SkipgramConfig, SkipgramModel};

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::lexer::LexedUnit;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Skipgram,
    Contextual,
}

/// Vectors for one slice of a token stream.
#[derive(Debug, Clone)]
pub struct Embedded {
    /// `N × dim`; `N` equals the token count for skip-gram and the retained
    /// subword count for contextual backends.
    pub matrix: Matrix,
    pub oov: usize,
    pub truncated: usize,
}

pub trait EmbeddingBackend {
    fn kind(&self) -> BackendKind;
    fn dim(&self) -> usize;
    fn fingerprint(&self) -> String;
    /// Vectors for tokens `tokens` of `unit`.
    fn embed_window(&self, unit: &LexedUnit, tokens: Range<usize>) -> Result<Embedded>;
}

impl EmbeddingBackend for SkipgramModel {
    fn kind(&self) -> BackendKind {
        BackendKind::Skipgram
    }

    fn dim(&self) -> usize {
        SkipgramModel::dim(self)
    }

    fn fingerprint(&self) -> String {
        SkipgramModel::fingerprint(self)
    }

    fn embed_window(&self, unit: &LexedUnit, tokens: Range<usize>) -> Result<Embedded> {
        let slice = &unit.stream.tokens[tokens];
        let (matrix, oov) = skipgram::embed_texts(self, slice.iter().map(|t| t.text.as_str()));
        Ok(Embedded { matrix, oov, truncated: 0 })
    }
}

impl EmbeddingBackend for EncoderHandle {
    fn kind(&self) -> BackendKind {
        BackendKind::Contextual
    }

    fn dim(&self) -> usize {
        self.hidden_dim
    }

    fn fingerprint(&self) -> String {
        EncoderHandle::fingerprint(self)
    }

    /// Encodes the window's own source slice, so the position cap applies
    /// per window rather than per file.
    fn embed_window(&self, unit: &LexedUnit, tokens: Range<usize>) -> Result<Embedded> {
        if tokens.is_empty() {
            return Ok(Embedded { matrix: Matrix::zeros(0, self.hidden_dim), oov: 0, truncated: 0 });
        }
        let toks = &unit.stream.tokens;
        let span = Span::new(toks[tokens.start].start, toks[tokens.end - 1].end);
        let out = contextual_embed(self, &unit.slice(span))?;
        Ok(Embedded { matrix: out.matrix, oov: 0, truncated: out.truncated })
    }
}

/// Cosine similarity. `defined` is false when either vector is all zeros,
/// in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    pub defined: bool,
}

pub fn cosine(u: &[f32], v: &[f32]) -> Result<Cosine> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Ok(Cosine { value: 0.0, defined: false });
    }
    let value = (uv / (crate::math::sqrt64(uu) * crate::math::sqrt64(vv))).clamp(-1.0, 1.0);
    Ok(Cosine { value, defined: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    use crate::lexer::{lex_source, LexerOptions, Token, TokenKind, TokenStream};

    #[test]
    fn cosine_basics() {
        let v = [0.3f32, -1.2, 4.0];
        let neg: Vec<f32> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &v).unwrap().value - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &neg).unwrap().value + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap().value, 0.0);
        let zero = cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!((zero.value, zero.defined), (0.0, false));
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    fn stream(words: &[&str]) -> TokenStream {
        TokenStream {
            source_id: "s".to_string(),
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| Token { text: w.to_string(), start: i, end: i + 1, kind: TokenKind::Name })
                .collect(),
        }
    }

    fn small_config(dim: usize, min_count: usize) -> SkipgramConfig {
        SkipgramConfig { dim, min_count, epochs: 3, window: 2, negatives: 3, seed: 9, learning_rate: 0.05 }
    }

    #[test]
    fn rare_tokens_are_filtered_and_vectors_sized() {
        let mut words = vec!["x"; 40];
        words.extend(["rare"; 3]);
        let model = train_skipgram(&[stream(&words)], &small_config(300, 10)).unwrap();
        assert!(!model.contains("rare"));
        assert!(model.contains("x"));
        assert!(model.matrix().as_slice().len() == model.vocab().len() * 300);
        assert_eq!(model.vector("x").unwrap().len(), 300);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let err = train_skipgram(&[stream(&["a", "b"])], &small_config(4, 10)).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary { min_count: 10 }));
        assert!(train_skipgram(&[stream(&[])], &small_config(4, 1)).is_err());
    }

    #[test]
    fn lookup_is_context_free_and_oov_is_zero() {
        let words: Vec<&str> = ["a", "b", "c"].iter().cycle().take(60).copied().collect();
        let model = train_skipgram(&[stream(&words)], &small_config(8, 1)).unwrap();
        let (m, oov) = embed_tokens_skipgram(&model, &stream(&["a", "b", "c"]));
        assert_eq!((m.shape(), oov), ((3, 8), 0));
        let (m, oov) = embed_tokens_skipgram(&model, &stream(&["zzz"]));
        assert_eq!(oov, 1);
        assert!(m.is_zero());
        let (m, _) = embed_tokens_skipgram(&model, &stream(&["b", "a", "b"]));
        assert_eq!(m.row(0), m.row(2));
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let words: Vec<&str> = ["p", "q", "r", "s"].iter().cycle().take(200).copied().collect();
        let a = train_skipgram(&[stream(&words)], &small_config(16, 1)).unwrap();
        let b = train_skipgram(&[stream(&words)], &small_config(16, 1)).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        let c = train_skipgram(&[stream(&words)], &SkipgramConfig { seed: 10, ..small_config(16, 1) }).unwrap();
        assert_ne!(a.matrix().as_slice(), c.matrix().as_slice());
    }

    #[test]
    fn skipgram_backend_embeds_a_token_range() {
        let unit = lex_source("u", "x = y\nx = z\n", &[], &LexerOptions::default());
        let corpus = vec![unit.stream.clone(); 5];
        let model = train_skipgram(&corpus, &small_config(6, 5)).unwrap();
        let e = model.embed_window(&unit, 0..3).unwrap();
        assert_eq!(e.matrix.shape(), (3, 6));
        assert_eq!(e.oov, 0);
    }
}
