//! Skip-gram with negative sampling.
//!
//! Each token stream is one sentence. For every center token a context
//! radius is drawn uniformly from `1..=window`, and the center's input
//! vector is trained to score each context token's output vector high and
//! `negatives` tokens drawn from the unigram distribution raised to 0.75
//! low. The learning rate decays linearly over the whole run.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::lexer::TokenStream;
use crate::math;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub min_count: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub seed: u64,
    pub learning_rate: f32,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 300,
            min_count: 10,
            epochs: 200,
            window: 5,
            negatives: 5,
            seed: 1,
            learning_rate: 0.025,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("skip-gram {what}")));
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if self.min_count < 1 {
            return bad("min_count must be >= 1");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.window < 1 {
            return bad("window must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// A trained skip-gram embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramModel {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
    matrix: Matrix,
    config: SkipgramConfig,
}

impl SkipgramModel {
    /// Assembles a model from a token list and its row matrix.
    pub fn from_parts(tokens: Vec<String>, matrix: Matrix, config: SkipgramConfig) -> Result<Self> {
        if matrix.rows() != tokens.len() {
            return Err(Error::DimensionMismatch { expected: tokens.len(), found: matrix.rows() });
        }
        if matrix.cols() != config.dim {
            return Err(Error::DimensionMismatch { expected: config.dim, found: matrix.cols() });
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite("skip-gram matrix"));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(SkipgramModel { tokens, index, matrix, config })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn config(&self) -> &SkipgramConfig {
        &self.config
    }

    pub fn vocab(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.matrix.row(i as usize))
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new();
        fp.str("skipgram").u64(self.dim() as u64);
        for t in &self.tokens {
            fp.str(t);
        }
        fp.f32s(self.matrix.as_slice());
        fp.finish()
    }
}

/// Looks every token up; out-of-vocabulary tokens get a zero row.
/// Returns the `N × dim` matrix and the number of OOV tokens.
pub fn embed_tokens_skipgram(model: &SkipgramModel, stream: &TokenStream) -> (Matrix, usize) {
    embed_texts(model, stream.texts())
}

pub(crate) fn embed_texts<'a>(model: &SkipgramModel, texts: impl Iterator<Item = &'a str>) -> (Matrix, usize) {
    let dim = model.dim();
    let mut out = Vec::new();
    let mut rows = 0;
    let mut oov = 0;
    for t in texts {
        match model.vector(t) {
            Some(v) => out.extend_from_slice(v),
            None => {
                oov += 1;
                out.extend(core::iter::repeat_n(0.0, dim));
            }
        }
        rows += 1;
    }
    (Matrix::from_vec(rows, dim, out), oov)
}

/// Token frequencies over a corpus.
pub fn token_counts(corpus: &[TokenStream]) -> BTreeMap<&str, u64> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for stream in corpus {
        for t in stream.texts() {
            *counts.entry(t).or_default() += 1;
        }
    }
    counts
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += libm::pow(c as f64, 0.75);
                acc
            })
            .collect();
        NegativeTable { cumulative }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

pub fn train_skipgram(corpus: &[TokenStream], config: &SkipgramConfig) -> Result<SkipgramModel> {
    config.validate()?;
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::Empty("skip-gram corpus"));
    }
    let counts = token_counts(corpus);
    let mut vocab: Vec<(&str, u64)> = counts
        .iter()
        .filter(|(_, &c)| c >= config.min_count as u64)
        .map(|(&t, &c)| (t, c))
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary { min_count: config.min_count });
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: BTreeMap<&str, u32> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i as u32)).collect();
    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| s.texts().filter_map(|t| index.get(t).copied()).collect())
        .collect();

    let dim = config.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f32> = (0..v * dim).map(|_| (rng.random::<f32>() - 0.5) / dim as f32).collect();
    let mut output = vec![0.0f32; v * dim];
    let table = NegativeTable::new(&vocab.iter().map(|(_, c)| *c).collect::<Vec<_>>());

    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total = (words_per_epoch * config.epochs) as f64 + 1.0;
    let mut processed = 0usize;
    let mut grad = vec![0.0f32; dim];

    for _epoch in 0..config.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let progress = processed as f64 / total;
                let alpha = config.learning_rate * (1.0 - progress).max(1e-4) as f32;
                processed += 1;
                let radius = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius).min(sentence.len() - 1);
                let c_row = center as usize * dim;
                for (ctx_pos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=config.negatives {
                        let (target, label) = if d == 0 {
                            (context as usize, 1.0)
                        } else {
                            let t = table.draw(&mut rng);
                            if t == context as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let o_row = target * dim;
                        let score = dot(&input[c_row..c_row + dim], &output[o_row..o_row + dim]);
                        let g = (label - math::sigmoid(score)) * alpha;
                        axpy(g, &output[o_row..o_row + dim], &mut grad);
                        let (inp, out) = (&input[c_row..c_row + dim], &mut output[o_row..o_row + dim]);
                        axpy(g, inp, out);
                    }
                    axpy(1.0, &grad, &mut input[c_row..c_row + dim]);
                }
            }
        }
    }

    let matrix = Matrix::from_vec(v, dim, input);
    if !matrix.is_finite() {
        return Err(Error::NonFinite("skip-gram training"));
    }
    let tokens = vocab.into_iter().map(|(t, _)| String::from(t)).collect();
    SkipgramModel::from_parts(tokens, matrix, *config)
}
