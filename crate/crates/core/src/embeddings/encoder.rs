//! Inference-only RoBERTa-family encoder (post-LayerNorm BERT blocks with
//! offset position ids), as used by CodeBERT and GraphCodeBERT.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bpe::BpeTokenizer;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::math;
use crate::tensor::{gemm, gemm_strided, Matrix, Strides};

/// The subset of a checkpoint's `config.json` the encoder needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    #[serde(default = "default_model_type")]
    pub model_type: String,
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "one")]
    pub type_vocab_size: usize,
    #[serde(default = "one_u32")]
    pub pad_token_id: u32,
    #[serde(default)]
    pub bos_token_id: u32,
    #[serde(default = "two")]
    pub eos_token_id: u32,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f32,
    #[serde(default = "default_act")]
    pub hidden_act: String,
}

fn default_model_type() -> String {
    "roberta".into()
}
fn one() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn two() -> u32 {
    2
}
fn default_eps() -> f32 {
    1e-5
}
fn default_act() -> String {
    "gelu".into()
}

impl EncoderConfig {
    /// First position id; RoBERTa numbers positions from `pad_token_id + 1`.
    pub fn position_offset(&self) -> usize {
        self.pad_token_id as usize + 1
    }

    /// Longest input, special tokens included.
    pub fn max_positions(&self) -> usize {
        self.max_position_embeddings.saturating_sub(self.position_offset())
    }

    fn validate(&self) -> Result<()> {
        if self.model_type != "roberta" {
            return Err(Error::Encoder(format!("unsupported model_type `{}`", self.model_type)));
        }
        if self.hidden_act != "gelu" {
            return Err(Error::Encoder(format!("unsupported activation `{}`", self.hidden_act)));
        }
        if self.num_attention_heads == 0 || !self.hidden_size.is_multiple_of(self.num_attention_heads) {
            return Err(Error::Encoder("hidden_size must be divisible by num_attention_heads".into()));
        }
        if self.max_positions() < 3 {
            return Err(Error::Encoder("max_position_embeddings too small".into()));
        }
        Ok(())
    }
}

struct Linear {
    weight: Vec<f32>, // [out, in]
    bias: Vec<f32>,
    input: usize,
    output: usize,
}

impl Linear {
    fn forward(&self, x: &[f32], rows: usize) -> Vec<f32> {
        let mut y = Vec::with_capacity(rows * self.output);
        for _ in 0..rows {
            y.extend_from_slice(&self.bias);
        }
        gemm(rows, self.input, self.output, x, false, &self.weight, true, 1.0, &mut y);
        y
    }
}

struct LayerNorm {
    gamma: Vec<f32>,
    beta: Vec<f32>,
    eps: f32,
}

impl LayerNorm {
    fn apply(&self, x: &mut [f32]) {
        let h = self.gamma.len();
        for row in x.chunks_mut(h) {
            let mean = row.iter().sum::<f32>() / h as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / h as f32;
            let inv = 1.0 / math::sqrt(var + self.eps);
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - mean) * inv * self.gamma[i] + self.beta[i];
            }
        }
    }
}

struct Block {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
}

/// Looks up a named tensor with an expected shape.
type Fetch<'a> = dyn FnMut(&str, &[usize]) -> Result<Vec<f32>> + 'a;

/// Frozen encoder weights.
pub struct RobertaEncoder {
    config: EncoderConfig,
    word: Vec<f32>,
    position: Vec<f32>,
    token_type: Vec<f32>,
    embed_norm: LayerNorm,
    blocks: Vec<Block>,
    fingerprint: String,
}

/// Source of named tensors: returns `(shape, row-major values)`.
pub trait TensorSource {
    fn tensor(&mut self, name: &str) -> Option<(Vec<usize>, Vec<f32>)>;
}

impl RobertaEncoder {
    pub fn load(config: EncoderConfig, source: &mut dyn TensorSource) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let mut fp = Fingerprinter::new();
        fp.str("roberta").u64(h as u64).u64(config.num_hidden_layers as u64);
        let mut fetch = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let found = source
                .tensor(name)
                .or_else(|| source.tensor(&format!("roberta.{name}")))
                .ok_or_else(|| Error::Encoder(format!("missing tensor `{name}`")))?;
            if found.0 != shape {
                return Err(Error::Encoder(format!("tensor `{name}` has shape {:?}, expected {shape:?}", found.0)));
            }
            fp.str(name).f32s(&found.1);
            Ok(found.1)
        };
        let eps = config.layer_norm_eps;
        let norm = |fetch: &mut Fetch<'_>, prefix: &str| -> Result<LayerNorm> {
            Ok(LayerNorm {
                gamma: fetch(&format!("{prefix}.weight"), &[h])?,
                beta: fetch(&format!("{prefix}.bias"), &[h])?,
                eps,
            })
        };
        let linear = |fetch: &mut Fetch<'_>, prefix: &str, input: usize, output: usize| -> Result<Linear> {
            Ok(Linear {
                weight: fetch(&format!("{prefix}.weight"), &[output, input])?,
                bias: fetch(&format!("{prefix}.bias"), &[output])?,
                input,
                output,
            })
        };
        let word = fetch("embeddings.word_embeddings.weight", &[config.vocab_size, h])?;
        let position = fetch("embeddings.position_embeddings.weight", &[config.max_position_embeddings, h])?;
        let token_type = fetch("embeddings.token_type_embeddings.weight", &[config.type_vocab_size, h])?;
        let embed_norm = norm(&mut fetch, "embeddings.LayerNorm")?;
        let inter = config.intermediate_size;
        let mut blocks = Vec::with_capacity(config.num_hidden_layers);
        for l in 0..config.num_hidden_layers {
            let p = format!("encoder.layer.{l}");
            blocks.push(Block {
                query: linear(&mut fetch, &format!("{p}.attention.self.query"), h, h)?,
                key: linear(&mut fetch, &format!("{p}.attention.self.key"), h, h)?,
                value: linear(&mut fetch, &format!("{p}.attention.self.value"), h, h)?,
                attn_out: linear(&mut fetch, &format!("{p}.attention.output.dense"), h, h)?,
                attn_norm: norm(&mut fetch, &format!("{p}.attention.output.LayerNorm"))?,
                intermediate: linear(&mut fetch, &format!("{p}.intermediate.dense"), h, inter)?,
                output: linear(&mut fetch, &format!("{p}.output.dense"), inter, h)?,
                out_norm: norm(&mut fetch, &format!("{p}.output.LayerNorm"))?,
            });
        }
        Ok(RobertaEncoder {
            config,
            word,
            position,
            token_type,
            embed_norm,
            blocks,
            fingerprint: fp.finish(),
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Final hidden layer for a full id sequence (special tokens included).
    pub fn forward(&self, ids: &[u32]) -> Result<Matrix> {
        let h = self.config.hidden_size;
        let n = ids.len();
        if n > self.config.max_positions() {
            return Err(Error::Encoder(format!("{n} ids exceed {} positions", self.config.max_positions())));
        }
        let offset = self.config.position_offset();
        let mut x = vec![0.0f32; n * h];
        for (t, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= self.config.vocab_size {
                return Err(Error::Encoder(format!("token id {id} outside vocabulary")));
            }
            let row = &mut x[t * h..(t + 1) * h];
            let w = &self.word[id * h..(id + 1) * h];
            let p = &self.position[(t + offset) * h..(t + offset + 1) * h];
            let ty = &self.token_type[..h];
            for i in 0..h {
                row[i] = w[i] + p[i] + ty[i];
            }
        }
        self.embed_norm.apply(&mut x);
        for block in &self.blocks {
            x = self.block(block, &x, n);
        }
        Ok(Matrix::from_vec(n, h, x))
    }

    fn block(&self, b: &Block, x: &[f32], n: usize) -> Vec<f32> {
        let h = self.config.hidden_size;
        let heads = self.config.num_attention_heads;
        let dh = h / heads;
        let q = b.query.forward(x, n);
        let k = b.key.forward(x, n);
        let v = b.value.forward(x, n);
        let scale = 1.0 / math::sqrt(dh as f32);
        let mut ctx = vec![0.0f32; n * h];
        let mut scores = vec![0.0f32; n * n];
        for head in 0..heads {
            let off = head * dh;
            // scores = Q_h K_h^T
            gemm_strided(n, dh, n, scale, &q[off..], Strides { row: h, col: 1 }, &k[off..], Strides { row: 1, col: h }, 0.0, &mut scores, Strides::dense(n));
            for row in scores.chunks_mut(n) {
                let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                let mut sum = 0.0;
                for s in row.iter_mut() {
                    *s = math::exp(*s - max);
                    sum += *s;
                }
                row.iter_mut().for_each(|s| *s /= sum);
            }
            gemm_strided(n, n, dh, 1.0, &scores, Strides::dense(n), &v[off..], Strides { row: h, col: 1 }, 0.0, &mut ctx[off..], Strides { row: h, col: 1 });
        }
        let mut attn = b.attn_out.forward(&ctx, n);
        for (a, xi) in attn.iter_mut().zip(x) {
            *a += xi;
        }
        b.attn_norm.apply(&mut attn);
        let mut inter = b.intermediate.forward(&attn, n);
        for v in inter.iter_mut() {
            *v = 0.5 * *v * (1.0 + math::erf(*v * core::f32::consts::FRAC_1_SQRT_2));
        }
        let mut out = b.output.forward(&inter, n);
        for (o, a) in out.iter_mut().zip(&attn) {
            *o += a;
        }
        b.out_norm.apply(&mut out);
        out
    }
}

/// A loaded contextual encoder: subword tokenizer plus frozen weights.
pub struct EncoderHandle {
    pub identifier: String,
    pub hidden_dim: usize,
    pub max_positions: usize,
    tokenizer: BpeTokenizer,
    encoder: RobertaEncoder,
}

impl core::fmt::Debug for EncoderHandle {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("EncoderHandle")
            .field("identifier", &self.identifier)
            .field("hidden_dim", &self.hidden_dim)
            .field("max_positions", &self.max_positions)
            .finish_non_exhaustive()
    }
}

/// Final-layer vectors of the code subwords of one input.
#[derive(Debug, Clone)]
pub struct ContextualOutput {
    pub matrix: Matrix,
    /// Subwords dropped to respect the position cap.
    pub truncated: usize,
}

impl EncoderHandle {
    pub fn new(identifier: &str, tokenizer: BpeTokenizer, encoder: RobertaEncoder) -> Self {
        EncoderHandle {
            identifier: identifier.to_string(),
            hidden_dim: encoder.hidden_size(),
            max_positions: encoder.config().max_positions(),
            tokenizer,
            encoder,
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new();
        fp.str(&self.identifier).str(self.encoder.fingerprint());
        fp.finish()
    }

    pub fn tokenizer(&self) -> &BpeTokenizer {
        &self.tokenizer
    }

    pub fn encoder(&self) -> &RobertaEncoder {
        &self.encoder
    }

    /// Full input ids: `<s>` + subwords (tail-truncated) + `</s>`, and the
    /// number of subwords dropped.
    pub fn input_ids(&self, source: &str) -> (Vec<u32>, usize) {
        let mut ids = self.tokenizer.encode(source);
        let cap = self.max_positions - 2;
        let truncated = ids.len().saturating_sub(cap);
        ids.truncate(cap);
        let cfg = self.encoder.config();
        let mut full = Vec::with_capacity(ids.len() + 2);
        full.push(cfg.bos_token_id);
        full.extend(ids);
        full.push(cfg.eos_token_id);
        (full, truncated)
    }
}

/// Runs `source` through the encoder and returns one row per retained code
/// subword (special-token rows removed).
pub fn contextual_embed(handle: &EncoderHandle, source: &str) -> Result<ContextualOutput> {
    let (ids, truncated) = handle.input_ids(source);
    if ids.len() <= 2 {
        return Ok(ContextualOutput { matrix: Matrix::zeros(0, handle.hidden_dim), truncated });
    }
    let hidden = handle.encoder.forward(&ids)?;
    let h = handle.hidden_dim;
    let inner = hidden.as_slice()[h..(ids.len() - 1) * h].to_vec();
    let matrix = Matrix::from_vec(ids.len() - 2, h, inner);
    if !matrix.is_finite() {
        return Err(Error::NonFinite("encoder output"));
    }
    Ok(ContextualOutput { matrix, truncated })
}
