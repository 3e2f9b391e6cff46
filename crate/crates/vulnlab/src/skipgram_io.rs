//! Skip-gram artifact file.
//!
//! Layout, little-endian: magic `VLSG`, `u32` version, `u32` dim, `u32`
//! vocabulary size, the training config (`u32` min_count, epochs, window,
//! negatives, `u64` seed, `f32` learning rate), then per token a `u32`
//! byte length, the UTF-8 bytes and `dim` `f32` values.

use std::fs;
use std::path::Path;

use vulnlab_core::embeddings::{SkipgramConfig, SkipgramModel};
use vulnlab_core::tensor::Matrix;

use crate::binio::{Reader, Writer};
use crate::error::{IoContext, Result};

const MAGIC: &[u8; 4] = b"VLSG";
pub const VERSION: u32 = 1;

pub fn encode(model: &SkipgramModel) -> Vec<u8> {
    let c = model.config();
    let mut w = Writer::new(MAGIC, VERSION);
    w.u32(model.dim() as u32);
    w.u32(model.vocab().len() as u32);
    for v in [c.min_count, c.epochs, c.window, c.negatives] {
        w.u32(v as u32);
    }
    w.u64(c.seed);
    w.f32(c.learning_rate);
    for (i, token) in model.vocab().iter().enumerate() {
        w.str(token);
        w.f32s(model.matrix().row(i));
    }
    w.buf
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<SkipgramModel> {
    let mut r = Reader::open(path, bytes, MAGIC, VERSION)?;
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let config = SkipgramConfig {
        dim,
        min_count: r.u32()? as usize,
        epochs: r.u32()? as usize,
        window: r.u32()? as usize,
        negatives: r.u32()? as usize,
        seed: r.u64()?,
        learning_rate: r.f32()?,
    };
    let mut tokens = Vec::with_capacity(count.min(1 << 20));
    let mut data = Vec::new();
    for _ in 0..count {
        tokens.push(r.str()?);
        data.extend(r.f32s(dim)?);
    }
    r.finish()?;
    let matrix = Matrix::from_vec(count, dim, data);
    Ok(SkipgramModel::from_parts(tokens, matrix, config)?)
}

pub fn save(path: &Path, model: &SkipgramModel) -> Result<()> {
    fs::write(path, encode(model)).at(path)
}

pub fn load(path: &Path) -> Result<SkipgramModel> {
    let bytes = fs::read(path).at(path)?;
    decode(path, &bytes)
}
