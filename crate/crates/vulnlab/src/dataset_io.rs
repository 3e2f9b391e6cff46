//! Cached vectorized windows.
//!
//! Layout, little-endian: magic `VLDS`, `u32` version, `u32` window length
//! `L`, `u32` dim, `u64` count, the embedding fingerprint as a `u32`-length
//! string, then per window: source id string, `u64` token start/end, `u64`
//! char start/end, `u32` label, `u64` OOV count, `u64` truncated count and
//! `L * dim` `f32` values.

use std::fs;
use std::path::Path;

use vulnlab_core::corpus::Span;
use vulnlab_core::datasets::{VectorizedWindow, Window};
use vulnlab_core::tensor::Matrix;

use crate::binio::{Reader, Writer};
use crate::error::{Error, IoContext, Result};

const MAGIC: &[u8; 4] = b"VLDS";
pub const VERSION: u32 = 1;

/// A loaded cache: windows plus the fingerprint of the embedding that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCache {
    pub length: usize,
    pub dim: usize,
    pub fingerprint: String,
    pub windows: Vec<VectorizedWindow>,
}

pub fn encode(length: usize, dim: usize, fingerprint: &str, windows: &[VectorizedWindow]) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.u32(length as u32);
    w.u32(dim as u32);
    w.u64(windows.len() as u64);
    w.str(fingerprint);
    for v in windows {
        assert_eq!(v.matrix.shape(), (length, dim), "window matrix shape");
        w.str(&v.window.source_id);
        for x in [v.window.token_range.0, v.window.token_range.1, v.window.char_range.start, v.window.char_range.end] {
            w.u64(x as u64);
        }
        w.u32(v.window.label as u32);
        w.u64(v.oov as u64);
        w.u64(v.truncated as u64);
        w.f32s(v.matrix.as_slice());
    }
    w.buf
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<WindowCache> {
    let mut r = Reader::open(path, bytes, MAGIC, VERSION)?;
    let length = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let count = r.u64()? as usize;
    let fingerprint = r.str()?;
    let mut windows = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let source_id = r.str()?;
        let (t0, t1, c0, c1) = (r.u64()? as usize, r.u64()? as usize, r.u64()? as usize, r.u64()? as usize);
        let label = r.u32()?;
        if label > 1 {
            return Err(r.error(format!("window label {label} is not binary")));
        }
        let oov = r.u64()? as usize;
        let truncated = r.u64()? as usize;
        let matrix = Matrix::from_vec(length, dim, r.f32s(length * dim)?);
        windows.push(VectorizedWindow {
            window: Window { source_id, token_range: (t0, t1), char_range: Span::new(c0, c1), label: label as u8 },
            matrix,
            oov,
            truncated,
        });
    }
    r.finish()?;
    Ok(WindowCache { length, dim, fingerprint, windows })
}

pub fn save(path: &Path, length: usize, dim: usize, fingerprint: &str, windows: &[VectorizedWindow]) -> Result<()> {
    fs::write(path, encode(length, dim, fingerprint, windows)).at(path)
}

/// Loads a cache, refusing one built from a different embedding.
pub fn load(path: &Path, expected_fingerprint: Option<&str>) -> Result<WindowCache> {
    let bytes = fs::read(path).at(path)?;
    let cache = decode(path, &bytes)?;
    if let Some(expected) = expected_fingerprint {
        if cache.fingerprint != expected {
            return Err(Error::Fingerprint {
                what: format!("embedding of dataset cache {}", path.display()),
                expected: expected.into(),
                found: cache.fingerprint,
            });
        }
    }
    Ok(cache)
}
