//! The two window classifiers: a stacked bidirectional LSTM and a 1-D CNN.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::math;
use crate::nn::{BatchNorm1d, BiLstm, Conv1d, Dense, Dropout, GlobalAvgPool, MaxPool1d, Relu, Sequential, Tensor3};
use crate::tensor::Matrix;

mod train;

pub use train::{train, Example, TrainingHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Bilstm,
    Cnn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Bilstm => "bilstm",
            Architecture::Cnn => "cnn",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Architecture::Bilstm => "BiLSTM",
            Architecture::Cnn => "CNN",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bilstm" => Ok(Architecture::Bilstm),
            "cnn" => Ok(Architecture::Cnn),
            _ => Err(Error::InvalidConfig(format!("unknown classifier {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiLstmConfig {
    /// Window length `L`.
    pub length: usize,
    /// Embedding width.
    pub dim: usize,
    pub hidden_layers: usize,
    pub units: usize,
    pub dropout: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    /// Train with balanced class weights. Off by default.
    pub class_weighted: bool,
    pub seed: u64,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        BiLstmConfig {
            length: 40,
            dim: 300,
            hidden_layers: 3,
            units: 50,
            dropout: 0.2,
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            patience: 5,
            class_weighted: false,
            seed: 0,
        }
    }
}

impl BiLstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers != 3 {
            return Err(Error::InvalidConfig(format!(
                "bilstm needs exactly 3 recurrent layers, got {}",
                self.hidden_layers
            )));
        }
        common_checks(self.length, self.dim, self.dropout, self.epochs, self.batch_size, self.learning_rate)?;
        if self.units == 0 {
            return Err(Error::InvalidConfig("bilstm units must be >= 1".into()));
        }
        Ok(())
    }

    /// Trainable parameters as a function of `(length, dim)` (the length
    /// does not enter: weights are shared over time).
    pub fn param_count(&self) -> usize {
        let w = 2 * self.units;
        BiLstm::param_count(self.dim, self.units) + 2 * BiLstm::param_count(w, self.units) + w + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub length: usize,
    pub dim: usize,
    /// Stem then the three blocks.
    pub filters: [usize; 4],
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub block_kernel: usize,
    pub dense_units: usize,
    pub dropout: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Epochs without a validation-F1 improvement before stopping.
    pub patience: usize,
    pub lr_factor: f32,
    pub lr_patience: usize,
    pub min_learning_rate: f32,
    pub batch_norm_momentum: f32,
    pub batch_norm_epsilon: f32,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            length: 40,
            dim: 300,
            filters: [32, 64, 128, 256],
            stem_kernel: 5,
            stem_stride: 2,
            block_kernel: 3,
            dense_units: 200,
            dropout: 0.2,
            epochs: 20,
            batch_size: 128,
            learning_rate: 1e-3,
            patience: 3,
            lr_factor: 0.5,
            lr_patience: 2,
            min_learning_rate: 1e-5,
            batch_norm_momentum: 0.99,
            batch_norm_epsilon: 1e-3,
            seed: 0,
        }
    }
}

impl CnnConfig {
    /// Sequence length after the stem convolution, the stem pool and each
    /// block pool (block convolutions keep the length).
    pub fn stage_lengths(&self, length: usize) -> [usize; 5] {
        let stem = length.div_ceil(self.stem_stride);
        let p0 = MaxPool1d::output_len(stem);
        let p1 = MaxPool1d::output_len(p0);
        let p2 = MaxPool1d::output_len(p1);
        [stem, p0, p1, p2, MaxPool1d::output_len(p2)]
    }

    /// Shortest window that still has one position before global pooling.
    pub fn min_length(&self) -> usize {
        (1..).find(|&l| self.stage_lengths(l)[4] >= 1).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters != [32, 64, 128, 256] {
            return Err(Error::InvalidConfig(format!("cnn filters must be [32, 64, 128, 256], got {:?}", self.filters)));
        }
        if self.dense_units != 200 {
            return Err(Error::InvalidConfig(format!("cnn dense layer must be 200 wide, got {}", self.dense_units)));
        }
        if self.stem_kernel == 0 || self.stem_stride == 0 || self.block_kernel == 0 {
            return Err(Error::InvalidConfig("cnn kernel sizes and stride must be >= 1".into()));
        }
        common_checks(self.length, self.dim, self.dropout, self.epochs, self.batch_size, self.learning_rate)?;
        if self.length < self.min_length() {
            return Err(Error::SequenceTooShort { length: self.length, minimum: self.min_length() });
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) || self.min_learning_rate.is_nan() || self.min_learning_rate < 0.0 {
            return Err(Error::InvalidConfig("cnn lr_factor must be in (0, 1) and min_learning_rate >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.batch_norm_momentum) || self.batch_norm_epsilon.is_nan() || self.batch_norm_epsilon <= 0.0 {
            return Err(Error::InvalidConfig("cnn batch-norm momentum must be in [0, 1), epsilon > 0".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let f = self.filters;
        let mut n = Conv1d::param_count(self.dim, f[0], self.stem_kernel) + 2 * f[0];
        for i in 1..4 {
            n += Conv1d::param_count(f[i - 1], f[i], self.block_kernel) + 2 * f[i];
        }
        n + f[3] * self.dense_units + self.dense_units + self.dense_units + 1
    }
}

fn common_checks(length: usize, dim: usize, dropout: f32, epochs: usize, batch: usize, lr: f32) -> Result<()> {
    if length == 0 || dim == 0 {
        return Err(Error::InvalidConfig("input shape must be non-empty".into()));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidConfig("dropout must be in [0, 1)".into()));
    }
    if epochs == 0 || batch == 0 {
        return Err(Error::InvalidConfig("epochs and batch_size must be >= 1".into()));
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::InvalidConfig("learning_rate must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Bilstm(BiLstmConfig),
    Cnn(CnnConfig),
}

impl ClassifierConfig {
    pub fn architecture(&self) -> Architecture {
        match self {
            ClassifierConfig::Bilstm(_) => Architecture::Bilstm,
            ClassifierConfig::Cnn(_) => Architecture::Cnn,
        }
    }

    pub fn default_for(arch: Architecture) -> Self {
        match arch {
            Architecture::Bilstm => ClassifierConfig::Bilstm(BiLstmConfig::default()),
            Architecture::Cnn => ClassifierConfig::Cnn(CnnConfig::default()),
        }
    }

    /// `(length, dim)`.
    pub fn input_shape(&self) -> (usize, usize) {
        match self {
            ClassifierConfig::Bilstm(c) => (c.length, c.dim),
            ClassifierConfig::Cnn(c) => (c.length, c.dim),
        }
    }

    pub fn set_input_shape(&mut self, length: usize, dim: usize) {
        match self {
            ClassifierConfig::Bilstm(c) => (c.length, c.dim) = (length, dim),
            ClassifierConfig::Cnn(c) => (c.length, c.dim) = (length, dim),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ClassifierConfig::Bilstm(c) => c.seed,
            ClassifierConfig::Cnn(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ClassifierConfig::Bilstm(c) => c.seed = seed,
            ClassifierConfig::Cnn(c) => c.seed = seed,
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            ClassifierConfig::Bilstm(c) => c.batch_size,
            ClassifierConfig::Cnn(c) => c.batch_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierConfig::Bilstm(c) => c.validate(),
            ClassifierConfig::Cnn(c) => c.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ClassifierConfig::Bilstm(c) => c.param_count(),
            ClassifierConfig::Cnn(c) => c.param_count(),
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprinter::new();
        match self {
            ClassifierConfig::Bilstm(c) => {
                fp.str("bilstm");
                for v in [c.length, c.dim, c.hidden_layers, c.units, c.epochs, c.batch_size, c.patience] {
                    fp.u64(v as u64);
                }
                fp.f64(c.dropout as f64).f64(c.learning_rate as f64).u64(c.class_weighted as u64).u64(c.seed);
            }
            ClassifierConfig::Cnn(c) => {
                fp.str("cnn");
                for v in c.filters {
                    fp.u64(v as u64);
                }
                for v in [
                    c.length,
                    c.dim,
                    c.stem_kernel,
                    c.stem_stride,
                    c.block_kernel,
                    c.dense_units,
                    c.epochs,
                    c.batch_size,
                    c.patience,
                    c.lr_patience,
                ] {
                    fp.u64(v as u64);
                }
                for v in [
                    c.dropout,
                    c.learning_rate,
                    c.lr_factor,
                    c.min_learning_rate,
                    c.batch_norm_momentum,
                    c.batch_norm_epsilon,
                ] {
                    fp.f64(v as f64);
                }
                fp.u64(c.seed);
            }
        }
        fp.finish()
    }
}

/// Output shape of one layer for a single window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub layer: &'static str,
    pub len: usize,
    pub width: usize,
}

/// A classifier network together with the configuration that built it and
/// the fingerprint of the embedding its inputs come from.
pub struct TrainedClassifier {
    config: ClassifierConfig,
    embedding_fingerprint: String,
    pub(crate) net: Sequential,
}

impl fmt::Debug for TrainedClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrainedClassifier")
            .field("architecture", &self.architecture())
            .field("input_shape", &self.input_shape())
            .field("params", &self.param_count())
            .finish()
    }
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Untrained BiLSTM: input → dropout → [BiLSTM → dropout] × 3 → dense(1).
/// The last recurrent layer emits only the final states of both directions.
pub fn build_bilstm(config: BiLstmConfig) -> Result<TrainedClassifier> {
    config.validate()?;
    let mut rng = init_rng(config.seed);
    let mut net = Sequential::new();
    let w = 2 * config.units;
    net.push(Dropout::new(config.dropout));
    for layer in 0..config.hidden_layers {
        let inputs = if layer == 0 { config.dim } else { w };
        let last = layer + 1 == config.hidden_layers;
        net.push(BiLstm::new(&mut rng, inputs, config.units, !last));
        net.push(Dropout::new(config.dropout));
    }
    net.push(Dense::new(&mut rng, w, 1));
    Ok(TrainedClassifier { config: ClassifierConfig::Bilstm(config), embedding_fingerprint: String::new(), net })
}

/// Untrained CNN: strided stem, three convolution blocks, global average
/// pooling and a dense head.
pub fn build_cnn(config: CnnConfig) -> Result<TrainedClassifier> {
    config.validate()?;
    let mut rng = init_rng(config.seed);
    let mut net = Sequential::new();
    let bn = |c| BatchNorm1d::new(c, config.batch_norm_momentum, config.batch_norm_epsilon);
    let f = config.filters;
    net.push(Conv1d::new(&mut rng, config.dim, f[0], config.stem_kernel, config.stem_stride));
    net.push(bn(f[0]));
    net.push(Relu::new());
    net.push(MaxPool1d::new());
    for i in 1..4 {
        net.push(Conv1d::new(&mut rng, f[i - 1], f[i], config.block_kernel, 1));
        net.push(bn(f[i]));
        net.push(Relu::new());
        net.push(MaxPool1d::new());
    }
    net.push(GlobalAvgPool::new());
    net.push(Dense::new(&mut rng, f[3], config.dense_units));
    net.push(Relu::new());
    net.push(Dropout::new(config.dropout));
    net.push(Dense::new(&mut rng, config.dense_units, 1));
    Ok(TrainedClassifier { config: ClassifierConfig::Cnn(config), embedding_fingerprint: String::new(), net })
}

pub fn build(config: ClassifierConfig) -> Result<TrainedClassifier> {
    match config {
        ClassifierConfig::Bilstm(c) => build_bilstm(c),
        ClassifierConfig::Cnn(c) => build_cnn(c),
    }
}

const BLOB_MAGIC: &[u8; 4] = b"VLNN";
const BLOB_VERSION: u32 = 1;
/// Windows per inference pass inside [`TrainedClassifier::predict_batch`].
const INFER_CHUNK: usize = 256;

impl TrainedClassifier {
    pub fn architecture(&self) -> Architecture {
        self.config.architecture()
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.config.input_shape()
    }

    pub fn config_fingerprint(&self) -> String {
        self.config.fingerprint()
    }

    pub fn embedding_fingerprint(&self) -> &str {
        &self.embedding_fingerprint
    }

    pub fn set_embedding_fingerprint(&mut self, fingerprint: impl Into<String>) {
        self.embedding_fingerprint = fingerprint.into();
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Per-layer output shapes, traced through the constructed network.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let (l, d) = self.input_shape();
        self.net
            .trace(Tensor3::zeros(1, l, d))
            .into_iter()
            .map(|(layer, (len, width))| LayerShape { layer, len, width })
            .collect()
    }

    fn check_shape(&self, m: &Matrix) -> Result<()> {
        let want = self.input_shape();
        if m.shape() != want {
            return Err(Error::ShapeMismatch { expected: want, found: m.shape() });
        }
        Ok(())
    }

    pub(crate) fn pack<'a>(&self, windows: impl Iterator<Item = &'a Matrix>) -> Result<Tensor3> {
        let (l, d) = self.input_shape();
        let mut data = Vec::new();
        let mut n = 0;
        for m in windows {
            self.check_shape(m)?;
            data.extend_from_slice(m.as_slice());
            n += 1;
        }
        Ok(Tensor3::from_vec(n, l, d, data))
    }

    pub(crate) fn logits(&self, x: Tensor3) -> Vec<f32> {
        self.net.infer(x).data
    }

    /// Probability that one `L × dim` window is vulnerable.
    pub fn predict(&self, window: &Matrix) -> Result<f32> {
        Ok(self.predict_batch(&[window])?[0])
    }

    /// Scores in input order. Inference is deterministic and independent
    /// of how windows are batched.
    pub fn predict_batch(&self, windows: &[&Matrix]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(INFER_CHUNK) {
            let x = self.pack(chunk.iter().copied())?;
            out.extend(self.logits(x).into_iter().map(math::sigmoid));
        }
        if out.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("prediction"));
        }
        Ok(out)
    }

    /// Parameters and batch-norm statistics as a little-endian blob.
    pub fn to_blob(&self) -> Vec<u8> {
        let state = self.net.snapshot();
        let mut out = Vec::new();
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.push(self.architecture() as u8);
        out.extend_from_slice(&(state.len() as u32).to_le_bytes());
        for t in &state {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Rebuilds the network from `config` and loads a blob written by
    /// [`TrainedClassifier::to_blob`].
    pub fn from_blob(config: ClassifierConfig, embedding_fingerprint: &str, blob: &[u8]) -> Result<Self> {
        let mut model = build(config)?;
        let bad = |why: &str| Error::MalformedBlob(String::from(why));
        let mut r = Reader { data: blob };
        if r.take(4).ok_or_else(|| bad("truncated header"))? != BLOB_MAGIC {
            return Err(bad("not a parameter blob"));
        }
        let version = r.u32().ok_or_else(|| bad("truncated header"))?;
        if version != BLOB_VERSION {
            return Err(Error::MalformedBlob(format!("unsupported blob version {version}")));
        }
        let arch = r.take(1).ok_or_else(|| bad("truncated header"))?[0];
        if arch != model.architecture() as u8 {
            return Err(bad("blob architecture does not match the configuration"));
        }
        let count = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let mut state = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u64().ok_or_else(|| bad("truncated tensor header"))? as usize;
            let bytes = r.take(len.checked_mul(4).ok_or_else(|| bad("tensor too large"))?).ok_or_else(|| bad("truncated tensor"))?;
            state.push(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect());
        }
        if !r.data.is_empty() {
            return Err(bad("trailing bytes"));
        }
        if !model.net.restore(&state) {
            return Err(bad("tensor shapes do not match the configuration"));
        }
        model.embedding_fingerprint = String::from(embedding_fingerprint);
        Ok(model)
    }
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.data.len() < n {
            return None;
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| {
            let mut a = [0u8; 8];
            a.copy_from_slice(b);
            u64::from_le_bytes(a)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn shapes(m: &TrainedClassifier) -> Vec<(&'static str, usize, usize)> {
        m.layer_shapes().into_iter().map(|s| (s.layer, s.len, s.width)).collect()
    }

    #[test]
    fn bilstm_layer_table() {
        let m = build_bilstm(BiLstmConfig::default()).unwrap();
        assert_eq!(
            shapes(&m),
            vec![
                ("dropout", 40, 300),
                ("bilstm", 40, 100),
                ("dropout", 40, 100),
                ("bilstm", 40, 100),
                ("dropout", 40, 100),
                ("bilstm", 1, 100),
                ("dropout", 1, 100),
                ("dense", 1, 1),
            ]
        );
        // 4·50·(300+50+1)·2 + 2 · 4·50·(100+50+1)·2 + 101
        assert_eq!(m.param_count(), 140_400 + 2 * 60_400 + 101);
        assert_eq!(m.param_count(), m.config().param_count());
        let dropouts = m.layer_shapes().iter().filter(|s| s.layer == "dropout").count();
        assert_eq!(dropouts, 4);
    }

    #[test]
    fn bilstm_rejects_other_depths() {
        let c = BiLstmConfig { hidden_layers: 2, ..BiLstmConfig::default() };
        assert!(matches!(build_bilstm(c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn cnn_stage_table() {
        let m = build_cnn(CnnConfig::default()).unwrap();
        let lens: Vec<usize> =
            m.layer_shapes().iter().filter(|s| s.layer == "max_pool").map(|s| s.len).collect();
        let stem = m.layer_shapes()[0];
        assert_eq!((stem.layer, stem.len, stem.width), ("conv1d", 20, 32));
        assert_eq!(lens, vec![10, 5, 2, 1]);
        assert_eq!(CnnConfig::default().stage_lengths(40), [20, 10, 5, 2, 1]);
        // every convolution after the stem keeps its input length
        let ls = m.layer_shapes();
        for w in ls.windows(2) {
            if w[1].layer == "conv1d" {
                assert_eq!(w[1].len, w[0].len);
            }
        }
        let gap = ls.iter().find(|s| s.layer == "global_avg_pool").unwrap();
        assert_eq!((gap.len, gap.width), (1, 256));
        assert_eq!(ls.last().unwrap().width, 1);
        // conv weights+bias, then gamma/beta for each batch norm, then the head
        let want = (5 * 300 * 32 + 32) + 64 + (3 * 32 * 64 + 64) + 128 + (3 * 64 * 128 + 128) + 256
            + (3 * 128 * 256 + 256) + 512 + (256 * 200 + 200) + 201;
        assert_eq!(m.param_count(), want);
        assert_eq!(m.config().param_count(), want);
    }

    #[test]
    fn cnn_minimum_length() {
        let c = CnnConfig::default();
        assert_eq!(c.min_length(), 31);
        assert_eq!(c.stage_lengths(31)[4], 1);
        assert_eq!(c.stage_lengths(30)[4], 0);
        let err = build_cnn(CnnConfig { length: 2, ..c }).unwrap_err();
        assert!(matches!(err, Error::SequenceTooShort { length: 2, minimum: 31 }));
        assert!(alloc::format!("{err}").contains("31"));
    }

    #[test]
    fn cnn_rejects_other_widths() {
        assert!(build_cnn(CnnConfig { filters: [16, 64, 128, 256], ..CnnConfig::default() }).is_err());
        assert!(build_cnn(CnnConfig { dense_units: 100, ..CnnConfig::default() }).is_err());
    }

    fn probe(l: usize, d: usize, k: usize) -> Matrix {
        Matrix::from_vec(l, d, (0..l * d).map(|i| (((i * 7 + k * 13) % 17) as f32 - 8.0) * 0.05).collect())
    }

    #[test]
    fn untrained_predictions_are_probabilities() {
        let small_lstm = BiLstmConfig { length: 6, dim: 5, ..BiLstmConfig::default() };
        let small_cnn = CnnConfig { length: 32, dim: 5, ..CnnConfig::default() };
        for m in [build_bilstm(small_lstm).unwrap(), build_cnn(small_cnn).unwrap()] {
            let (l, d) = m.input_shape();
            let a = probe(l, d, 1);
            let zero = Matrix::zeros(l, d);
            let p = m.predict_batch(&[&a, &zero, &a]).unwrap();
            assert_eq!(p.len(), 3);
            assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
            assert_eq!(p[0], p[2]);
            assert_eq!(m.predict(&a).unwrap(), p[0]);
            let wrong = Matrix::zeros(l + 1, d);
            assert!(matches!(m.predict(&wrong), Err(Error::ShapeMismatch { .. })));
        }
    }

    #[test]
    fn blob_round_trip_preserves_predictions() {
        let cfg = CnnConfig { length: 32, dim: 4, ..CnnConfig::default() };
        let m = build_cnn(cfg.clone()).unwrap();
        let blob = m.to_blob();
        let other = CnnConfig { seed: 99, ..cfg.clone() };
        let loaded = TrainedClassifier::from_blob(ClassifierConfig::Cnn(other), "fp", &blob).unwrap();
        let x = probe(32, 4, 3);
        assert_eq!(m.predict(&x).unwrap().to_bits(), loaded.predict(&x).unwrap().to_bits());
        assert_eq!(loaded.embedding_fingerprint(), "fp");
        assert!(TrainedClassifier::from_blob(ClassifierConfig::Cnn(cfg.clone()), "", &blob[..blob.len() - 1]).is_err());
        let lstm = ClassifierConfig::Bilstm(BiLstmConfig { length: 32, dim: 4, ..BiLstmConfig::default() });
        assert!(TrainedClassifier::from_blob(lstm, "", &blob).is_err());
        assert!(TrainedClassifier::from_blob(ClassifierConfig::Cnn(cfg), "", b"").is_err());
    }

    #[test]
    fn config_serde_is_tagged() {
        let c = ClassifierConfig::default_for(Architecture::Cnn);
        assert_eq!(c.architecture(), Architecture::Cnn);
        assert_ne!(c.fingerprint(), ClassifierConfig::default_for(Architecture::Bilstm).fingerprint());
    }
}
