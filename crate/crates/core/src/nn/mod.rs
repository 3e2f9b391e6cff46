//! Minimal layers with hand-written backward passes, enough for the two
//! classifiers in [`crate::models`].
//!
//! Activations travel as [`Tensor3`] values shaped `batch × len × width`;
//! dense layers see `len == 1`. Every layer caches what its backward pass
//! needs during a training-mode forward call.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;

mod adam;
mod conv;
mod dense;
mod loss;
mod lstm;

pub use adam::Adam;
pub use conv::{same_padding, BatchNorm1d, Conv1d, MaxPool1d};
pub use dense::{Dense, Dropout, GlobalAvgPool, Relu};
pub use loss::{bce_with_logits, mse_on_sigmoid, LossOutput};
pub use lstm::{BiLstm, Lstm};

/// Row-major `batch × len × width` activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub batch: usize,
    pub len: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, len: usize, width: usize) -> Self {
        Tensor3 { batch, len, width, data: vec![0.0; batch * len * width] }
    }

    pub fn from_vec(batch: usize, len: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), batch * len * width, "tensor data does not match its shape");
        Tensor3 { batch, len, width, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.len, self.width)
    }

    /// Number of `width`-wide rows, `batch · len`.
    pub fn rows(&self) -> usize {
        self.batch * self.len
    }

    pub fn at(&self, b: usize, t: usize) -> &[f32] {
        let o = (b * self.len + t) * self.width;
        &self.data[o..o + self.width]
    }

    pub fn at_mut(&mut self, b: usize, t: usize) -> &mut [f32] {
        let o = (b * self.len + t) * self.width;
        &mut self.data[o..o + self.width]
    }
}

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn new(value: Vec<f32>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { value, grad }
    }

    pub fn zeros(n: usize) -> Self {
        Param::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

pub trait Layer {
    fn name(&self) -> &'static str;

    /// Training-mode pass: samples dropout masks from `rng`, uses batch
    /// statistics, and caches what [`Layer::backward`] needs.
    fn forward(&mut self, x: Tensor3, rng: &mut ChaCha8Rng) -> Tensor3;

    /// Inference-mode pass; no state changes.
    fn infer(&self, x: Tensor3) -> Tensor3;

    /// Accumulates parameter gradients and returns the input gradient.
    /// Only valid right after [`Layer::forward`].
    fn backward(&mut self, grad: Tensor3) -> Tensor3;

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    /// Non-trainable state that must survive a save/load (running statistics).
    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        Vec::new()
    }

    fn buffers(&self) -> Vec<&Vec<f32>> {
        Vec::new()
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer + Send + Sync>>,
}

impl Sequential {
    pub fn new() -> Self {
        Sequential { layers: Vec::new() }
    }

    pub fn push(&mut self, layer: impl Layer + Send + Sync + 'static) {
        self.layers.push(Box::new(layer));
    }

    pub fn forward(&mut self, mut x: Tensor3, rng: &mut ChaCha8Rng) -> Tensor3 {
        for layer in &mut self.layers {
            x = layer.forward(x, rng);
        }
        x
    }

    pub fn infer(&self, mut x: Tensor3) -> Tensor3 {
        for layer in &self.layers {
            x = layer.infer(x);
        }
        x
    }

    pub fn backward(&mut self, mut grad: Tensor3) -> Tensor3 {
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(grad);
        }
        grad
    }

    /// Runs one inference pass and records each layer's output
    /// `(len, width)`.
    pub fn trace(&self, mut x: Tensor3) -> Vec<(&'static str, (usize, usize))> {
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            x = layer.infer(x);
            out.push((layer.name(), (x.len, x.width)));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        self.layers.iter_mut().flat_map(|l| l.buffers_mut()).collect()
    }

    pub fn buffers(&self) -> Vec<&Vec<f32>> {
        self.layers.iter().flat_map(|l| l.buffers()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Values of all parameters and buffers, in a fixed order.
    pub fn snapshot(&self) -> Vec<Vec<f32>> {
        let mut out: Vec<Vec<f32>> = self.params().iter().map(|p| p.value.clone()).collect();
        out.extend(self.buffers().into_iter().cloned());
        out
    }

    /// Inverse of [`Sequential::snapshot`]; lengths must match.
    pub fn restore(&mut self, state: &[Vec<f32>]) -> bool {
        let current = self.snapshot();
        if current.len() != state.len() || current.iter().zip(state).any(|(a, b)| a.len() != b.len()) {
            return false;
        }
        let mut it = state.iter();
        for p in self.params_mut() {
            p.value.copy_from_slice(it.next().unwrap());
        }
        for b in self.buffers_mut() {
            b.copy_from_slice(it.next().unwrap());
        }
        true
    }
}

/// Glorot-uniform values for a kernel with the given fans.
pub(crate) fn glorot_uniform(rng: &mut ChaCha8Rng, n: usize, fan_in: usize, fan_out: usize) -> Vec<f32> {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f32);
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

/// A `rows × cols` matrix with orthonormal rows (or columns, whichever is
/// shorter), by Gram-Schmidt on Gaussian samples.
pub(crate) fn orthogonal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f32> {
    let (k, n) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for u in &basis {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = math::sqrt64(v.iter().map(|a| a * a).sum());
        if norm > 1e-6 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, u) in basis.iter().enumerate() {
        for (j, &x) in u.iter().enumerate() {
            if rows <= cols {
                out[i * cols + j] = x as f32;
            } else {
                out[j * cols + i] = x as f32;
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (r, c) = (5, 20);
        let m = orthogonal(&mut rng, r, c);
        for i in 0..r {
            for j in 0..r {
                let d: f32 = (0..c).map(|k| m[i * c + k] * m[j * c + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn snapshot_restore_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Sequential::new();
        net.push(Dense::new(&mut rng, 3, 2));
        net.push(BatchNorm1d::new(2, 0.99, 1e-3));
        let snap = net.snapshot();
        net.params_mut()[0].value[0] += 1.0;
        assert!(net.restore(&snap));
        assert_eq!(net.snapshot(), snap);
        assert!(!net.restore(&snap[1..]));
    }
}
