use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::{glorot_uniform, Layer, Param, Tensor3};
use crate::math;
use crate::tensor::gemm;

/// Output length and left padding of a "same"-padded convolution: the
/// output has `ceil(len / stride)` positions and any odd padding goes on
/// the right.
pub fn same_padding(len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(len);
    (out, total / 2)
}

/// 1-D convolution over the `len` axis with "same" padding, computed as an
/// im2col product. Kernel layout: `(kernel · inputs) × filters`, tap-major.
pub struct Conv1d {
    pub inputs: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub kernel: Param,
    pub bias: Param,
    cache: Option<(Vec<f32>, usize)>,
}

impl Conv1d {
    pub fn new(rng: &mut ChaCha8Rng, inputs: usize, filters: usize, kernel_size: usize, stride: usize) -> Self {
        let n = kernel_size * inputs * filters;
        Conv1d {
            inputs,
            filters,
            kernel_size,
            stride,
            kernel: Param::new(glorot_uniform(rng, n, kernel_size * inputs, kernel_size * filters)),
            bias: Param::zeros(filters),
            cache: None,
        }
    }

    pub fn param_count(inputs: usize, filters: usize, kernel_size: usize) -> usize {
        kernel_size * inputs * filters + filters
    }

    pub fn output_len(&self, len: usize) -> usize {
        same_padding(len, self.kernel_size, self.stride).0
    }

    fn im2col(&self, x: &Tensor3) -> (Vec<f32>, usize) {
        let (out, pad) = same_padding(x.len, self.kernel_size, self.stride);
        let patch = self.kernel_size * self.inputs;
        let mut cols = vec![0.0; x.batch * out * patch];
        for b in 0..x.batch {
            for p in 0..out {
                let row = &mut cols[(b * out + p) * patch..(b * out + p + 1) * patch];
                for k in 0..self.kernel_size {
                    let t = (p * self.stride + k) as isize - pad as isize;
                    if t >= 0 && (t as usize) < x.len {
                        row[k * self.inputs..(k + 1) * self.inputs].copy_from_slice(x.at(b, t as usize));
                    }
                }
            }
        }
        (cols, out)
    }

    fn apply(&self, x: &Tensor3) -> (Tensor3, Vec<f32>) {
        assert_eq!(x.width, self.inputs, "conv input width");
        let (cols, out) = self.im2col(x);
        let rows = x.batch * out;
        let mut y = Tensor3::zeros(x.batch, out, self.filters);
        for r in 0..rows {
            y.data[r * self.filters..(r + 1) * self.filters].copy_from_slice(&self.bias.value);
        }
        let patch = self.kernel_size * self.inputs;
        gemm(rows, patch, self.filters, &cols, false, &self.kernel.value, false, 1.0, &mut y.data);
        (y, cols)
    }
}

impl Layer for Conv1d {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        let (y, cols) = self.apply(&x);
        self.cache = Some((cols, x.len));
        y
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        self.apply(&x).0
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let (cols, len) = self.cache.take().expect("conv backward without training forward");
        let (batch, out) = (grad.batch, grad.len);
        let rows = batch * out;
        let patch = self.kernel_size * self.inputs;
        gemm(patch, rows, self.filters, &cols, true, &grad.data, false, 1.0, &mut self.kernel.grad);
        for r in 0..rows {
            for (bg, g) in self.bias.grad.iter_mut().zip(&grad.data[r * self.filters..(r + 1) * self.filters]) {
                *bg += g;
            }
        }
        let mut dcols = vec![0.0; rows * patch];
        gemm(rows, self.filters, patch, &grad.data, false, &self.kernel.value, true, 0.0, &mut dcols);
        let (_, pad) = same_padding(len, self.kernel_size, self.stride);
        let mut gx = Tensor3::zeros(batch, len, self.inputs);
        for b in 0..batch {
            for p in 0..out {
                let row = &dcols[(b * out + p) * patch..(b * out + p + 1) * patch];
                for k in 0..self.kernel_size {
                    let t = (p * self.stride + k) as isize - pad as isize;
                    if t >= 0 && (t as usize) < len {
                        let dst = gx.at_mut(b, t as usize);
                        dst.iter_mut().zip(&row[k * self.inputs..(k + 1) * self.inputs]).for_each(|(d, s)| *d += s);
                    }
                }
            }
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernel, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.kernel, &self.bias]
    }
}

/// Per-channel batch normalization over the batch and `len` axes. Running
/// statistics move as `running = momentum · running + (1 - momentum) · batch`.
pub struct BatchNorm1d {
    pub channels: usize,
    pub momentum: f32,
    pub epsilon: f32,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    cache: Option<(Vec<f32>, Vec<f32>)>,
}

impl BatchNorm1d {
    pub fn new(channels: usize, momentum: f32, epsilon: f32) -> Self {
        BatchNorm1d {
            channels,
            momentum,
            epsilon,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::zeros(channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    /// Trainable plus running-statistic values.
    pub fn param_count(channels: usize) -> usize {
        4 * channels
    }
}

impl Layer for BatchNorm1d {
    fn name(&self) -> &'static str {
        "batch_norm"
    }

    fn infer(&self, mut x: Tensor3) -> Tensor3 {
        let c = self.channels;
        assert_eq!(x.width, c, "batch-norm channels");
        for r in 0..x.rows() {
            for j in 0..c {
                let v = &mut x.data[r * c + j];
                let inv = 1.0 / math::sqrt(self.running_var[j] + self.epsilon);
                *v = (*v - self.running_mean[j]) * inv * self.gamma.value[j] + self.beta.value[j];
            }
        }
        x
    }

    fn forward(&mut self, mut x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        let c = self.channels;
        assert_eq!(x.width, c, "batch-norm channels");
        let n = x.rows();
        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        for row in x.data.chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for r in 0..n {
            for j in 0..c {
                let d = x.data[r * c + j] as f64 - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / math::sqrt(*v as f32 + self.epsilon)).collect();
        let mut xhat = vec![0.0; n * c];
        for r in 0..n {
            for j in 0..c {
                let k = r * c + j;
                xhat[k] = (x.data[k] - mean[j] as f32) * inv_std[j];
                x.data[k] = xhat[k] * self.gamma.value[j] + self.beta.value[j];
            }
        }
        let unbiased = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
        for j in 0..c {
            let m = self.momentum;
            self.running_mean[j] = m * self.running_mean[j] + (1.0 - m) * mean[j] as f32;
            self.running_var[j] = m * self.running_var[j] + (1.0 - m) * (var[j] * unbiased) as f32;
        }
        self.cache = Some((xhat, inv_std));
        x
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let (xhat, inv_std) = self.cache.take().expect("batch-norm backward without training forward");
        let c = self.channels;
        let n = grad.rows();
        let mut sum_g = vec![0.0f64; c];
        let mut sum_gx = vec![0.0f64; c];
        for r in 0..n {
            for j in 0..c {
                let k = r * c + j;
                sum_g[j] += grad.data[k] as f64;
                sum_gx[j] += (grad.data[k] * xhat[k]) as f64;
            }
        }
        for j in 0..c {
            self.beta.grad[j] += sum_g[j] as f32;
            self.gamma.grad[j] += sum_gx[j] as f32;
        }
        let mut gx = Tensor3::zeros(grad.batch, grad.len, c);
        let inv_n = 1.0 / n as f32;
        for r in 0..n {
            for j in 0..c {
                let k = r * c + j;
                let g = grad.data[k];
                gx.data[k] = self.gamma.value[j]
                    * inv_std[j]
                    * (g - inv_n * sum_g[j] as f32 - xhat[k] * inv_n * sum_gx[j] as f32);
            }
        }
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f32>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }

    fn buffers(&self) -> Vec<&Vec<f32>> {
        vec![&self.running_mean, &self.running_var]
    }
}

/// Non-overlapping max pooling with window 2 and "valid" padding, so the
/// length becomes `floor(len / 2)`.
#[derive(Default)]
pub struct MaxPool1d {
    argmax: Vec<usize>,
    len: usize,
}

impl MaxPool1d {
    pub fn new() -> Self {
        MaxPool1d::default()
    }

    pub fn output_len(len: usize) -> usize {
        len / 2
    }
}

impl MaxPool1d {
    fn run(x: &Tensor3, keep: bool) -> (Tensor3, Vec<usize>) {
        let out = x.len / 2;
        let w = x.width;
        let mut y = Tensor3::zeros(x.batch, out, w);
        let mut argmax = Vec::with_capacity(if keep { y.data.len() } else { 0 });
        for b in 0..x.batch {
            for p in 0..out {
                let (l, r) = (x.at(b, 2 * p), x.at(b, 2 * p + 1));
                let dst = y.at_mut(b, p);
                for j in 0..w {
                    // ties go to the earlier position
                    let right = r[j] > l[j];
                    dst[j] = if right { r[j] } else { l[j] };
                    if keep {
                        argmax.push(((b * x.len) + 2 * p + usize::from(right)) * w + j);
                    }
                }
            }
        }
        (y, argmax)
    }
}

impl Layer for MaxPool1d {
    fn name(&self) -> &'static str {
        "max_pool"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        let (y, argmax) = MaxPool1d::run(&x, true);
        self.argmax = argmax;
        self.len = x.len;
        y
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        MaxPool1d::run(&x, false).0
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let mut gx = Tensor3::zeros(grad.batch, self.len, grad.width);
        for (g, &k) in grad.data.iter().zip(&self.argmax) {
            gx.data[k] += g;
        }
        gx
    }
}
