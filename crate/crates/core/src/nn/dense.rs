use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{glorot_uniform, Layer, Param, Tensor3};
use crate::tensor::gemm;

/// Affine map applied to every row (`len` may exceed 1).
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub kernel: Param,
    pub bias: Param,
    input: Option<Tensor3>,
}

impl Dense {
    pub fn new(rng: &mut ChaCha8Rng, inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            kernel: Param::new(glorot_uniform(rng, inputs * outputs, inputs, outputs)),
            bias: Param::zeros(outputs),
            input: None,
        }
    }
}

impl Dense {
    fn apply(&self, x: &Tensor3) -> Tensor3 {
        assert_eq!(x.width, self.inputs, "dense input width");
        let rows = x.rows();
        let mut y = Tensor3::zeros(x.batch, x.len, self.outputs);
        for r in 0..rows {
            y.data[r * self.outputs..(r + 1) * self.outputs].copy_from_slice(&self.bias.value);
        }
        gemm(rows, self.inputs, self.outputs, &x.data, false, &self.kernel.value, false, 1.0, &mut y.data);
        y
    }
}

impl Layer for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        let y = self.apply(&x);
        self.input = Some(x);
        y
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        self.apply(&x)
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let x = self.input.take().expect("dense backward without forward");
        let rows = x.rows();
        gemm(self.inputs, rows, self.outputs, &x.data, true, &grad.data, false, 1.0, &mut self.kernel.grad);
        for r in 0..rows {
            for (b, g) in self.bias.grad.iter_mut().zip(&grad.data[r * self.outputs..(r + 1) * self.outputs]) {
                *b += g;
            }
        }
        let mut gx = Tensor3::zeros(x.batch, x.len, self.inputs);
        gemm(rows, self.outputs, self.inputs, &grad.data, false, &self.kernel.value, true, 0.0, &mut gx.data);
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernel, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.kernel, &self.bias]
    }
}

/// Inverted dropout: scales kept units by `1 / (1 - rate)` during training,
/// identity at inference.
pub struct Dropout {
    pub rate: f32,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f32) -> Self {
        Dropout { rate, mask: None }
    }
}

impl Layer for Dropout {
    fn name(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, mut x: Tensor3, rng: &mut ChaCha8Rng) -> Tensor3 {
        if self.rate <= 0.0 {
            self.mask = None;
            return x;
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f32> =
            (0..x.data.len()).map(|_| if rng.random::<f32>() < keep { 1.0 / keep } else { 0.0 }).collect();
        x.data.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        self.mask = Some(mask);
        x
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        x
    }

    fn backward(&mut self, mut grad: Tensor3) -> Tensor3 {
        if let Some(mask) = self.mask.take() {
            grad.data.iter_mut().zip(&mask).for_each(|(g, m)| *g *= m);
        }
        grad
    }
}

#[derive(Default)]
pub struct Relu {
    active: Vec<bool>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }
}

impl Layer for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        self.active = x.data.iter().map(|&v| v > 0.0).collect();
        self.infer(x)
    }

    fn infer(&self, mut x: Tensor3) -> Tensor3 {
        x.data.iter_mut().for_each(|v| *v = v.max(0.0));
        x
    }

    fn backward(&mut self, mut grad: Tensor3) -> Tensor3 {
        grad.data.iter_mut().zip(&self.active).for_each(|(g, &a)| {
            if !a {
                *g = 0.0
            }
        });
        grad
    }
}

/// Mean over the `len` axis: `batch × len × width` → `batch × 1 × width`.
#[derive(Default)]
pub struct GlobalAvgPool {
    len: usize,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool::default()
    }
}

impl Layer for GlobalAvgPool {
    fn name(&self) -> &'static str {
        "global_avg_pool"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        self.len = x.len;
        self.infer(x)
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        let mut y = Tensor3::zeros(x.batch, 1, x.width);
        let scale = 1.0 / x.len as f32;
        for b in 0..x.batch {
            let out = y.at_mut(b, 0);
            for t in 0..x.len {
                out.iter_mut().zip(x.at(b, t)).for_each(|(o, v)| *o += v);
            }
            out.iter_mut().for_each(|o| *o *= scale);
        }
        y
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let mut gx = Tensor3::zeros(grad.batch, self.len, grad.width);
        let scale = 1.0 / self.len as f32;
        for b in 0..grad.batch {
            for t in 0..self.len {
                gx.at_mut(b, t).iter_mut().zip(grad.at(b, 0)).for_each(|(o, g)| *o = g * scale);
            }
        }
        gx
    }
}
