use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::{glorot_uniform, orthogonal, Layer, Param, Tensor3};
use crate::math;
use crate::tensor::gemm;

/// One LSTM direction. Gate blocks are laid out `[i, f, g, o]` along the
/// `4·units` axis of both kernels and the bias.
pub struct Lstm {
    pub inputs: usize,
    pub units: usize,
    pub reverse: bool,
    pub return_sequences: bool,
    /// `inputs × 4·units`
    pub kernel: Param,
    /// `units × 4·units`
    pub recurrent: Param,
    pub bias: Param,
    cache: Option<LstmCache>,
}

struct LstmCache {
    input: Tensor3,
    /// Per processing step: activated gates `batch × 4·units`.
    gates: Vec<Vec<f32>>,
    /// Per processing step: cell state after the step, `batch × units`.
    cells: Vec<Vec<f32>>,
    /// Per processing step: hidden state after the step.
    hidden: Vec<Vec<f32>>,
}

impl Lstm {
    pub fn new(rng: &mut ChaCha8Rng, inputs: usize, units: usize, reverse: bool, return_sequences: bool) -> Self {
        let g = 4 * units;
        let mut bias = vec![0.0; g];
        // unit forget bias
        bias[units..2 * units].iter_mut().for_each(|b| *b = 1.0);
        Lstm {
            inputs,
            units,
            reverse,
            return_sequences,
            kernel: Param::new(glorot_uniform(rng, inputs * g, inputs, g)),
            recurrent: Param::new(orthogonal(rng, units, g)),
            bias: Param::new(bias),
            cache: None,
        }
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        4 * units * (inputs + units + 1)
    }

    fn time_of(&self, step: usize, len: usize) -> usize {
        if self.reverse { len - 1 - step } else { step }
    }

    /// All hidden states indexed by time, `batch × len × units`.
    fn sequence_output(&self, hidden: &[Vec<f32>], batch: usize, len: usize) -> Tensor3 {
        let h = self.units;
        let mut y = Tensor3::zeros(batch, len, h);
        for (s, hs) in hidden.iter().enumerate() {
            let t = self.time_of(s, len);
            for b in 0..batch {
                y.at_mut(b, t).copy_from_slice(&hs[b * h..(b + 1) * h]);
            }
        }
        y
    }
}

impl Lstm {
    fn run(&self, x: Tensor3, keep: bool) -> (Tensor3, Option<LstmCache>) {
        assert_eq!(x.width, self.inputs, "lstm input width");
        let (batch, len, h) = (x.batch, x.len, self.units);
        let g4 = 4 * h;
        // input projections for every (batch, time) row at once
        let mut pre = vec![0.0; x.rows() * g4];
        for r in 0..x.rows() {
            pre[r * g4..(r + 1) * g4].copy_from_slice(&self.bias.value);
        }
        gemm(x.rows(), self.inputs, g4, &x.data, false, &self.kernel.value, false, 1.0, &mut pre);

        let mut gates_all = Vec::with_capacity(len);
        let mut cells = Vec::with_capacity(len);
        let mut hidden: Vec<Vec<f32>> = Vec::with_capacity(len);
        let mut h_prev = vec![0.0; batch * h];
        let mut c_prev = vec![0.0; batch * h];
        let mut z = vec![0.0; batch * g4];
        for s in 0..len {
            let t = self.time_of(s, len);
            for b in 0..batch {
                let r = b * len + t;
                z[b * g4..(b + 1) * g4].copy_from_slice(&pre[r * g4..(r + 1) * g4]);
            }
            gemm(batch, h, g4, &h_prev, false, &self.recurrent.value, false, 1.0, &mut z);
            let mut c = vec![0.0; batch * h];
            let mut hn = vec![0.0; batch * h];
            for b in 0..batch {
                let zb = &mut z[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let i = math::sigmoid(zb[j]);
                    let f = math::sigmoid(zb[h + j]);
                    let g = math::tanh(zb[2 * h + j]);
                    let o = math::sigmoid(zb[3 * h + j]);
                    zb[j] = i;
                    zb[h + j] = f;
                    zb[2 * h + j] = g;
                    zb[3 * h + j] = o;
                    let cv = f * c_prev[b * h + j] + i * g;
                    c[b * h + j] = cv;
                    hn[b * h + j] = o * math::tanh(cv);
                }
            }
            if keep {
                gates_all.push(z.clone());
                cells.push(c.clone());
            }
            c_prev = c;
            hidden.push(hn.clone());
            h_prev = hn;
        }

        let y = if self.return_sequences {
            self.sequence_output(&hidden, batch, len)
        } else {
            Tensor3::from_vec(batch, 1, h, h_prev)
        };
        let cache = keep.then_some(LstmCache { input: x, gates: gates_all, cells, hidden });
        (y, cache)
    }
}


impl Layer for Lstm {
    fn name(&self) -> &'static str {
        "lstm"
    }

    fn forward(&mut self, x: Tensor3, _rng: &mut ChaCha8Rng) -> Tensor3 {
        let (y, cache) = self.run(x, true);
        self.cache = cache;
        y
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        self.run(x, false).0
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let cache = self.cache.take().expect("lstm backward without training forward");
        let x = &cache.input;
        let (batch, len, h) = (x.batch, x.len, self.units);
        let g4 = 4 * h;
        let mut d_pre = vec![0.0; x.rows() * g4];
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut dz = vec![0.0; batch * g4];
        let zeros = vec![0.0; batch * h];

        for s in (0..len).rev() {
            let t = self.time_of(s, len);
            let gates = &cache.gates[s];
            let c = &cache.cells[s];
            let c_prev = if s > 0 { &cache.cells[s - 1] } else { &zeros };
            let h_prev = if s > 0 { &cache.hidden[s - 1] } else { &zeros };
            for b in 0..batch {
                for j in 0..h {
                    let k = b * h + j;
                    let mut dh = dh_next[k];
                    if self.return_sequences {
                        dh += grad.at(b, t)[j];
                    } else if s == len - 1 {
                        dh += grad.at(b, 0)[j];
                    }
                    let gb = &gates[b * g4..(b + 1) * g4];
                    let (i, f, g, o) = (gb[j], gb[h + j], gb[2 * h + j], gb[3 * h + j]);
                    let tc = math::tanh(c[k]);
                    let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                    let dzb = &mut dz[b * g4..(b + 1) * g4];
                    dzb[j] = dc * g * i * (1.0 - i);
                    dzb[h + j] = dc * c_prev[k] * f * (1.0 - f);
                    dzb[2 * h + j] = dc * i * (1.0 - g * g);
                    dzb[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let r = b * len + t;
                d_pre[r * g4..(r + 1) * g4].copy_from_slice(&dz[b * g4..(b + 1) * g4]);
            }
            if s > 0 {
                gemm(h, batch, g4, h_prev, true, &dz, false, 1.0, &mut self.recurrent.grad);
            }
            gemm(batch, g4, h, &dz, false, &self.recurrent.value, true, 0.0, &mut dh_next);
        }

        for r in 0..x.rows() {
            for (bg, d) in self.bias.grad.iter_mut().zip(&d_pre[r * g4..(r + 1) * g4]) {
                *bg += d;
            }
        }
        gemm(self.inputs, x.rows(), g4, &x.data, true, &d_pre, false, 1.0, &mut self.kernel.grad);
        let mut gx = Tensor3::zeros(batch, len, self.inputs);
        gemm(x.rows(), g4, self.inputs, &d_pre, false, &self.kernel.value, true, 0.0, &mut gx.data);
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernel, &mut self.recurrent, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.kernel, &self.recurrent, &self.bias]
    }
}

/// Forward and backward LSTMs over the same input with concatenated
/// outputs: `[forward | backward]`, `2·units` wide. Without
/// `return_sequences` the output is the final state of each direction
/// (the backward direction ends at time 0).
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new(rng: &mut ChaCha8Rng, inputs: usize, units: usize, return_sequences: bool) -> Self {
        BiLstm {
            forward: Lstm::new(rng, inputs, units, false, return_sequences),
            backward: Lstm::new(rng, inputs, units, true, return_sequences),
        }
    }

    pub fn units(&self) -> usize {
        self.forward.units
    }

    pub fn param_count(inputs: usize, units: usize) -> usize {
        2 * Lstm::param_count(inputs, units)
    }
}

fn concat_width(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let mut y = Tensor3::zeros(a.batch, a.len, a.width + b.width);
    for bi in 0..a.batch {
        for t in 0..a.len {
            let row = y.at_mut(bi, t);
            row[..a.width].copy_from_slice(a.at(bi, t));
            row[a.width..].copy_from_slice(b.at(bi, t));
        }
    }
    y
}

fn split_width(x: &Tensor3, left: usize) -> (Tensor3, Tensor3) {
    let right = x.width - left;
    let mut a = Tensor3::zeros(x.batch, x.len, left);
    let mut b = Tensor3::zeros(x.batch, x.len, right);
    for bi in 0..x.batch {
        for t in 0..x.len {
            let row = x.at(bi, t);
            a.at_mut(bi, t).copy_from_slice(&row[..left]);
            b.at_mut(bi, t).copy_from_slice(&row[left..]);
        }
    }
    (a, b)
}

impl Layer for BiLstm {
    fn name(&self) -> &'static str {
        "bilstm"
    }

    fn forward(&mut self, x: Tensor3, rng: &mut ChaCha8Rng) -> Tensor3 {
        let f = self.forward.forward(x.clone(), rng);
        let b = self.backward.forward(x, rng);
        concat_width(&f, &b)
    }

    fn infer(&self, x: Tensor3) -> Tensor3 {
        let f = self.forward.infer(x.clone());
        let b = self.backward.infer(x);
        concat_width(&f, &b)
    }

    fn backward(&mut self, grad: Tensor3) -> Tensor3 {
        let (gf, gb) = split_width(&grad, self.forward.units);
        let mut gx = self.forward.backward(gf);
        let gx2 = self.backward.backward(gb);
        gx.data.iter_mut().zip(&gx2.data).for_each(|(a, b)| *a += b);
        gx
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }
}
