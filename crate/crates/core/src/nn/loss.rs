//! Losses on a batch of single-unit logits. Both return the mean over the
//! batch of per-sample weighted losses and the gradient with respect to
//! the logits.

use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Vec<f32>,
}

/// Squared error between `sigmoid(z)` and the label.
pub fn mse_on_sigmoid(logits: &[f32], labels: &[f32], weights: Option<&[f32]>) -> LossOutput {
    let n = logits.len() as f32;
    let mut loss = 0.0f64;
    let grad = logits
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&z, &y))| {
            let w = weights.map_or(1.0, |w| w[i]);
            let p = math::sigmoid(z);
            let d = p - y;
            loss += (w * d * d) as f64;
            2.0 * w * d * p * (1.0 - p) / n
        })
        .collect();
    LossOutput { loss: loss / n as f64, grad }
}

/// Binary cross-entropy evaluated from logits without forming `ln(p)`.
pub fn bce_with_logits(logits: &[f32], labels: &[f32], weights: Option<&[f32]>) -> LossOutput {
    let n = logits.len() as f32;
    let mut loss = 0.0f64;
    let grad = logits
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (&z, &y))| {
            let w = weights.map_or(1.0, |w| w[i]);
            let l = z.max(0.0) - z * y + math::ln1p(math::exp(-z.abs()));
            loss += (w * l) as f64;
            w * (math::sigmoid(z) - y) / n
        })
        .collect();
    LossOutput { loss: loss / n as f64, grad }
}
