use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierConfig, TrainedClassifier};
use crate::datasets::{ClassWeights, Labeled, VectorizedWindow};
use crate::error::{Error, Result};
use crate::eval;
use crate::math;
use crate::nn::{bce_with_logits, mse_on_sigmoid, Adam, LossOutput, Tensor3};
use crate::tensor::Matrix;

/// A labeled input window.
pub trait Example: Labeled {
    fn matrix(&self) -> &Matrix;
}

impl Example for VectorizedWindow {
    fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl Example for (Matrix, u8) {
    fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Per-epoch log, 1-based epochs. All four series have one entry per
/// completed epoch; `learning_rate` is the rate used during that epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_f1: Vec<f64>,
    pub learning_rate: Vec<f64>,
    /// Last epoch that ran.
    pub stopped_epoch: usize,
    /// Epoch whose weights were restored.
    pub best_epoch: usize,
    pub early_stopped: bool,
}

impl TrainingHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

/// What the early-stopping and learning-rate rules watch.
#[derive(Clone, Copy)]
enum Monitor {
    /// Validation loss, lower is better.
    Loss,
    /// Validation F1 at 0.5, higher is better.
    F1,
}

struct Schedule {
    monitor: Monitor,
    epochs: usize,
    batch_size: usize,
    learning_rate: f32,
    patience: usize,
    /// `(factor, patience, floor)` for learning-rate reduction on plateau.
    plateau: Option<(f32, usize, f32)>,
    bce: bool,
    weighted: bool,
}

fn schedule(config: &ClassifierConfig) -> Schedule {
    match config {
        ClassifierConfig::Bilstm(c) => Schedule {
            monitor: Monitor::Loss,
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            patience: c.patience,
            plateau: None,
            bce: false,
            weighted: c.class_weighted,
        },
        ClassifierConfig::Cnn(c) => Schedule {
            monitor: Monitor::F1,
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            patience: c.patience,
            plateau: Some((c.lr_factor, c.lr_patience, c.min_learning_rate)),
            bce: true,
            weighted: true,
        },
    }
}

fn loss_fn(bce: bool, logits: &[f32], labels: &[f32], weights: Option<&[f32]>) -> LossOutput {
    if bce { bce_with_logits(logits, labels, weights) } else { mse_on_sigmoid(logits, labels, weights) }
}

/// Validation loss (unweighted) and F1 at threshold 0.5.
fn validate<E: Example>(model: &TrainedClassifier, val: &[E], bce: bool) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(val.len());
    let labels: Vec<u8> = val.iter().map(|e| e.label()).collect();
    for chunk in val.chunks(256) {
        let x = model.pack(chunk.iter().map(|e| e.matrix()))?;
        let logits = model.logits(x);
        let y: Vec<f32> = chunk.iter().map(|e| e.label() as f32).collect();
        loss += loss_fn(bce, &logits, &y, None).loss * chunk.len() as f64;
        scores.extend(logits.iter().map(|&z| math::sigmoid(z) as f64));
    }
    let c = eval::confusion(&labels, &scores, eval::DEFAULT_THRESHOLD)?;
    Ok((loss / val.len() as f64, eval::metrics(&c).f_score))
}

fn improved(monitor: Monitor, value: f64, best: Option<f64>) -> bool {
    match (monitor, best) {
        (_, None) => true,
        (Monitor::Loss, Some(b)) => value < b,
        (Monitor::F1, Some(b)) => value > b,
    }
}

/// Mini-batch Adam training with early stopping.
///
/// The BiLSTM minimizes squared error on the sigmoid output and stops on
/// validation loss; the CNN minimizes class-weighted cross-entropy, stops
/// on validation F1 and halves its learning rate when F1 plateaus. Either
/// way the returned model carries the best epoch's weights. Class weights
/// are required for the CNN and for a BiLSTM configured with
/// `class_weighted`; otherwise they are ignored.
///
/// Runs single-threaded with all randomness drawn from the configured
/// seed, so repeated calls produce identical models.
pub fn train<E: Example>(
    mut model: TrainedClassifier,
    train: &[E],
    val: &[E],
    weights: Option<&ClassWeights>,
) -> Result<(TrainedClassifier, TrainingHistory)> {
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    for e in train.iter().chain(val) {
        let want = model.input_shape();
        if e.matrix().shape() != want {
            return Err(Error::ShapeMismatch { expected: want, found: e.matrix().shape() });
        }
        if e.label() > 1 {
            return Err(Error::NonBinaryLabel(e.label()));
        }
    }
    let s = schedule(model.config());
    let weights = match (s.weighted, weights) {
        (true, Some(w)) => Some(*w),
        (true, None) => {
            return Err(Error::InvalidConfig(format!("{} training requires class weights", model.architecture())))
        }
        (false, _) => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(model.config().seed());
    rng.set_stream(1);
    let mut adam = Adam::new(s.learning_rate);
    let mut lr = s.learning_rate;
    let mut history = TrainingHistory::default();
    let mut best: Option<f64> = None;
    let mut best_state = model.net.snapshot();
    let mut stale = 0;
    let mut plateau_wait = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let (l, d) = model.input_shape();

    for epoch in 1..=s.epochs {
        order.shuffle(&mut rng);
        adam.learning_rate = lr;
        let mut epoch_loss = 0.0;
        for (bi, idx) in order.chunks(s.batch_size).enumerate() {
            let mut data = Vec::with_capacity(idx.len() * l * d);
            for &i in idx {
                data.extend_from_slice(train[i].matrix().as_slice());
            }
            let x = Tensor3::from_vec(idx.len(), l, d, data);
            let y: Vec<f32> = idx.iter().map(|&i| train[i].label() as f32).collect();
            let w: Option<Vec<f32>> = weights.map(|w| idx.iter().map(|&i| w.of(train[i].label()) as f32).collect());

            model.net.zero_grad();
            let logits = model.net.forward(x, &mut rng).data;
            let out = loss_fn(s.bce, &logits, &y, w.as_deref());
            if !out.loss.is_finite() || out.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi + 1,
                    detail: format!("loss {} over {} samples at learning rate {lr}", out.loss, idx.len()),
                });
            }
            epoch_loss += out.loss * idx.len() as f64;
            model.net.backward(Tensor3::from_vec(idx.len(), 1, 1, out.grad));
            adam.step(&mut model.net.params_mut());
        }

        let (val_loss, val_f1) = validate(&model, val, s.bce)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0, detail: format!("validation loss {val_loss}") });
        }
        history.train_loss.push(epoch_loss / train.len() as f64);
        history.val_loss.push(val_loss);
        history.val_f1.push(val_f1);
        history.learning_rate.push(lr as f64);
        history.stopped_epoch = epoch;

        let value = match s.monitor {
            Monitor::Loss => val_loss,
            Monitor::F1 => val_f1,
        };
        if improved(s.monitor, value, best) {
            best = Some(value);
            history.best_epoch = epoch;
            best_state = model.net.snapshot();
            stale = 0;
            plateau_wait = 0;
        } else {
            stale += 1;
            plateau_wait += 1;
            if let Some((factor, patience, floor)) = s.plateau {
                if plateau_wait >= patience && lr > floor {
                    lr = (lr * factor).max(floor);
                    plateau_wait = 0;
                }
            }
            if stale >= s.patience {
                history.early_stopped = true;
                break;
            }
        }
    }

    model.net.restore(&best_state);
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::super::{build_bilstm, build_cnn, BiLstmConfig, CnnConfig};
    use super::*;
    use crate::datasets::class_weights;
    use alloc::vec;
    use rand::Rng;

    /// Windows whose first feature column carries the label plus noise.
    fn toy(n: usize, l: usize, d: usize, seed: u64) -> Vec<(Matrix, u8)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let data = (0..l * d)
                    .map(|k| {
                        let noise = rng.random_range(-0.5f32..0.5);
                        if k % d == 0 { noise + if label == 1 { 1.0 } else { -1.0 } } else { noise }
                    })
                    .collect();
                (Matrix::from_vec(l, d, data), label)
            })
            .collect()
    }

    #[test]
    fn bilstm_learns_separable_toy_and_restores_best() {
        let cfg = BiLstmConfig { length: 5, dim: 3, units: 4, epochs: 30, batch_size: 8, learning_rate: 1e-2, ..BiLstmConfig::default() };
        let data = toy(32, 5, 3, 1);
        let val = toy(16, 5, 3, 2);
        let (m, h) = train(build_bilstm(cfg).unwrap(), &data, &val, None).unwrap();
        assert_eq!(h.train_loss.len(), h.stopped_epoch);
        assert_eq!(h.val_loss.len(), h.val_f1.len());
        assert!(h.stopped_epoch <= 30 && h.best_epoch >= 1);
        let (loss, _) = validate(&m, &val, false).unwrap();
        assert!((loss - h.val_loss[h.best_epoch - 1]).abs() < 1e-9);
        assert!(h.val_f1[h.best_epoch - 1] > 0.9);
    }

    #[test]
    fn early_stop_fires_on_frozen_validation_set() {
        // validation labels are unrelated to the inputs, so val loss stalls
        let cfg = BiLstmConfig { length: 4, dim: 2, units: 3, epochs: 50, batch_size: 4, learning_rate: 5e-2, ..BiLstmConfig::default() };
        let data = toy(16, 4, 2, 3);
        let mut val = toy(16, 4, 2, 4);
        for (i, v) in val.iter_mut().enumerate() {
            v.1 = u8::from(i % 4 < 2);
        }
        let (_, h) = train(build_bilstm(cfg).unwrap(), &data, &val, None).unwrap();
        assert!(h.early_stopped);
        assert!(h.stopped_epoch < 50);
        assert_eq!(h.stopped_epoch - h.best_epoch, 5);
    }

    #[test]
    fn cnn_requires_weights_and_halves_lr_on_plateau() {
        let cfg = CnnConfig { length: 32, dim: 2, epochs: 20, batch_size: 8, ..CnnConfig::default() };
        let data = toy(16, 32, 2, 5);
        let mut val = toy(8, 32, 2, 6);
        for (i, v) in val.iter_mut().enumerate() {
            v.1 = u8::from(i % 4 < 2);
        }
        assert!(train(build_cnn(cfg.clone()).unwrap(), &data, &val, None).is_err());
        let w = class_weights(&data).unwrap();
        let (_, h) = train(build_cnn(cfg).unwrap(), &data, &val, Some(&w)).unwrap();
        assert!(h.early_stopped);
        assert_eq!(h.stopped_epoch - h.best_epoch, 3);
        // two stale epochs, then the third runs at half the rate
        let b = h.best_epoch - 1;
        assert_eq!(h.learning_rate[b + 1], h.learning_rate[b]);
        assert_eq!(h.learning_rate[b + 2], h.learning_rate[b]);
        assert!((h.learning_rate[b + 3] - 0.5 * h.learning_rate[b]).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = BiLstmConfig { length: 4, dim: 2, units: 3, epochs: 3, batch_size: 4, ..BiLstmConfig::default() };
        let data = toy(12, 4, 2, 7);
        let run = || {
            let (m, h) = train(build_bilstm(cfg.clone()).unwrap(), &data, &data, None).unwrap();
            (m.to_blob(), h)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = BiLstmConfig { length: 4, dim: 2, units: 3, epochs: 1, ..BiLstmConfig::default() };
        let data = toy(4, 4, 2, 8);
        let empty: Vec<(Matrix, u8)> = vec![];
        assert!(matches!(train(build_bilstm(cfg.clone()).unwrap(), &empty, &data, None), Err(Error::Empty(_))));
        let wrong = toy(4, 5, 2, 8);
        assert!(matches!(train(build_bilstm(cfg).unwrap(), &data, &wrong, None), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn nan_inputs_abort_with_diagnostics() {
        let cfg = BiLstmConfig { length: 4, dim: 2, units: 3, epochs: 2, ..BiLstmConfig::default() };
        let mut data = toy(4, 4, 2, 9);
        data[0].0.as_mut_slice()[0] = f32::NAN;
        let err = train(build_bilstm(cfg).unwrap(), &data, &data, None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, batch: 1, .. }));
    }
}
