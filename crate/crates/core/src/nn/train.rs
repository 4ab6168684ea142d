use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::backprop::{Backprop, DropoutMask};
use super::{adam_step, AdamState, Mlp, MlpConfig};
use crate::data::{fraction_count, Dataset};
use crate::seed;
use crate::{Error, Result};

/// Probabilities are clipped to `[LOSS_CLIP, 1 - LOSS_CLIP]` before taking logs.
pub const LOSS_CLIP: f64 = 1e-7;

pub(crate) const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_SPLIT: u64 = 2;

/// Binary cross-entropy in nats.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
    if y == 1 {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean minibatch loss (dropout on) per epoch.
    pub train_loss_per_epoch: Vec<f64>,
    /// Validation loss (dropout off) per epoch; empty without a validation split.
    pub val_loss_per_epoch: Vec<f64>,
    /// Number of epochs actually run (1-based).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

fn mean_loss(model: &Mlp, data: &Dataset, rows: &[usize]) -> f64 {
    let total: f64 = rows
        .iter()
        .map(|&i| {
            bce_loss(
                super::sigmoid(model.logit_unchecked(data.row(i), None)),
                data.label(i),
            )
        })
        .sum();
    total / rows.len() as f64
}

/// Minibatch Adam on mean binary cross-entropy with inverted dropout and early stopping.
///
/// A `validation_fraction` share of the rows (chosen by the validation seed) is held out.
/// Training batches are reshuffled every epoch; the last short batch is kept. When
/// `early_stop_patience > 0`, training stops once validation loss has not improved for that
/// many consecutive epochs, and the parameters of the best epoch are restored.
pub fn train(config: MlpConfig, data: &Dataset) -> Result<(Mlp, TrainReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if data.dim() != config.input_dim {
        return Err(Error::Shape {
            context: "training features",
            expected: config.input_dim,
            actual: data.dim(),
        });
    }
    let n = data.len();
    let n_val = fraction_count(config.validation_fraction, n);
    if n_val == 0 && config.early_stop_patience > 0 {
        return Err(Error::config(
            "early stopping needs a non-empty validation split (raise validation_fraction or set patience 0)",
        ));
    }
    if n_val >= n {
        return Err(Error::config("validation split leaves no training rows"));
    }

    let split_seed = config.validation_seed.unwrap_or(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(split_seed, STREAM_SPLIT)));
    let (val_rows, train_rows) = order.split_at(n_val);
    let mut train_rows = train_rows.to_vec();

    let mut model = super::init_from_seed(config.clone())?;
    let mut rng = seed::rng(seed::derive(config.seed, STREAM_TRAIN));
    let hp = config.adam();
    let mut adam = AdamState::new(model.param_tensors_mut().iter().map(|t| t.len()));
    let mut bp = Backprop::new(&model);

    let dim = data.dim();
    let mut batch_x = Vec::with_capacity(config.batch_size * dim);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    let mut masks = Vec::with_capacity(config.batch_size);

    let patience = config.early_stop_patience;
    let mut report = TrainReport {
        train_loss_per_epoch: Vec::new(),
        val_loss_per_epoch: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best: Option<(f64, Mlp)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.epochs {
        train_rows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train_rows.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            masks.clear();
            for &i in chunk {
                batch_x.extend_from_slice(data.row(i));
                batch_y.push(data.label(i));
                masks.push(DropoutMask::sample(&model, &mut rng));
            }
            let loss = bp.batch(&model, &batch_x, &batch_y, &masks);
            epoch_loss += loss * chunk.len() as f64;
            let grads = bp.grads.tensors();
            adam_step(&mut model.param_tensors_mut(), &grads, &mut adam, &hp)?;
        }
        report
            .train_loss_per_epoch
            .push(epoch_loss / train_rows.len() as f64);
        report.stopped_epoch = epoch;

        if n_val == 0 {
            continue;
        }
        let val_loss = mean_loss(&model, data, val_rows);
        report.val_loss_per_epoch.push(val_loss);
        if patience == 0 {
            continue;
        }
        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= patience {
                break;
            }
        }
    }

    match best {
        Some((_, best_model)) => model = best_model,
        None => report.best_epoch = report.stopped_epoch,
    }
    if model
        .layers
        .iter()
        .any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
    {
        return Err(Error::invalid("training diverged to non-finite parameters"));
    }
    Ok((model, report))
}
