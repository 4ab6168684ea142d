//! Dense ReLU network with a single sigmoid output unit.
//!
//! Weights of layer `l` are stored row-major as `fan_in × fan_out`, so the forward pass is
//! `z[j] = b[j] + Σ_i x[i]·W[i][j]`. Hidden layers use ReLU followed by inverted dropout;
//! the output layer is one logit squashed by a sigmoid.

mod adam;
mod backprop;
mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};
use crate::{Error, Result};

pub use adam::{adam_step, AdamParams, AdamState};
pub use backprop::{gradients, DropoutMask, Gradients};
pub use train::{bce_loss, train, TrainReport, LOSS_CLIP};

/// Architecture and training recipe.
///
/// Missing fields deserialize to the values of [`MlpConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Drop probability per hidden layer.
    pub dropout_rates: Vec<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Epochs without validation-loss improvement before stopping; 0 disables early stopping.
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    /// Drives initialization, batch shuffling and dropout masks.
    pub seed: u64,
    /// Drives the train/validation split. Defaults to `seed`; ensembles share one value so
    /// members see the same split and differ only in initialization and SGD noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_seed: Option<u64>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig::new(1)
    }
}

impl MlpConfig {
    /// Two hidden layers of 64 units, dropout 0.4 / 0.5, Adam at 5e-4, 50 epochs of batch 32,
    /// early stopping with patience 5 on a 10% validation split.
    pub fn new(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_dims: vec![64, 64],
            dropout_rates: vec![0.4, 0.5],
            learning_rate: 5e-4,
            epochs: 50,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            early_stop_patience: 5,
            validation_fraction: 0.1,
            seed: 0,
            validation_seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        if self.dropout_rates.len() != self.hidden_dims.len() {
            return Err(Error::config(format!(
                "{} dropout rates for {} hidden layers",
                self.dropout_rates.len(),
                self.hidden_dims.len()
            )));
        }
        if let Some(r) = self
            .dropout_rates
            .iter()
            .find(|r| !(r.is_finite() && (0.0..1.0).contains(*r)))
        {
            return Err(Error::config(format!("dropout rate {r} outside [0, 1)")));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return Err(Error::config("adam_epsilon must be positive"));
        }
        if !(self.validation_fraction.is_finite() && (0.0..1.0).contains(&self.validation_fraction))
        {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// `(fan_in, fan_out)` of every layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Weights are i.i.d. uniform on `[-L, L]` with `L = sqrt(6 / (fan_in + fan_out))`,
/// row-major `fan_in × fan_out`.
pub fn glorot_init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Vec<f64> {
    let limit = glorot_limit(fan_in, fan_out);
    (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect()
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub(crate) fan_in: usize,
    pub(crate) fan_out: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl Dense {
    #[inline]
    fn affine(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
    }
}

/// Trained (or freshly initialized) network parameters together with their recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) layers: Vec<Dense>,
    config: MlpConfig,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    };
    // keep p strictly inside (0, 1) for saturated logits
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl Mlp {
    /// Glorot-uniform weights and zero biases drawn from `rng`.
    pub fn init(config: MlpConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| Dense {
                fan_in,
                fan_out,
                weights: glorot_init(fan_in, fan_out, rng),
                biases: vec![0.0; fan_out],
            })
            .collect();
        Ok(Mlp { layers, config })
    }

    /// Network with every weight and bias equal to zero.
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| Dense {
                fan_in,
                fan_out,
                weights: vec![0.0; fan_in * fan_out],
                biases: vec![0.0; fan_out],
            })
            .collect();
        Ok(Mlp { layers, config })
    }

    /// Rebuild a network from per-layer row-major weight matrices and bias vectors.
    pub fn from_parts(
        config: MlpConfig,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        if weights.len() != shapes.len() {
            return Err(Error::Shape {
                context: "weight matrices",
                expected: shapes.len(),
                actual: weights.len(),
            });
        }
        if biases.len() != shapes.len() {
            return Err(Error::Shape {
                context: "bias vectors",
                expected: shapes.len(),
                actual: biases.len(),
            });
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for ((&(fan_in, fan_out), w), b) in shapes.iter().zip(weights).zip(biases) {
            if w.len() != fan_in {
                return Err(Error::Shape {
                    context: "weight rows",
                    expected: fan_in,
                    actual: w.len(),
                });
            }
            let mut flat = Vec::with_capacity(fan_in * fan_out);
            for row in w {
                if row.len() != fan_out {
                    return Err(Error::Shape {
                        context: "weight columns",
                        expected: fan_out,
                        actual: row.len(),
                    });
                }
                flat.extend(row);
            }
            if b.len() != fan_out {
                return Err(Error::Shape {
                    context: "bias length",
                    expected: fan_out,
                    actual: b.len(),
                });
            }
            if flat.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite parameter"));
            }
            layers.push(Dense {
                fan_in,
                fan_out,
                weights: flat,
                biases: b,
            });
        }
        Ok(Mlp { layers, config })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    /// Weight matrices as nested `fan_in × fan_out` rows.
    pub fn weight_matrices(&self) -> Vec<Vec<Vec<f64>>> {
        self.layers
            .iter()
            .map(|l| l.weights.chunks(l.fan_out).map(|r| r.to_vec()).collect())
            .collect()
    }

    pub fn bias_vectors(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| l.biases.clone()).collect()
    }

    pub(crate) fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub(crate) fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::Shape {
                context: "input features",
                expected: self.config.input_dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite input feature"));
        }
        Ok(())
    }

    /// Output logit under an optional fixed dropout mask.
    pub fn forward_logit(&self, x: &[f64], mask: Option<&DropoutMask>) -> Result<f64> {
        self.check_input(x)?;
        if let Some(m) = mask {
            m.check(self)?;
        }
        Ok(self.logit_unchecked(x, mask))
    }

    pub(crate) fn logit_unchecked(&self, x: &[f64], mask: Option<&DropoutMask>) -> f64 {
        let mut current: Vec<f64> = x.to_vec();
        let mut next = Vec::new();
        let hidden = self.hidden_count();
        for (l, layer) in self.layers.iter().enumerate() {
            next.clear();
            next.resize(layer.fan_out, 0.0);
            layer.affine(&current, &mut next);
            if l < hidden {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
                if let Some(m) = mask {
                    for (v, s) in next.iter_mut().zip(&m.scales[l]) {
                        *v *= s;
                    }
                }
            }
            core::mem::swap(&mut current, &mut next);
        }
        current[0]
    }

    /// Class-1 probability. With `dropout_active`, every hidden unit of layer `l` is zeroed
    /// with probability `dropout_rates[l]` and survivors are scaled by `1 / (1 - rate)`;
    /// a fresh mask is drawn from `rng` for every call.
    pub fn forward(&self, x: &[f64], dropout_active: bool, rng: &mut Rng) -> Result<f64> {
        self.check_input(x)?;
        let mask = dropout_active.then(|| DropoutMask::sample(self, rng));
        Ok(sigmoid(self.logit_unchecked(x, mask.as_ref())))
    }

    /// Deterministic class-1 probability (dropout off).
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(sigmoid(self.logit_unchecked(x, None)))
    }
}

/// Fresh network for `config`, initialized from `config.seed`.
pub fn init_from_seed(config: MlpConfig) -> Result<Mlp> {
    let mut rng = seed::rng(seed::derive(config.seed, train::STREAM_INIT));
    Mlp::init(config, &mut rng)
}
