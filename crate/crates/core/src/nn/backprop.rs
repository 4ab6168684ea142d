use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{sigmoid, Mlp};
use crate::seed::Rng;
use crate::{Error, Result};

/// Per-unit multipliers for every hidden layer: `0` for dropped units, `1 / (1 - rate)` for
/// survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub(crate) scales: Vec<Vec<f64>>,
}

impl DropoutMask {
    /// All-ones mask (dropout inactive).
    pub fn identity(model: &Mlp) -> Self {
        DropoutMask {
            scales: model.layers[..model.hidden_count()]
                .iter()
                .map(|l| vec![1.0; l.fan_out])
                .collect(),
        }
    }

    /// Independent Bernoulli draw for every hidden unit of every layer.
    pub fn sample(model: &Mlp, rng: &mut Rng) -> Self {
        let rates = &model.config().dropout_rates;
        let scales = model.layers[..model.hidden_count()]
            .iter()
            .zip(rates)
            .map(|(l, &rate)| {
                let keep_scale = 1.0 / (1.0 - rate);
                (0..l.fan_out)
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect()
            })
            .collect();
        DropoutMask { scales }
    }

    pub fn from_scales(scales: Vec<Vec<f64>>) -> Self {
        DropoutMask { scales }
    }

    pub fn scales(&self) -> &[Vec<f64>] {
        &self.scales
    }

    pub(crate) fn check(&self, model: &Mlp) -> Result<()> {
        let hidden = &model.layers[..model.hidden_count()];
        if self.scales.len() != hidden.len() {
            return Err(Error::Shape {
                context: "dropout mask layers",
                expected: hidden.len(),
                actual: self.scales.len(),
            });
        }
        for (s, l) in self.scales.iter().zip(hidden) {
            if s.len() != l.fan_out {
                return Err(Error::Shape {
                    context: "dropout mask width",
                    expected: l.fan_out,
                    actual: s.len(),
                });
            }
        }
        Ok(())
    }
}

/// Parameter-shaped gradient of the mean batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Row-major `fan_in × fan_out` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub(crate) fn zeros_like(model: &Mlp) -> Self {
        Gradients {
            weights: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.biases.len()])
                .collect(),
        }
    }

    /// Tensors in the same order as the model's parameters: `W0, b0, W1, b1, …`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn reset(&mut self) {
        for t in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            t.fill(0.0);
        }
    }
}

/// Reusable activation buffers for backpropagation.
pub(crate) struct Backprop {
    /// `acts[0]` is the input; `acts[l + 1]` the (masked) output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    pub(crate) grads: Gradients,
}

impl Backprop {
    pub(crate) fn new(model: &Mlp) -> Self {
        let mut acts = vec![vec![0.0; model.input_dim()]];
        acts.extend(model.layers.iter().map(|l| vec![0.0; l.fan_out]));
        Backprop {
            acts,
            pre: model.layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            delta: model.layers.iter().map(|l| vec![0.0; l.fan_out]).collect(),
            grads: Gradients::zeros_like(model),
        }
    }

    /// Accumulates the gradient of the mean BCE over `labels.len()` rows into `self.grads`
    /// and returns the mean (clipped) loss. Inputs are assumed shape-checked.
    pub(crate) fn batch(
        &mut self,
        model: &Mlp,
        features: &[f64],
        labels: &[u8],
        masks: &[DropoutMask],
    ) -> f64 {
        self.grads.reset();
        let dim = model.input_dim();
        let hidden = model.hidden_count();
        let inv_b = 1.0 / labels.len() as f64;
        let mut loss = 0.0;

        for (r, &y) in labels.iter().enumerate() {
            let mask = masks.get(r);
            self.acts[0].copy_from_slice(&features[r * dim..(r + 1) * dim]);
            for (l, layer) in model.layers.iter().enumerate() {
                let (before, after) = self.acts.split_at_mut(l + 1);
                let input = &before[l];
                let out = &mut after[0];
                layer.affine(input, &mut self.pre[l]);
                if l < hidden {
                    let scales = mask.map(|m| m.scales[l].as_slice());
                    for (j, (o, &z)) in out.iter_mut().zip(&self.pre[l]).enumerate() {
                        let s = scales.map_or(1.0, |s| s[j]);
                        *o = z.max(0.0) * s;
                    }
                } else {
                    out.copy_from_slice(&self.pre[l]);
                }
            }
            let p = sigmoid(self.acts[hidden + 1][0]);
            let yf = f64::from(y);
            loss += super::bce_loss(p, y);

            // d(mean BCE)/d(logit) for a sigmoid head is (p - y) / B
            self.delta[hidden][0] = (p - yf) * inv_b;
            for l in (0..model.layers.len()).rev() {
                let layer = &model.layers[l];
                {
                    let input = &self.acts[l];
                    let delta = &self.delta[l];
                    let gw = &mut self.grads.weights[l];
                    for (i, &a) in input.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let row = &mut gw[i * layer.fan_out..(i + 1) * layer.fan_out];
                        for (g, &d) in row.iter_mut().zip(delta) {
                            *g += a * d;
                        }
                    }
                    for (g, &d) in self.grads.biases[l].iter_mut().zip(delta) {
                        *g += d;
                    }
                }
                if l == 0 {
                    break;
                }
                // propagate into hidden layer l - 1: through W, the mask and the ReLU
                let (lower, upper) = self.delta.split_at_mut(l);
                let delta = &upper[0];
                let prev = &mut lower[l - 1];
                let scales = mask.map(|m| m.scales[l - 1].as_slice());
                for (i, d_prev) in prev.iter_mut().enumerate() {
                    if self.pre[l - 1][i] <= 0.0 {
                        *d_prev = 0.0;
                        continue;
                    }
                    let row = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                    let mut acc = 0.0;
                    for (&w, &d) in row.iter().zip(delta) {
                        acc += w * d;
                    }
                    *d_prev = acc * scales.map_or(1.0, |s| s[i]);
                }
            }
        }
        loss * inv_b
    }
}

/// Exact gradient of the mean binary cross-entropy over a batch, with the given dropout
/// masks held fixed (one mask per row; an empty slice means dropout inactive).
///
/// The derivative is taken of the unclipped loss, i.e. `∂/∂logit = p - y`.
pub fn gradients(
    model: &Mlp,
    features: &[f64],
    labels: &[u8],
    masks: &[DropoutMask],
) -> Result<Gradients> {
    check_batch(model, features, labels, masks)?;
    let mut bp = Backprop::new(model);
    bp.batch(model, features, labels, masks);
    Ok(bp.grads)
}

pub(crate) fn check_batch(
    model: &Mlp,
    features: &[f64],
    labels: &[u8],
    masks: &[DropoutMask],
) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let dim = model.input_dim();
    if features.len() != labels.len() * dim {
        return Err(Error::Shape {
            context: "batch features",
            expected: labels.len() * dim,
            actual: features.len(),
        });
    }
    if !masks.is_empty() && masks.len() != labels.len() {
        return Err(Error::Shape {
            context: "dropout masks per batch",
            expected: labels.len(),
            actual: masks.len(),
        });
    }
    for m in masks {
        m.check(model)?;
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    Ok(())
}
