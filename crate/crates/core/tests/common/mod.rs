//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use abstain_core::nn::{DropoutMask, Gradients};
use abstain_core::rejection::{Evaluated, EvaluatedSet};
use abstain_core::seed::Rng;
use abstain_core::uncertainty::{PredictiveMatrix, PredictorKind};
use abstain_core::{Mlp, MlpConfig};
use rand::Rng as _;

/// Mean BCE computed straight from the logit, no clipping.
pub fn batch_loss(model: &Mlp, features: &[f64], labels: &[u8], masks: &[DropoutMask]) -> f64 {
    let dim = model.input_dim();
    let mut total = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let x = &features[r * dim..(r + 1) * dim];
        let z = model.forward_logit(x, masks.get(r)).unwrap();
        let p = 1.0 / (1.0 + (-z).exp());
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / labels.len() as f64
}

/// Central finite differences of [`batch_loss`], tensors ordered `W0, b0, W1, b1, …`.
pub fn finite_difference(
    model: &Mlp,
    features: &[f64],
    labels: &[u8],
    masks: &[DropoutMask],
    step: f64,
) -> Vec<Vec<f64>> {
    let weights = model.weight_matrices();
    let biases = model.bias_vectors();
    let rebuild = |w: Vec<Vec<Vec<f64>>>, b: Vec<Vec<f64>>| {
        Mlp::from_parts(model.config().clone(), w, b).unwrap()
    };
    let mut out = Vec::new();
    for l in 0..weights.len() {
        let mut gw = Vec::new();
        for i in 0..weights[l].len() {
            for j in 0..weights[l][i].len() {
                let mut plus = weights.clone();
                plus[l][i][j] += step;
                let mut minus = weights.clone();
                minus[l][i][j] -= step;
                let lp = batch_loss(&rebuild(plus, biases.clone()), features, labels, masks);
                let lm = batch_loss(&rebuild(minus, biases.clone()), features, labels, masks);
                gw.push((lp - lm) / (2.0 * step));
            }
        }
        out.push(gw);
        let mut gb = Vec::new();
        for j in 0..biases[l].len() {
            let mut plus = biases.clone();
            plus[l][j] += step;
            let mut minus = biases.clone();
            minus[l][j] -= step;
            let lp = batch_loss(&rebuild(weights.clone(), plus), features, labels, masks);
            let lm = batch_loss(&rebuild(weights.clone(), minus), features, labels, masks);
            gb.push((lp - lm) / (2.0 * step));
        }
        out.push(gb);
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|)` over all entries; entries where both are exactly zero
/// (dead units) count as agreement.
pub fn max_relative_error(analytic: &Gradients, numeric: &[Vec<f64>]) -> f64 {
    analytic
        .tensors()
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.iter().zip(n))
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Random architecture with at most 2 hidden layers of at most 8 units.
pub fn tiny_config(rng: &mut Rng, seed: u64) -> MlpConfig {
    let layers = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=8)).collect();
    MlpConfig {
        input_dim: rng.random_range(1..=4),
        dropout_rates: hidden.iter().map(|_| rng.random_range(0.0..0.6)).collect(),
        hidden_dims: hidden,
        seed,
        ..MlpConfig::new(1)
    }
}

/// Network with every weight and bias uniform on `[-1, 1]`. Non-zero biases keep
/// pre-activations off the ReLU kink even when a whole layer is dropped.
pub fn random_model(rng: &mut Rng, config: MlpConfig) -> Mlp {
    let shapes = config.layer_shapes();
    let weights = shapes
        .iter()
        .map(|&(i, o)| {
            (0..i)
                .map(|_| (0..o).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    let biases = shapes
        .iter()
        .map(|&(_, o)| (0..o).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Mlp::from_parts(config, weights, biases).unwrap()
}

/// Random binary predictive matrix with `rows` samples; a share of rows are saturated.
pub fn random_matrix(rng: &mut Rng, rows: usize) -> PredictiveMatrix {
    let p1: Vec<f64> = (0..rows)
        .map(|_| match rng.random_range(0..6) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    PredictiveMatrix::from_class1(&p1, PredictorKind::McDropout).unwrap()
}

/// Random evaluated set (`n ∈ [1, max_n]`) drawing uncertainties from a small pool so that
/// ties are common.
pub fn random_evaluated_set(rng: &mut Rng, max_n: usize) -> EvaluatedSet {
    let n = rng.random_range(1..=max_n);
    let pool: Vec<f64> = (0..rng.random_range(1..=8))
        .map(|_| rng.random::<f64>())
        .collect();
    let error_rate = rng.random::<f64>();
    let records = (0..n)
        .map(|i| Evaluated {
            obs_id: i as u64 * 3 + 7,
            correct: rng.random::<f64>() >= error_rate,
            uncertainty: if rng.random_bool(0.5) {
                pool[rng.random_range(0..pool.len())]
            } else {
                rng.random::<f64>()
            },
        })
        .collect();
    EvaluatedSet::new(records).unwrap()
}
