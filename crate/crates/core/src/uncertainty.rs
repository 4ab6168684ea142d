//! Predictive samples and the entropy decomposition of predictive uncertainty.
//!
//! A [`PredictiveMatrix`] holds `S` class-probability rows for one input: one row for a
//! standard network, `T` stochastic passes for MC Dropout, or one row per member for a
//! Deep Ensemble. [`decompose`] splits the entropy of the averaged row (total uncertainty)
//! into the average row entropy (data uncertainty) and the remainder (model uncertainty).
//! Entropies are in bits, so the binary maximum is 1.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::{DropoutMask, Mlp};
use crate::seed;
use crate::{Error, Result};

/// Row sums must be within this of 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Largest negative model uncertainty attributed to round-off and clamped to 0.
pub const JENSEN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Standard,
    McDropout,
    DeepEnsemble,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [
        PredictorKind::Standard,
        PredictorKind::McDropout,
        PredictorKind::DeepEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Standard => "standard",
            PredictorKind::McDropout => "mc_dropout",
            PredictorKind::DeepEnsemble => "deep_ensemble",
        }
    }
}

impl core::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PredictorKind::Standard),
            "mc_dropout" => Ok(PredictorKind::McDropout),
            "deep_ensemble" => Ok(PredictorKind::DeepEnsemble),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// `S × K` class probabilities for a single input. Column `k` is the probability of class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMatrix {
    probs: Vec<f64>,
    classes: usize,
    source: PredictorKind,
}

impl PredictiveMatrix {
    pub fn new(rows: Vec<Vec<f64>>, source: PredictorKind) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || classes == 0 {
            return Err(Error::Empty("predictive matrix"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(Error::Shape {
                    context: "predictive row width",
                    expected: classes,
                    actual: row.len(),
                });
            }
            check_distribution(row).map_err(|e| Error::at(i, e))?;
        }
        if source == PredictorKind::Standard && rows.len() != 1 {
            return Err(Error::invalid("a standard prediction has exactly one row"));
        }
        Ok(PredictiveMatrix {
            probs: rows.concat(),
            classes,
            source,
        })
    }

    /// Binary matrix from class-1 probabilities; each row becomes `(1 - p, p)`.
    pub fn from_class1(p1: &[f64], source: PredictorKind) -> Result<Self> {
        Self::new(p1.iter().map(|&p| vec![1.0 - p, p]).collect(), source)
    }

    pub fn samples(&self) -> usize {
        self.probs.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn source(&self) -> PredictorKind {
        self.source
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.probs.chunks_exact(self.classes)
    }

    /// Column-wise mean: the MC Dropout / ensemble predictive distribution.
    pub fn mean_prediction(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.classes];
        for row in self.rows() {
            for (m, &p) in mean.iter_mut().zip(row) {
                *m += p;
            }
        }
        let s = self.samples() as f64;
        mean.iter_mut().for_each(|m| *m /= s);
        mean
    }
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::invalid(
            "probabilities must be finite and non-negative",
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Label decided by the mean distribution: class 1 iff its probability exceeds 0.5.
pub fn predicted_label(mean: &[f64]) -> u8 {
    u8::from(mean.get(1).is_some_and(|&p| p > 0.5))
}

fn entropy_unchecked(p: &[f64]) -> f64 {
    // 0 · log 0 := 0
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * libm::log2(v))
        .sum::<f64>()
}

/// Shannon entropy in bits.
pub fn entropy_bits(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_unchecked(p).max(0.0))
}

/// Total, data and model uncertainty of one prediction, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTriple {
    pub total: f64,
    pub data: f64,
    pub model: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyComponent {
    #[default]
    Total,
    Data,
    Model,
}

impl UncertaintyTriple {
    pub fn get(&self, component: UncertaintyComponent) -> f64 {
        match component {
            UncertaintyComponent::Total => self.total,
            UncertaintyComponent::Data => self.data,
            UncertaintyComponent::Model => self.model,
        }
    }
}

/// Entropy of the mean row, mean row entropy, and their raw difference (no clamping).
pub fn decompose_unclamped(pm: &PredictiveMatrix) -> (f64, f64, f64) {
    let total = entropy_unchecked(&pm.mean_prediction()).max(0.0);
    let data = pm.rows().map(entropy_unchecked).sum::<f64>() / pm.samples() as f64;
    let data = data.max(0.0);
    (total, data, total - data)
}

/// Splits total uncertainty into data and model parts.
///
/// Model uncertainty is the difference `total − data` (non-negative by Jensen's inequality);
/// round-off negatives are clamped to 0. `total` is reported as `data + model`, so the
/// identity holds exactly in floating point.
pub fn decompose(pm: &PredictiveMatrix) -> UncertaintyTriple {
    let (_, data, gap) = decompose_unclamped(pm);
    debug_assert!(gap >= -JENSEN_TOLERANCE, "Jensen gap {gap}");
    let model = gap.max(0.0);
    UncertaintyTriple {
        total: data + model,
        data,
        model,
    }
}

/// Single deterministic pass (dropout off).
pub fn predict_standard(model: &Mlp, x: &[f64]) -> Result<PredictiveMatrix> {
    let p = model.predict(x)?;
    PredictiveMatrix::from_class1(&[p], PredictorKind::Standard)
}

/// `passes` forward passes with dropout active and a fresh mask on every hidden layer per pass.
pub fn predict_mc_dropout(
    model: &Mlp,
    x: &[f64],
    passes: usize,
    seed: u64,
) -> Result<PredictiveMatrix> {
    if passes == 0 {
        return Err(Error::config("MC Dropout needs at least one forward pass"));
    }
    model.check_input(x)?;
    let mut rng = seed::rng(seed);
    let p1: Vec<f64> = (0..passes)
        .map(|_| {
            let mask = DropoutMask::sample(model, &mut rng);
            crate::nn::sigmoid(model.logit_unchecked(x, Some(&mask)))
        })
        .collect();
    PredictiveMatrix::from_class1(&p1, PredictorKind::McDropout)
}

/// One deterministic pass per member; rows are in member order.
pub fn predict_deep_ensemble(models: &[Mlp], x: &[f64]) -> Result<PredictiveMatrix> {
    let first = models.first().ok_or(Error::Empty("ensemble"))?;
    if let Some(m) = models.iter().find(|m| m.input_dim() != first.input_dim()) {
        return Err(Error::Shape {
            context: "ensemble member input_dim",
            expected: first.input_dim(),
            actual: m.input_dim(),
        });
    }
    let p1 = models
        .iter()
        .map(|m| m.predict(x))
        .collect::<Result<Vec<_>>>()?;
    PredictiveMatrix::from_class1(&p1, PredictorKind::DeepEnsemble)
}

/// How predictive samples are produced.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Standard(&'a Mlp),
    McDropout { model: &'a Mlp, passes: usize },
    DeepEnsemble(&'a [Mlp]),
}

impl Predictor<'_> {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::Standard(_) => PredictorKind::Standard,
            Predictor::McDropout { .. } => PredictorKind::McDropout,
            Predictor::DeepEnsemble(_) => PredictorKind::DeepEnsemble,
        }
    }

    /// `seed` only matters for MC Dropout.
    pub fn predict(&self, x: &[f64], seed: u64) -> Result<PredictiveMatrix> {
        match *self {
            Predictor::Standard(m) => predict_standard(m, x),
            Predictor::McDropout { model, passes } => predict_mc_dropout(model, x, passes, seed),
            Predictor::DeepEnsemble(models) => predict_deep_ensemble(models, x),
        }
    }
}

/// Mean prediction, decided label and uncertainty of one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub mean: Vec<f64>,
    pub label: u8,
    pub uncertainty: UncertaintyTriple,
}

impl Assessment {
    pub fn from_matrix(pm: &PredictiveMatrix) -> Self {
        let mean = pm.mean_prediction();
        Assessment {
            label: predicted_label(&mean),
            uncertainty: decompose(pm),
            mean,
        }
    }

    pub fn class1_probability(&self) -> f64 {
        self.mean[1]
    }
}

/// Assess one input; element `i` of a batch uses seed `seed ^ i`.
pub fn assess(predictor: &Predictor<'_>, x: &[f64], seed: u64) -> Result<Assessment> {
    predictor
        .predict(x, seed)
        .map(|pm| Assessment::from_matrix(&pm))
}

/// [`assess`] over every input, with per-input seeds `seed ^ i`.
pub fn batch_uncertainty<'x, I>(
    predictor: &Predictor<'_>,
    inputs: I,
    seed: u64,
) -> Result<Vec<Assessment>>
where
    I: IntoIterator<Item = &'x [f64]>,
{
    inputs
        .into_iter()
        .enumerate()
        .map(|(i, x)| assess(predictor, x, seed::per_input(seed, i)).map_err(|e| Error::at(i, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_from_seed, MlpConfig};

    fn pm(rows: &[[f64; 2]]) -> PredictiveMatrix {
        let src = if rows.len() == 1 {
            PredictorKind::Standard
        } else {
            PredictorKind::McDropout
        };
        PredictiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect(), src).unwrap()
    }

    fn small_model(rates: [f64; 2]) -> Mlp {
        init_from_seed(MlpConfig {
            hidden_dims: vec![16, 16],
            dropout_rates: rates.to_vec(),
            ..MlpConfig::new(2)
        })
        .unwrap()
    }

    #[test]
    fn mean_prediction_examples() {
        assert_eq!(
            pm(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]).mean_prediction(),
            vec![0.5, 0.5]
        );
        assert_eq!(pm(&[[0.3, 0.7]]).mean_prediction(), vec![0.3, 0.7]);
        let m = pm(&[[0.8, 0.2], [0.6, 0.4]]).mean_prediction();
        assert!((m[0] - 0.7).abs() < 1e-15 && (m[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn threshold_tie_goes_to_class_zero() {
        assert_eq!(predicted_label(&[0.5, 0.5]), 0);
        assert_eq!(predicted_label(&[0.49, 0.51]), 1);
        assert_eq!(predicted_label(&[0.9, 0.1]), 0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_bits(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(entropy_bits(&[0.5, 0.5]).unwrap(), 1.0);
        // -(0.9 log2 0.9 + 0.1 log2 0.1)
        assert!((entropy_bits(&[0.9, 0.1]).unwrap() - 0.468_995_593_589_281).abs() < 1e-12);
        assert!(entropy_bits(&[0.6, 0.6]).is_err());
        assert!(entropy_bits(&[1.1, -0.1]).is_err());
    }

    #[test]
    fn table_rows() {
        let t = decompose(&pm(&[[1.0, 0.0]; 4]));
        assert_eq!((t.total, t.data, t.model), (0.0, 0.0, 0.0));
        let t = decompose(&pm(&[[0.5, 0.5]; 4]));
        assert_eq!((t.total, t.data, t.model), (1.0, 1.0, 0.0));
        let t = decompose(&pm(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]));
        assert_eq!((t.total, t.data, t.model), (1.0, 0.0, 1.0));
    }

    #[test]
    fn matrix_validation() {
        assert!(PredictiveMatrix::new(vec![], PredictorKind::McDropout).is_err());
        assert!(PredictiveMatrix::new(vec![vec![0.5, 0.4]], PredictorKind::Standard).is_err());
        assert!(PredictiveMatrix::from_class1(&[0.5, 0.5], PredictorKind::Standard).is_err());
        assert!(
            PredictiveMatrix::new(vec![vec![0.5, 0.5], vec![1.0]], PredictorKind::McDropout)
                .is_err()
        );
    }

    #[test]
    fn standard_prediction_contract() {
        let m = small_model([0.4, 0.5]);
        let a = predict_standard(&m, &[0.2, -0.4]).unwrap();
        assert_eq!(a.samples(), 1);
        assert!((a.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a, predict_standard(&m, &[0.2, -0.4]).unwrap());
        assert_eq!(decompose(&a).model, 0.0);

        let zero = Mlp::zeros(MlpConfig::new(2)).unwrap();
        assert_eq!(
            predict_standard(&zero, &[1.0, 1.0]).unwrap().row(0),
            &[0.5, 0.5]
        );
    }

    #[test]
    fn mc_dropout_contract() {
        let x = [0.7, -1.1];
        let no_drop = small_model([0.0, 0.0]);
        let s = predict_standard(&no_drop, &x).unwrap();
        let mc = predict_mc_dropout(&no_drop, &x, 16, 3).unwrap();
        assert!(mc.rows().all(|r| r == s.row(0)));

        let m = small_model([0.4, 0.5]);
        let a = predict_mc_dropout(&m, &x, 32, 8).unwrap();
        assert_eq!(a, predict_mc_dropout(&m, &x, 32, 8).unwrap());
        assert_eq!(a.samples(), 32);
        assert!(a.rows().any(|r| r != a.row(0)));
        assert!(predict_mc_dropout(&m, &x, 0, 8).is_err());
    }

    #[test]
    fn ensemble_contract() {
        let x = [0.1, 0.9];
        let m = small_model([0.4, 0.5]);
        let single = predict_deep_ensemble(core::slice::from_ref(&m), &x).unwrap();
        assert_eq!(single.row(0), predict_standard(&m, &x).unwrap().row(0));

        let copies = vec![m.clone(); 5];
        let pm = predict_deep_ensemble(&copies, &x).unwrap();
        assert_eq!(decompose(&pm).model, 0.0);

        let other = init_from_seed(MlpConfig::new(3)).unwrap();
        assert!(predict_deep_ensemble(&[m, other], &x).is_err());
        assert!(predict_deep_ensemble(&[], &x).is_err());
    }

    #[test]
    fn batch_matches_single_path() {
        let m = small_model([0.4, 0.5]);
        let p = Predictor::McDropout {
            model: &m,
            passes: 8,
        };
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| vec![i as f64 * 0.3, 1.0 - i as f64])
            .collect();
        assert!(
            batch_uncertainty(&p, rows.iter().map(Vec::as_slice).take(0), 1)
                .unwrap()
                .is_empty()
        );
        let all = batch_uncertainty(&p, rows.iter().map(Vec::as_slice), 1).unwrap();
        for (i, a) in all.iter().enumerate() {
            assert_eq!(*a, assess(&p, &rows[i], seed::per_input(1, i)).unwrap());
        }
        let bad = [vec![1.0]];
        let err = batch_uncertainty(&p, bad.iter().map(Vec::as_slice), 1).unwrap_err();
        assert!(matches!(err, Error::AtIndex { index: 0, .. }));
    }
}
