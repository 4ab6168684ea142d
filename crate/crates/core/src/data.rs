//! In-memory datasets, standardization, seeded splits and synthetic shift generators.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Binary-labelled feature matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// `features` is row-major `labels.len() × feature_names.len()`.
    pub fn new(features: Vec<f64>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let dim = feature_names.len();
        if dim == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Shape {
                context: "dataset features",
                expected: labels.len() * dim,
                actual: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value in row {}",
                pos / dim
            )));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(Error::invalid(format!("label of row {pos} is not 0 or 1")));
        }
        Ok(Dataset {
            features,
            dim,
            labels,
            feature_names,
        })
    }

    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let dim = feature_names.len();
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "row {r} has {} values, expected {dim}",
                rows[r].len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::Shape {
                context: "dataset labels",
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        Self::new(rows.concat(), labels, feature_names)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Share of rows labelled 1.
    pub fn class1_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.len() as f64
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// `floor(fraction · n)`, tolerant of representation error (`0.29 · 100` gives 29, not 28).
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let k = libm::floor(raw + 1e-9 * raw.abs().max(1.0)) as usize;
    k.min(n)
}

/// Seeded shuffle, then the first `floor(fraction · n)` rows go left and the rest right.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let k = fraction_count(fraction, ds.len());
    if k == 0 || k == ds.len() {
        return Err(Error::config(format!(
            "split fraction {fraction} of {} rows leaves one side empty",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    Ok((ds.subset(&order[..k]), ds.subset(&order[k..])))
}

/// Per-feature z-score parameters fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerParams {
    pub input_dim: usize,
    /// Indices of retained (non-constant) input features.
    pub kept: Vec<usize>,
    /// Indices of zero-variance features removed from the output.
    pub dropped: Vec<usize>,
    /// Mean and standard deviation of each retained feature.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn standardize_fit(train: &Dataset) -> Result<StandardizerParams> {
    if train.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let n = train.len() as f64;
    let mut params = StandardizerParams {
        input_dim: train.dim(),
        kept: Vec::new(),
        dropped: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
    };
    for j in 0..train.dim() {
        let mean = train.rows().map(|r| r[j]).sum::<f64>() / n;
        let var = train
            .rows()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / n;
        let std = libm::sqrt(var);
        if std <= 1e-12 * mean.abs().max(1.0) {
            params.dropped.push(j);
        } else {
            params.kept.push(j);
            params.means.push(mean);
            params.stds.push(std);
        }
    }
    if params.kept.is_empty() {
        return Err(Error::invalid("every feature is constant"));
    }
    Ok(params)
}

/// Applies fitted parameters unchanged; never refits on `ds`.
pub fn standardize_apply(params: &StandardizerParams, ds: &Dataset) -> Result<Dataset> {
    if ds.dim() != params.input_dim {
        return Err(Error::Shape {
            context: "standardizer input features",
            expected: params.input_dim,
            actual: ds.dim(),
        });
    }
    let mut features = Vec::with_capacity(ds.len() * params.kept.len());
    for row in ds.rows() {
        for ((&j, &m), &s) in params.kept.iter().zip(&params.means).zip(&params.stds) {
            features.push((row[j] - m) / s);
        }
    }
    let names = params
        .kept
        .iter()
        .map(|&j| ds.feature_names()[j].clone())
        .collect();
    Dataset::new(features, ds.labels().to_vec(), names)
}

/// Two truncated isotropic Gaussian clusters in the plane.
///
/// The clusters overlap between their means (high data uncertainty there) and all mass lies
/// within `radius` standard deviations of a cluster mean, so the rest of the plane is never
/// seen during training (high model uncertainty there). The default gives class 1 a tight
/// cluster inside the wider class-0 cloud, so the Bayes boundary is curved and independently
/// trained networks extrapolate it differently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoRegionSpec {
    pub class0_mean: [f64; 2],
    pub class1_mean: [f64; 2],
    /// Per-class isotropic standard deviation (class 0, class 1).
    pub stds: [f64; 2],
    /// Truncation radius in units of `std`.
    pub radius: f64,
    /// Probability of class 1.
    pub class_prior: f64,
}

impl Default for TwoRegionSpec {
    fn default() -> Self {
        TwoRegionSpec {
            class0_mean: [-1.2, 0.0],
            class1_mean: [1.2, 0.0],
            stds: [1.6, 0.6],
            radius: 3.0,
            class_prior: 0.56,
        }
    }
}

impl TwoRegionSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .class0_mean
            .iter()
            .chain(&self.class1_mean)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("cluster means must be finite"));
        }
        if !self.stds.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::config("cluster stds must be positive"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::config("truncation radius must be positive"));
        }
        check_prior(self.class_prior)
    }

    pub fn centroid(&self) -> [f64; 2] {
        [
            0.5 * (self.class0_mean[0] + self.class1_mean[0]),
            0.5 * (self.class0_mean[1] + self.class1_mean[1]),
        ]
    }

    /// Average of the two cluster standard deviations; the unit of shift magnitudes.
    pub fn scale(&self) -> f64 {
        0.5 * (self.stds[0] + self.stds[1])
    }

    pub fn std_of(&self, label: u8) -> f64 {
        self.stds[usize::from(label == 1)]
    }

    pub fn mean_of(&self, label: u8) -> [f64; 2] {
        if label == 1 {
            self.class1_mean
        } else {
            self.class0_mean
        }
    }

    /// Unshifted draw; equivalent to [`gen_shifted`] with [`ShiftLevel::None`].
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        gen_shifted(self, &ShiftSpec::identity(self), n, seed)
    }
}

fn check_prior(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("class prior {p} outside (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftLevel {
    None,
    Small,
    Large,
}

impl ShiftLevel {
    pub const ALL: [ShiftLevel; 3] = [ShiftLevel::None, ShiftLevel::Small, ShiftLevel::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftLevel::None => "none",
            ShiftLevel::Small => "small",
            ShiftLevel::Large => "large",
        }
    }
}

impl core::str::FromStr for ShiftLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ShiftLevel::None),
            "small" => Ok(ShiftLevel::Small),
            "large" => Ok(ShiftLevel::Large),
            other => Err(Error::invalid(format!("unknown shift level `{other}`"))),
        }
    }
}

/// Deployment-time perturbation of a [`TwoRegionSpec`].
///
/// Points are drawn from the base clusters (with `class_prior` in place of the base prior),
/// rotated about the base centroid, translated by `mean_shift`, and finally each label is
/// flipped with probability `label_flip_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub level: ShiftLevel,
    pub mean_shift: Vec<f64>,
    pub rotation_degrees: f64,
    pub label_flip_rate: f64,
    pub class_prior: f64,
}

/// Translation of the small shift, in cluster standard deviations.
pub const SMALL_SHIFT_STDS: f64 = 1.0;
/// Translation of the large shift, in cluster standard deviations.
pub const LARGE_SHIFT_STDS: f64 = 4.0;
pub const LARGE_SHIFT_ROTATION: f64 = 90.0;
pub const SMALL_SHIFT_PRIOR: f64 = 0.46;
pub const LARGE_SHIFT_PRIOR: f64 = 0.28;
/// Direction of preset translations, measured from the class-0 → class-1 axis.
pub const SHIFT_DIRECTION_DEGREES: f64 = -60.0;

impl ShiftSpec {
    /// No perturbation at all.
    pub fn identity(base: &TwoRegionSpec) -> Self {
        ShiftSpec {
            level: ShiftLevel::None,
            mean_shift: vec![0.0, 0.0],
            rotation_degrees: 0.0,
            label_flip_rate: 0.0,
            class_prior: base.class_prior,
        }
    }

    /// Default perturbation for each level. Translations point
    /// [`SHIFT_DIRECTION_DEGREES`] off the class axis, so shifted mass drifts along the
    /// boundary and towards the class-1 side at once.
    pub fn preset(level: ShiftLevel, base: &TwoRegionSpec) -> Self {
        let along = shift_direction(base);
        let (stds, rotation, prior) = match level {
            ShiftLevel::None => return Self::identity(base),
            ShiftLevel::Small => (SMALL_SHIFT_STDS, 0.0, SMALL_SHIFT_PRIOR),
            ShiftLevel::Large => (LARGE_SHIFT_STDS, LARGE_SHIFT_ROTATION, LARGE_SHIFT_PRIOR),
        };
        ShiftSpec {
            level,
            mean_shift: vec![
                along[0] * stds * base.scale(),
                along[1] * stds * base.scale(),
            ],
            rotation_degrees: rotation,
            label_flip_rate: 0.0,
            class_prior: prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean_shift.len() != 2 || self.mean_shift.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("mean_shift must be two finite values"));
        }
        if !self.rotation_degrees.is_finite() {
            return Err(Error::config("rotation must be finite"));
        }
        if !(0.0..=0.5).contains(&self.label_flip_rate) {
            return Err(Error::config("label_flip_rate must lie in [0, 0.5]"));
        }
        check_prior(self.class_prior)
    }
}

fn shift_direction(base: &TwoRegionSpec) -> [f64; 2] {
    let dx = base.class1_mean[0] - base.class0_mean[0];
    let dy = base.class1_mean[1] - base.class0_mean[1];
    let norm = libm::hypot(dx, dy);
    let axis = if norm == 0.0 {
        [1.0, 0.0]
    } else {
        [dx / norm, dy / norm]
    };
    let t = SHIFT_DIRECTION_DEGREES.to_radians();
    let (sin, cos) = (libm::sin(t), libm::cos(t));
    [cos * axis[0] - sin * axis[1], sin * axis[0] + cos * axis[1]]
}

fn truncated_point(base: &TwoRegionSpec, label: u8, rng: &mut Rng) -> [f64; 2] {
    let mean = base.mean_of(label);
    let std = base.std_of(label);
    loop {
        let u: f64 = rng.sample(StandardNormal);
        let v: f64 = rng.sample(StandardNormal);
        if u * u + v * v <= base.radius * base.radius {
            return [mean[0] + std * u, mean[1] + std * v];
        }
    }
}

/// Training-distribution sample from the default two-region design.
pub fn gen_two_region(n: usize, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::config("two-region generator needs n >= 4"));
    }
    TwoRegionSpec::default().generate(n, seed)
}

/// Sample `n` points from `base` under `shift`.
///
/// Exactly `round(n · class_prior)` rows carry class 1 before label flipping.
pub fn gen_shifted(
    base: &TwoRegionSpec,
    shift: &ShiftSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    base.validate()?;
    shift.validate()?;
    let mut rng = seed::rng(seed);
    let n1 = libm::round(n as f64 * shift.class_prior) as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n1)).collect();
    labels.shuffle(&mut rng);

    let theta = shift.rotation_degrees.to_radians();
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let c = base.centroid();
    let mut features = Vec::with_capacity(2 * n);
    for &y in &labels {
        let [x0, x1] = truncated_point(base, y, &mut rng);
        let (dx, dy) = (x0 - c[0], x1 - c[1]);
        features.push(c[0] + cos * dx - sin * dy + shift.mean_shift[0]);
        features.push(c[1] + sin * dx + cos * dy + shift.mean_shift[1]);
    }
    if shift.label_flip_rate > 0.0 {
        for y in labels.iter_mut() {
            if rng.random::<f64>() < shift.label_flip_rate {
                *y = 1 - *y;
            }
        }
    }
    Dataset::new(features, labels, vec!["x1".into(), "x2".into()])
}
