//! Classification with rejection.
//!
//! Observations are split into accurate (`A`) / misclassified (`M`) and, by a rejection
//! fraction `q`, into rejected (`R`) / non-rejected (`N`). The most uncertain
//! `floor(q · n)` observations are rejected; ties at the cut are broken by a seeded shuffle.
//!
//! - NRA = |A∩N| / |N|
//! - CQ  = (|A∩N| + |M∩R|) / n
//! - RQ  = (|M∩R| / |A∩R|) / (|M| / |A|)

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::fraction_count;
use crate::seed;
use crate::{Error, Result};

/// Largest rejection fraction on a sweep grid; NRA is 0/0 at full rejection.
pub const MAX_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub obs_id: u64,
    pub correct: bool,
    pub uncertainty: f64,
}

/// Per-observation correctness and the uncertainty used for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSet {
    records: Vec<Evaluated>,
}

impl EvaluatedSet {
    pub fn new(records: Vec<Evaluated>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.obs_id) {
                return Err(Error::invalid(format!("duplicate obs_id {}", r.obs_id)));
            }
            if !(r.uncertainty.is_finite() && r.uncertainty >= 0.0) {
                return Err(Error::invalid(format!(
                    "uncertainty of obs {} must be finite and non-negative",
                    r.obs_id
                )));
            }
        }
        Ok(EvaluatedSet { records })
    }

    /// Records numbered `0..n` from parallel slices.
    pub fn from_parts(correct: &[bool], uncertainty: &[f64]) -> Result<Self> {
        if correct.len() != uncertainty.len() {
            return Err(Error::Shape {
                context: "uncertainties per observation",
                expected: correct.len(),
                actual: uncertainty.len(),
            });
        }
        Self::new(
            correct
                .iter()
                .zip(uncertainty)
                .enumerate()
                .map(|(i, (&c, &u))| Evaluated {
                    obs_id: i as u64,
                    correct: c,
                    uncertainty: u,
                })
                .collect(),
        )
    }

    pub fn records(&self) -> &[Evaluated] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn accuracy(&self) -> f64 {
        self.accurate_count() as f64 / self.len() as f64
    }

    pub fn accurate_count(&self) -> usize {
        self.records.iter().filter(|r| r.correct).count()
    }
}

/// Confusion of accurate/misclassified against rejected/non-rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionPartition {
    pub rejected_ids: Vec<u64>,
    pub retained_ids: Vec<u64>,
    /// |A ∩ N|
    pub accurate_retained: usize,
    /// |M ∩ N|
    pub misclassified_retained: usize,
    /// |A ∩ R|
    pub accurate_rejected: usize,
    /// |M ∩ R|
    pub misclassified_rejected: usize,
}

impl RejectionPartition {
    pub fn total(&self) -> usize {
        self.accurate_retained
            + self.misclassified_retained
            + self.accurate_rejected
            + self.misclassified_rejected
    }

    fn from_flags<'a>(records: impl Iterator<Item = (&'a Evaluated, bool)>) -> Self {
        let mut p = RejectionPartition {
            rejected_ids: Vec::new(),
            retained_ids: Vec::new(),
            accurate_retained: 0,
            misclassified_retained: 0,
            accurate_rejected: 0,
            misclassified_rejected: 0,
        };
        for (r, rejected) in records {
            match (rejected, r.correct) {
                (true, true) => p.accurate_rejected += 1,
                (true, false) => p.misclassified_rejected += 1,
                (false, true) => p.accurate_retained += 1,
                (false, false) => p.misclassified_retained += 1,
            }
            if rejected {
                p.rejected_ids.push(r.obs_id);
            } else {
                p.retained_ids.push(r.obs_id);
            }
        }
        p
    }
}

/// Rejection quality, with its degenerate cases kept distinct from numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RqValue {
    Finite(f64),
    /// Only misclassified observations were rejected.
    Infinite,
    /// Nothing rejected, or the set has no accurate or no misclassified observations.
    Undefined,
}

impl RqValue {
    pub fn is_defined(self) -> bool {
        !matches!(self, RqValue::Undefined)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RqValue::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            RqValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// Rejects the `floor(q · n)` most uncertain observations.
///
/// Observations are ranked by strictly descending uncertainty. If the cut falls inside a group
/// of exactly equal uncertainties, the group (in `obs_id` order) is shuffled with `seed` and
/// its first members are rejected, so the result does not depend on record order.
pub fn partition(es: &EvaluatedSet, q: f64, seed: u64) -> Result<RejectionPartition> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!(
            "rejection fraction {q} outside [0, 1]"
        )));
    }
    let n = es.len();
    let k = fraction_count(q, n);
    let recs = es.records();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        recs[b]
            .uncertainty
            .total_cmp(&recs[a].uncertainty)
            .then(recs[a].obs_id.cmp(&recs[b].obs_id))
    });

    let mut rejected = alloc::vec![false; n];
    let mut taken = 0;
    let mut start = 0;
    while taken < k {
        let u = recs[order[start]].uncertainty;
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| recs[i].uncertainty == u)
                .count();
        let group = &mut order[start..end];
        let need = k - taken;
        if group.len() > need {
            group.shuffle(&mut seed::rng(seed));
        }
        for &i in group.iter().take(need) {
            rejected[i] = true;
        }
        taken += group.len().min(need);
        start = end;
    }

    Ok(RejectionPartition::from_flags(
        recs.iter().zip(rejected.iter().copied()),
    ))
}

/// Non-rejected accuracy.
pub fn nra(p: &RejectionPartition) -> Result<f64> {
    let retained = p.accurate_retained + p.misclassified_retained;
    if retained == 0 {
        return Err(Error::UndefinedMetric {
            metric: "NRA",
            reason: "every observation was rejected",
        });
    }
    Ok(p.accurate_retained as f64 / retained as f64)
}

/// Classification quality: share of correct keep/reject decisions.
pub fn cq(p: &RejectionPartition) -> Result<f64> {
    let n = p.total();
    if n == 0 {
        return Err(Error::UndefinedMetric {
            metric: "CQ",
            reason: "no observations",
        });
    }
    Ok((p.accurate_retained + p.misclassified_rejected) as f64 / n as f64)
}

/// Rejection quality, computed as `(|M∩R| · |A|) / (|A∩R| · |M|)`.
pub fn rq(p: &RejectionPartition) -> RqValue {
    let rejected = p.accurate_rejected + p.misclassified_rejected;
    let accurate = p.accurate_retained + p.accurate_rejected;
    let misclassified = p.misclassified_retained + p.misclassified_rejected;
    if rejected == 0 || accurate == 0 || misclassified == 0 {
        return RqValue::Undefined;
    }
    if p.accurate_rejected == 0 {
        return RqValue::Infinite;
    }
    RqValue::Finite(
        (p.misclassified_rejected as f64 * accurate as f64)
            / (p.accurate_rejected as f64 * misclassified as f64),
    )
}

/// The three rejection metrics; `nra` is `None` when nothing is retained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub nra: Option<f64>,
    pub cq: f64,
    pub rq: RqValue,
}

pub fn metrics(p: &RejectionPartition) -> Result<Metrics> {
    Ok(Metrics {
        nra: nra(p).ok(),
        cq: cq(p)?,
        rq: rq(p),
    })
}

/// Recounts the metrics for an explicit rejected set by direct set membership.
pub fn naive_metrics_oracle(es: &EvaluatedSet, rejected: &[u64]) -> Result<Metrics> {
    let ids: BTreeSet<u64> = es.records().iter().map(|r| r.obs_id).collect();
    let rejected: BTreeSet<u64> = rejected.iter().copied().collect();
    if let Some(unknown) = rejected.difference(&ids).next() {
        return Err(Error::invalid(format!(
            "unknown obs_id {unknown} in rejected set"
        )));
    }
    if es.is_empty() {
        return Err(Error::Empty("evaluated set"));
    }
    let accurate: BTreeSet<u64> = es
        .records()
        .iter()
        .filter(|r| r.correct)
        .map(|r| r.obs_id)
        .collect();
    let misclassified: BTreeSet<u64> = ids.difference(&accurate).copied().collect();
    let retained: BTreeSet<u64> = ids.difference(&rejected).copied().collect();

    let a_n = accurate.intersection(&retained).count();
    let m_r = misclassified.intersection(&rejected).count();
    let a_r = accurate.intersection(&rejected).count();

    let nra = (!retained.is_empty()).then(|| a_n as f64 / retained.len() as f64);
    let cq = (a_n + m_r) as f64 / ids.len() as f64;
    let rq = if rejected.is_empty() || accurate.is_empty() || misclassified.is_empty() {
        RqValue::Undefined
    } else if a_r == 0 {
        RqValue::Infinite
    } else {
        RqValue::Finite(
            (m_r as f64 * accurate.len() as f64) / (a_r as f64 * misclassified.len() as f64),
        )
    };
    Ok(Metrics { nra, cq, rq })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub q: f64,
    pub nra: f64,
    pub cq: f64,
    /// Finite RQ value; `None` when undefined or infinite.
    pub rq: Option<f64>,
    pub rq_defined: bool,
    pub rq_infinite: bool,
}

impl CurvePoint {
    pub fn rq_value(&self) -> RqValue {
        match (self.rq_defined, self.rq_infinite, self.rq) {
            (false, _, _) => RqValue::Undefined,
            (true, true, _) => RqValue::Infinite,
            (true, false, Some(v)) => RqValue::Finite(v),
            (true, false, None) => RqValue::Undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub points: Vec<CurvePoint>,
    pub seed: u64,
}

impl RejectionCurve {
    pub fn at(&self, q: f64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| (p.q - q).abs() < 1e-12)
    }
}

/// `0.00, 0.05, …, 0.95`.
pub fn default_grid() -> Vec<f64> {
    (0..20).map(|i| f64::from(i) / 20.0).collect()
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("rejection grid"));
    }
    if grid.iter().any(|q| !(0.0..=MAX_FRACTION).contains(q)) {
        return Err(Error::config(format!(
            "rejection fractions must lie in [0, {MAX_FRACTION}]"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("rejection grid must be strictly increasing"));
    }
    Ok(())
}

/// Metrics at every grid fraction; fraction `q` breaks ties with seed `seed ^ mix64(q)`.
pub fn sweep_curve(es: &EvaluatedSet, grid: &[f64], seed: u64) -> Result<RejectionCurve> {
    if es.is_empty() {
        return Err(Error::Empty("evaluated set"));
    }
    validate_grid(grid)?;
    let points = grid
        .iter()
        .map(|&q| {
            let p = partition(es, q, seed::per_fraction(seed, q))?;
            let rq = rq(&p);
            Ok(CurvePoint {
                q,
                nra: nra(&p)?,
                cq: cq(&p)?,
                rq: rq.finite(),
                rq_defined: rq.is_defined(),
                rq_infinite: rq.is_infinite(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RejectionCurve { points, seed })
}
