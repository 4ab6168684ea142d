//! The repeated train / predict / reject experiment and its report files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use abstain_core::data::{gen_shifted, standardize_apply, standardize_fit};
use abstain_core::nn::train;
use abstain_core::rejection::{default_grid, sweep_curve, validate_grid, CurvePoint};
use abstain_core::uncertainty::{batch_uncertainty, UncertaintyComponent};
use abstain_core::{
    seed, Dataset, EvaluatedSet, Mlp, MlpConfig, Predictor, PredictorKind, ShiftLevel, ShiftSpec,
    TrainReport, TwoRegionSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_csv::load_dataset;
use crate::error::{CliError, Result, StageExt};
use crate::fsio;
use crate::numfmt::sig;
use crate::svg::{render_curves, Series};
use crate::tables::{curve_to_csv, observations_to_csv, ObservationRow, CSV_DIGITS};

pub const HISTOGRAM_BINS: usize = 20;

/// Stream ids for [`seed::derive`] from a run seed.
const STREAM_TRAIN_DATA: u64 = 100;
const STREAM_TEST_DATA: u64 = 200;
const STREAM_PREDICT: u64 = 300;
const STREAM_REJECT: u64 = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSource {
    pub train_n: usize,
    pub test_n: usize,
    pub base: TwoRegionSpec,
    /// Test-set shifts; the presets for none, small and large when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<ShiftSpec>>,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        SyntheticSource {
            train_n: 2000,
            test_n: 1000,
            base: TwoRegionSpec::default(),
            shifts: None,
        }
    }
}

impl SyntheticSource {
    pub fn shift_specs(&self) -> Vec<ShiftSpec> {
        match &self.shifts {
            Some(s) => s.clone(),
            None => ShiftLevel::ALL
                .iter()
                .map(|&l| ShiftSpec::preset(l, &self.base))
                .collect(),
        }
    }

    /// Training set for a run seed.
    pub fn train_set(&self, run_seed: u64) -> Result<Dataset> {
        Ok(self
            .base
            .generate(self.train_n, seed::derive(run_seed, STREAM_TRAIN_DATA))?)
    }

    /// Test set number `index` (position in the shift list) for a run seed.
    pub fn test_set(&self, shift: &ShiftSpec, index: usize, run_seed: u64) -> Result<Dataset> {
        let s = seed::derive(run_seed, STREAM_TEST_DATA + index as u64);
        Ok(gen_shifted(&self.base, shift, self.test_n, s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

/// Fixed CSV files; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub train: PathBuf,
    pub tests: Vec<NamedPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSource),
    Csv(CsvSource),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSource::default())
    }
}

/// Everything that determines an experiment. `mlp.input_dim` and `mlp.seed` are replaced by
/// the data dimension and the derived member seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub mlp: MlpConfig,
    pub methods: Vec<PredictorKind>,
    pub mc_passes: usize,
    pub ensemble_size: usize,
    pub runs: usize,
    pub seed: u64,
    /// Not echoed into the report, so reports written to different places compare equal.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub grid: Vec<f64>,
    pub rank_by: UncertaintyComponent,
    pub standardize: bool,
    /// Write one uncertainty CSV per (method, shift, run).
    pub write_observations: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::default(),
            mlp: MlpConfig::new(2),
            methods: PredictorKind::ALL.to_vec(),
            mc_passes: 128,
            ensemble_size: 10,
            runs: 10,
            seed: 42,
            output_dir: None,
            grid: default_grid(),
            rank_by: UncertaintyComponent::Total,
            standardize: true,
            write_observations: true,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file and resolves CSV paths relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = fsio::read_json(path)?;
        if let DataSource::Csv(csv) = &mut cfg.data {
            let dir = path.parent().unwrap_or(Path::new(""));
            csv.train = dir.join(&csv.train);
            for t in &mut csv.tests {
                t.path = dir.join(&t.path);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.runs == 0 {
            return usage("`runs` must be at least 1".into());
        }
        if self.methods.is_empty() {
            return usage("at least one method is required".into());
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return usage("duplicate method".into());
        }
        if self.methods.contains(&PredictorKind::McDropout) && self.mc_passes == 0 {
            return usage("`mc_passes` must be at least 1".into());
        }
        if self.methods.contains(&PredictorKind::DeepEnsemble) && self.ensemble_size == 0 {
            return usage("`ensemble_size` must be at least 1".into());
        }
        validate_grid(&self.grid)?;
        MlpConfig {
            input_dim: self.mlp.input_dim.max(1),
            ..self.mlp.clone()
        }
        .validate()?;
        let names = self.shift_names();
        if names.is_empty() {
            return usage("at least one test set is required".into());
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty()
                || !n
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return usage(format!(
                    "test set name `{n}` must be non-empty [A-Za-z0-9_-]"
                ));
            }
            if names[..i].contains(n) {
                return usage(format!("duplicate test set name `{n}`"));
            }
        }
        match &self.data {
            DataSource::Synthetic(s) => {
                s.base.validate()?;
                for spec in s.shift_specs() {
                    spec.validate()?;
                }
                if s.test_n == 0 {
                    return usage("`test_n` must be at least 1".into());
                }
            }
            DataSource::Csv(_) => {}
        }
        Ok(())
    }

    pub fn shift_names(&self) -> Vec<String> {
        match &self.data {
            DataSource::Synthetic(s) => s
                .shift_specs()
                .iter()
                .map(|spec| spec.level.as_str().to_string())
                .collect(),
            DataSource::Csv(c) => c.tests.iter().map(|t| t.name.clone()).collect(),
        }
    }

    /// Number of networks trained per run.
    fn member_count(&self) -> usize {
        if self.methods.contains(&PredictorKind::DeepEnsemble) {
            self.ensemble_size
        } else {
            1
        }
    }

    /// Training recipe of ensemble member `m` in the run with seed `run_seed`. Member 0 is also
    /// the standard / MC Dropout network.
    pub fn member_config(&self, input_dim: usize, run_seed: u64, m: usize) -> MlpConfig {
        MlpConfig {
            input_dim,
            seed: run_seed.wrapping_add(m as u64),
            validation_seed: Some(run_seed),
            ..self.mlp.clone()
        }
    }
}

pub fn run_seed(base: u64, run: usize) -> u64 {
    seed::derive(base, run as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over runs divided by the square root of the run count.
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        MeanSe { mean, se }
    }
}

/// Counts over 20 equal bins of [0, 1] bits; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms<T> {
    pub total: Vec<T>,
    pub data: Vec<T>,
    pub model: Vec<T>,
}

pub fn histogram_bin(u: f64) -> usize {
    ((u * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn histogram_edges() -> Vec<f64> {
    (0..=HISTOGRAM_BINS)
        .map(|i| i as f64 / HISTOGRAM_BINS as f64)
        .collect()
}

fn count(values: impl Iterator<Item = f64>) -> Vec<u64> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for v in values {
        bins[histogram_bin(v)] += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberTraining {
    pub member: usize,
    pub seed: u64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: PredictorKind,
    pub shift: String,
    pub n: usize,
    pub accuracy: f64,
    pub mean_u_total: f64,
    pub mean_u_data: f64,
    pub mean_u_model: f64,
    pub histograms: Histograms<u64>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub training: Vec<MemberTraining>,
    pub results: Vec<RunResult>,
}

impl RunRecord {
    pub fn result(&self, method: PredictorKind, shift: &str) -> Option<&RunResult> {
        self.results
            .iter()
            .find(|r| r.method == method && r.shift == shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: PredictorKind,
    pub shift: String,
    pub runs: usize,
    pub accuracy: MeanSe,
    pub u_total: MeanSe,
    pub u_data: MeanSe,
    pub u_model: MeanSe,
    /// Bin counts averaged over runs.
    pub histograms: Histograms<f64>,
    /// NRA and CQ averaged over runs; RQ averaged over runs where it is finite.
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub methods: Vec<PredictorKind>,
    pub shifts: Vec<String>,
    pub histogram_edges: Vec<f64>,
    pub summary: Vec<SummaryEntry>,
    pub runs: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn entry(&self, method: PredictorKind, shift: &str) -> Option<&SummaryEntry> {
        self.summary
            .iter()
            .find(|e| e.method == method && e.shift == shift)
    }
}

/// Per-run output that is written to disk but not kept in the report.
struct RunOutput {
    record: RunRecord,
    observations: Vec<(PredictorKind, String, Vec<ObservationRow>)>,
}

struct TestSet {
    name: String,
    data: Dataset,
}

fn load_csv_source(csv: &CsvSource) -> Result<(Dataset, Vec<TestSet>)> {
    let train = load_dataset(&csv.train)?;
    let tests = csv
        .tests
        .iter()
        .map(|t| {
            Ok(TestSet {
                name: t.name.clone(),
                data: load_dataset(&t.path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((train, tests))
}

fn run_once(
    cfg: &ExperimentConfig,
    run: usize,
    csv_data: Option<&(Dataset, Vec<TestSet>)>,
) -> Result<RunOutput> {
    let s = run_seed(cfg.seed, run);
    let stage = |what: &str| format!("run {run}: {what}");

    let (mut train_set, mut tests) = match (&cfg.data, csv_data) {
        (DataSource::Synthetic(src), _) => {
            let train_set = src.train_set(s).stage(|| stage("generate training data"))?;
            let tests = src
                .shift_specs()
                .iter()
                .enumerate()
                .map(|(i, spec)| {
                    Ok(TestSet {
                        name: spec.level.as_str().to_string(),
                        data: src.test_set(spec, i, s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .stage(|| stage("generate test data"))?;
            (train_set, tests)
        }
        (DataSource::Csv(_), Some((train_set, tests))) => (
            train_set.clone(),
            tests
                .iter()
                .map(|t| TestSet {
                    name: t.name.clone(),
                    data: t.data.clone(),
                })
                .collect(),
        ),
        (DataSource::Csv(_), None) => {
            return Err(CliError::Invariant("CSV data not loaded".into()))
        }
    };

    if cfg.standardize {
        let params = standardize_fit(&train_set).stage(|| stage("standardize"))?;
        if !params.dropped.is_empty() {
            log::warn!("dropping constant features {:?}", params.dropped);
        }
        train_set = standardize_apply(&params, &train_set).stage(|| stage("standardize"))?;
        for t in &mut tests {
            t.data = standardize_apply(&params, &t.data)
                .stage(|| stage(&format!("standardize test set '{}'", t.name)))?;
        }
    }

    let dim = train_set.dim();
    let trained: Vec<(Mlp, TrainReport)> = (0..cfg.member_count())
        .into_par_iter()
        .map(|m| {
            train(cfg.member_config(dim, s, m), &train_set)
                .stage(|| stage(&format!("train member {m}")))
        })
        .collect::<Result<_>>()?;
    log::info!("run {run}: trained {} network(s)", trained.len());
    let training = trained
        .iter()
        .enumerate()
        .map(|(m, (model, rep))| MemberTraining {
            member: m,
            seed: model.config().seed,
            stopped_epoch: rep.stopped_epoch,
            best_epoch: rep.best_epoch,
            best_val_loss: rep
                .val_loss_per_epoch
                .get(rep.best_epoch.wrapping_sub(1))
                .copied(),
        })
        .collect();
    let members: Vec<Mlp> = trained.into_iter().map(|(m, _)| m).collect();

    let mut results = Vec::new();
    let mut observations = Vec::new();
    for &method in &cfg.methods {
        let predictor = match method {
            PredictorKind::Standard => Predictor::Standard(&members[0]),
            PredictorKind::McDropout => Predictor::McDropout {
                model: &members[0],
                passes: cfg.mc_passes,
            },
            PredictorKind::DeepEnsemble => Predictor::DeepEnsemble(&members),
        };
        for (i, test) in tests.iter().enumerate() {
            let what = || stage(&format!("{} on '{}'", method.as_str(), test.name));
            let assessed = batch_uncertainty(
                &predictor,
                test.data.rows(),
                seed::derive(s, STREAM_PREDICT + i as u64),
            )
            .stage(what)?;
            let rows: Vec<ObservationRow> = assessed
                .iter()
                .zip(test.data.labels())
                .enumerate()
                .map(|(id, (a, &y))| ObservationRow::new(id as u64, a, y))
                .collect();
            let n = rows.len();
            let nf = n as f64;
            let correct: Vec<bool> = rows.iter().map(ObservationRow::correct).collect();
            let ranking: Vec<f64> = assessed
                .iter()
                .map(|a| a.uncertainty.get(cfg.rank_by))
                .collect();
            let es = EvaluatedSet::from_parts(&correct, &ranking).stage(what)?;
            let curve = sweep_curve(&es, &cfg.grid, seed::derive(s, STREAM_REJECT + i as u64))
                .stage(what)?;
            results.push(RunResult {
                method,
                shift: test.name.clone(),
                n,
                accuracy: es.accuracy(),
                mean_u_total: rows.iter().map(|r| r.u_total).sum::<f64>() / nf,
                mean_u_data: rows.iter().map(|r| r.u_data).sum::<f64>() / nf,
                mean_u_model: rows.iter().map(|r| r.u_model).sum::<f64>() / nf,
                histograms: Histograms {
                    total: count(rows.iter().map(|r| r.u_total)),
                    data: count(rows.iter().map(|r| r.u_data)),
                    model: count(rows.iter().map(|r| r.u_model)),
                },
                curve: curve.points,
            });
            if cfg.write_observations {
                observations.push((method, test.name.clone(), rows));
            }
        }
    }
    Ok(RunOutput {
        record: RunRecord {
            run,
            seed: s,
            training,
            results,
        },
        observations,
    })
}

fn mean_curve(curves: &[&[CurvePoint]]) -> Vec<CurvePoint> {
    let n = curves.len() as f64;
    (0..curves[0].len())
        .map(|k| {
            let pts: Vec<&CurvePoint> = curves.iter().map(|c| &c[k]).collect();
            let finite: Vec<f64> = pts.iter().filter_map(|p| p.rq).collect();
            let defined = pts.iter().any(|p| p.rq_defined);
            CurvePoint {
                q: pts[0].q,
                nra: pts.iter().map(|p| p.nra).sum::<f64>() / n,
                cq: pts.iter().map(|p| p.cq).sum::<f64>() / n,
                rq: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
                rq_defined: defined,
                rq_infinite: defined && finite.is_empty(),
            }
        })
        .collect()
}

fn mean_bins(hists: &[&[u64]]) -> Vec<f64> {
    let n = hists.len() as f64;
    (0..HISTOGRAM_BINS)
        .map(|b| hists.iter().map(|h| h[b] as f64).sum::<f64>() / n)
        .collect()
}

fn summarize(
    cfg: &ExperimentConfig,
    shifts: &[String],
    runs: &[RunRecord],
) -> Result<Vec<SummaryEntry>> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for shift in shifts {
            let rs: Vec<&RunResult> = runs
                .iter()
                .map(|r| {
                    r.result(method, shift).ok_or_else(|| {
                        CliError::Invariant(format!(
                            "run {} lacks {} on {shift}",
                            r.run,
                            method.as_str()
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let stat =
                |f: fn(&RunResult) -> f64| MeanSe::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let curves: Vec<&[CurvePoint]> = rs.iter().map(|r| r.curve.as_slice()).collect();
            out.push(SummaryEntry {
                method,
                shift: shift.clone(),
                runs: rs.len(),
                accuracy: stat(|r| r.accuracy),
                u_total: stat(|r| r.mean_u_total),
                u_data: stat(|r| r.mean_u_data),
                u_model: stat(|r| r.mean_u_model),
                histograms: Histograms {
                    total: mean_bins(
                        &rs.iter()
                            .map(|r| r.histograms.total.as_slice())
                            .collect::<Vec<_>>(),
                    ),
                    data: mean_bins(
                        &rs.iter()
                            .map(|r| r.histograms.data.as_slice())
                            .collect::<Vec<_>>(),
                    ),
                    model: mean_bins(
                        &rs.iter()
                            .map(|r| r.histograms.model.as_slice())
                            .collect::<Vec<_>>(),
                    ),
                },
                curve: mean_curve(&curves),
            });
        }
    }
    Ok(out)
}

pub fn method_title(kind: PredictorKind) -> &'static str {
    match kind {
        PredictorKind::Standard => "Standard",
        PredictorKind::McDropout => "MC Dropout",
        PredictorKind::DeepEnsemble => "Deep Ensembles",
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Accuracy (%) per shift (rows) and method (columns), mean ± standard error.
pub fn summary_markdown(report: &ExperimentReport) -> String {
    let mut s = format!(
        "Accuracy (%) over {} run(s); mean ± standard error.\n\n| Shift |",
        report.config.runs
    );
    for &m in &report.methods {
        s.push_str(&format!(" {} |", method_title(m)));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(report.methods.len()));
    s.push('\n');
    for shift in &report.shifts {
        s.push_str(&format!("| {} |", capitalize(shift)));
        for &m in &report.methods {
            let e = report.entry(m, shift).expect("summary covers every cell");
            s.push_str(&format!(
                " {:.2} ± {:.2} |",
                100.0 * e.accuracy.mean,
                100.0 * e.accuracy.se
            ));
        }
        s.push('\n');
    }
    s
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "shift",
    "method",
    "runs",
    "accuracy_mean",
    "accuracy_se",
    "u_total_mean",
    "u_total_se",
    "u_data_mean",
    "u_data_se",
    "u_model_mean",
    "u_model_se",
];

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut s = SUMMARY_COLUMNS.join(",");
    s.push('\n');
    for shift in &report.shifts {
        for &m in &report.methods {
            let e = report.entry(m, shift).expect("summary covers every cell");
            let mut cells = vec![shift.clone(), m.as_str().to_string(), e.runs.to_string()];
            for v in [&e.accuracy, &e.u_total, &e.u_data, &e.u_model] {
                cells.push(sig(v.mean, CSV_DIGITS));
                cells.push(sig(v.se, CSV_DIGITS));
            }
            s.push_str(&cells.join(","));
            s.push('\n');
        }
    }
    s
}

pub const HISTOGRAM_COLUMNS: [&str; 5] = ["bin_lo", "bin_hi", "total", "data", "model"];

pub fn histogram_csv(h: &Histograms<f64>) -> String {
    let edges = histogram_edges();
    let mut s = HISTOGRAM_COLUMNS.join(",");
    s.push('\n');
    for b in 0..HISTOGRAM_BINS {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            sig(edges[b], CSV_DIGITS),
            sig(edges[b + 1], CSV_DIGITS),
            sig(h.total[b], CSV_DIGITS),
            sig(h.data[b], CSV_DIGITS),
            sig(h.model[b], CSV_DIGITS),
        ));
    }
    s
}

/// Runs every repetition (in parallel) and aggregates them. Writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(run_all(cfg)?.0)
}

fn run_all(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<RunOutput>)> {
    cfg.validate()?;
    let csv_data = match &cfg.data {
        DataSource::Csv(c) => Some(load_csv_source(c).stage(|| "load data".to_string())?),
        DataSource::Synthetic(_) => None,
    };
    let outputs: Vec<RunOutput> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_once(cfg, r, csv_data.as_ref()))
        .collect::<Result<_>>()?;
    let shifts = cfg.shift_names();
    let runs: Vec<RunRecord> = outputs.iter().map(|o| o.record.clone()).collect();
    let summary = summarize(cfg, &shifts, &runs).stage(|| "aggregate".to_string())?;
    let report = ExperimentReport {
        config: cfg.clone(),
        methods: cfg.methods.clone(),
        shifts,
        histogram_edges: histogram_edges(),
        summary,
        runs,
    };
    Ok((report, outputs))
}

/// Runs the experiment and writes the report directory:
///
/// - `report.json`, `summary.md`, `summary.csv`
/// - `histograms/<method>_<shift>.csv`
/// - `curves/<method>_<shift>.csv` (run mean) and `curves/<method>_<shift>_run<r>.csv`
/// - `observations/<method>_<shift>_run<r>.csv` when `write_observations` is set
/// - `plots/<shift>.svg`
pub fn write_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    fsio::ensure_dir(out)?;
    let (report, outputs) = run_all(cfg)?;
    let write = |rel: String, text: &str| {
        fsio::write_text(&out.join(&rel), text).stage(|| format!("write {rel}"))
    };
    fsio::write_json(&out.join("report.json"), &report)
        .stage(|| "write report.json".to_string())?;
    write("summary.md".into(), &summary_markdown(&report))?;
    write("summary.csv".into(), &summary_csv(&report))?;
    for e in &report.summary {
        let stem = format!("{}_{}", e.method.as_str(), e.shift);
        write(
            format!("histograms/{stem}.csv"),
            &histogram_csv(&e.histograms),
        )?;
        write(format!("curves/{stem}.csv"), &curve_to_csv(&e.curve))?;
    }
    for o in &outputs {
        for r in &o.record.results {
            write(
                format!(
                    "curves/{}_{}_run{:02}.csv",
                    r.method.as_str(),
                    r.shift,
                    o.record.run
                ),
                &curve_to_csv(&r.curve),
            )?;
        }
        for (method, shift, rows) in &o.observations {
            write(
                format!(
                    "observations/{}_{shift}_run{:02}.csv",
                    method.as_str(),
                    o.record.run
                ),
                &observations_to_csv(rows),
            )?;
        }
    }
    for shift in &report.shifts {
        let series: Vec<Series<'_>> = report
            .methods
            .iter()
            .map(|&m| Series {
                label: method_title(m),
                points: &report
                    .entry(m, shift)
                    .expect("summary covers every cell")
                    .curve,
            })
            .collect();
        let title = format!(
            "Rejection curves, {shift} shift, mean of {} run(s)",
            report.config.runs
        );
        write(
            format!("plots/{shift}.svg"),
            &render_curves(&title, &series),
        )?;
    }
    Ok(report)
}
