//! The five subcommands, as library functions over plain argument structs.

use std::path::{Path, PathBuf};

use abstain_core::data::{standardize_apply, standardize_fit};
use abstain_core::nn::train;
use abstain_core::rejection::{default_grid, sweep_curve, Evaluated, RejectionCurve};
use abstain_core::uncertainty::{batch_uncertainty, UncertaintyComponent};
use abstain_core::{
    EvaluatedSet, Mlp, MlpConfig, Predictor, PredictorKind, ShiftLevel, StandardizerParams,
    TrainReport,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_csv::{load_dataset, save_dataset};
use crate::error::{CliError, Result, StageExt};
use crate::experiment::{write_experiment, ExperimentConfig, ExperimentReport, SyntheticSource};
use crate::fsio;
use crate::model_json::{load_model, save_model};
use crate::svg::{render_curves, Series};
use crate::tables::{load_observations, save_curve, save_observations, ObservationRow};

pub const MODEL_FILE: &str = "model.json";
pub const ENSEMBLE_DIR: &str = "ensemble";
pub const STANDARDIZER_FILE: &str = "standardizer.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const UNCERTAINTY_FILE: &str = "uncertainty.csv";
pub const CURVE_FILE: &str = "curve.csv";

pub fn member_file(m: usize) -> String {
    format!("member_{m:02}.json")
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub source: SyntheticSource,
    /// Subset of the shifts to write; all when empty.
    pub levels: Vec<ShiftLevel>,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes `train.csv` and one `test_<level>.csv` per selected shift; returns the paths written.
///
/// The files equal the data of the experiment run whose run seed is `seed`.
pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let src = &args.source;
    src.base.validate()?;
    let specs = src.shift_specs();
    let mut written = Vec::new();
    let train_path = args.out.join("train.csv");
    save_dataset(&train_path, &src.train_set(args.seed)?)?;
    written.push(train_path);
    for (i, spec) in specs.iter().enumerate() {
        if !args.levels.is_empty() && !args.levels.contains(&spec.level) {
            continue;
        }
        spec.validate()?;
        let path = args.out.join(format!("test_{}.csv", spec.level.as_str()));
        save_dataset(&path, &src.test_set(spec, i, args.seed)?)?;
        written.push(path);
    }
    Ok(written)
}

/// `train --config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Training CSV, relative to the config file.
    pub train: PathBuf,
    /// `input_dim` and `seed` are replaced by the data dimension and the member seeds.
    pub mlp: MlpConfig,
    pub methods: Vec<PredictorKind>,
    pub ensemble_size: usize,
    pub seed: u64,
    pub standardize: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            train: PathBuf::from("train.csv"),
            mlp: MlpConfig::new(2),
            methods: PredictorKind::ALL.to_vec(),
            ensemble_size: 10,
            seed: 42,
            standardize: true,
            output_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: TrainConfig = fsio::read_json(path)?;
        cfg.train = path.parent().unwrap_or(Path::new("")).join(&cfg.train);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub member: usize,
    pub seed: u64,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// The shared standard / MC Dropout network, when either method was requested.
    pub model: Option<MemberReport>,
    pub ensemble: Vec<MemberReport>,
    pub standardizer: Option<StandardizerParams>,
}

/// Trains the requested networks and writes `model.json`, `ensemble/member_XX.json`,
/// `standardizer.json` and `train_report.json` under `out`.
///
/// Member `m` uses seed `seed + m`; every member shares the validation split of `seed`, and
/// `model.json` is member 0.
pub fn cmd_train(cfg: &TrainConfig, out: &Path) -> Result<TrainSummary> {
    if cfg.methods.is_empty() {
        return Err(CliError::Usage("at least one method is required".into()));
    }
    let wants_single = cfg
        .methods
        .iter()
        .any(|&m| m != PredictorKind::DeepEnsemble);
    let wants_ensemble = cfg.methods.contains(&PredictorKind::DeepEnsemble);
    if wants_ensemble && cfg.ensemble_size == 0 {
        return Err(CliError::Usage("`ensemble_size` must be at least 1".into()));
    }
    let mut data = load_dataset(&cfg.train)?;
    let standardizer = if cfg.standardize {
        let params = standardize_fit(&data)?;
        if !params.dropped.is_empty() {
            log::warn!("dropping constant features {:?}", params.dropped);
        }
        data = standardize_apply(&params, &data)?;
        Some(params)
    } else {
        None
    };
    let count = if wants_ensemble { cfg.ensemble_size } else { 1 };
    let member_config = |m: usize| MlpConfig {
        input_dim: data.dim(),
        seed: cfg.seed.wrapping_add(m as u64),
        validation_seed: Some(cfg.seed),
        ..cfg.mlp.clone()
    };
    member_config(0).validate()?;
    let trained: Vec<(Mlp, TrainReport)> = (0..count)
        .into_par_iter()
        .map(|m| train(member_config(m), &data).stage(|| format!("train member {m}")))
        .collect::<Result<_>>()?;

    fsio::ensure_dir(out)?;
    let report = |m: usize, r: &TrainReport| MemberReport {
        member: m,
        seed: member_config(m).seed,
        report: r.clone(),
    };
    let mut summary = TrainSummary {
        model: None,
        ensemble: Vec::new(),
        standardizer: standardizer.clone(),
    };
    if wants_single {
        save_model(&out.join(MODEL_FILE), &trained[0].0)?;
        summary.model = Some(report(0, &trained[0].1));
    }
    if wants_ensemble {
        for (m, (model, rep)) in trained.iter().enumerate() {
            save_model(&out.join(ENSEMBLE_DIR).join(member_file(m)), model)?;
            summary.ensemble.push(report(m, rep));
        }
    }
    if let Some(params) = &standardizer {
        fsio::write_json(&out.join(STANDARDIZER_FILE), params)?;
    }
    fsio::write_json(&out.join(TRAIN_REPORT_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub enum ModelSource {
    /// A `train` output directory.
    Dir(PathBuf),
    /// Explicit model files (one for standard / MC Dropout, the members for an ensemble).
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone)]
pub struct UncertaintyArgs {
    pub models: ModelSource,
    pub test: PathBuf,
    pub method: PredictorKind,
    pub passes: usize,
    pub seed: u64,
    /// Overrides the `standardizer.json` found in a model directory.
    pub standardizer: Option<PathBuf>,
    pub out: PathBuf,
}

fn ensemble_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let ens = dir.join(ENSEMBLE_DIR);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&ens)
        .map_err(|e| CliError::io(&ens, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("member_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no member files in {}",
            ens.display()
        )));
    }
    Ok(files)
}

/// Writes `uncertainty.csv` under `out` with one row per test observation.
pub fn cmd_uncertainty(args: &UncertaintyArgs) -> Result<Vec<ObservationRow>> {
    let (files, standardizer_path) = match &args.models {
        ModelSource::Dir(dir) => {
            let files = match args.method {
                PredictorKind::DeepEnsemble => ensemble_files(dir)?,
                _ => vec![dir.join(MODEL_FILE)],
            };
            let std_path = dir.join(STANDARDIZER_FILE);
            (
                files,
                args.standardizer
                    .clone()
                    .or(std_path.exists().then_some(std_path)),
            )
        }
        ModelSource::Files(files) => (files.clone(), args.standardizer.clone()),
    };
    if files.is_empty() {
        return Err(CliError::Usage("no model given".into()));
    }
    if args.method != PredictorKind::DeepEnsemble && files.len() != 1 {
        return Err(CliError::Usage(format!(
            "method {} takes exactly one model, got {}",
            args.method.as_str(),
            files.len()
        )));
    }
    let models: Vec<Mlp> = files.iter().map(|f| load_model(f)).collect::<Result<_>>()?;
    let mut test = load_dataset(&args.test)?;
    if let Some(p) = &standardizer_path {
        let params: StandardizerParams = fsio::read_json(p)?;
        test = standardize_apply(&params, &test)?;
    }
    let predictor = match args.method {
        PredictorKind::Standard => Predictor::Standard(&models[0]),
        PredictorKind::McDropout => {
            if args.passes == 0 {
                return Err(CliError::Usage("`--passes` must be at least 1".into()));
            }
            Predictor::McDropout {
                model: &models[0],
                passes: args.passes,
            }
        }
        PredictorKind::DeepEnsemble => Predictor::DeepEnsemble(&models),
    };
    let assessed = batch_uncertainty(&predictor, test.rows(), args.seed)?;
    let rows: Vec<ObservationRow> = assessed
        .iter()
        .zip(test.labels())
        .enumerate()
        .map(|(i, (a, &y))| ObservationRow::new(i as u64, a, y))
        .collect();
    save_observations(&args.out.join(UNCERTAINTY_FILE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct RejectArgs {
    pub input: PathBuf,
    pub grid: Option<Vec<f64>>,
    pub rank_by: UncertaintyComponent,
    pub seed: u64,
    pub out: PathBuf,
    pub plot: Option<PathBuf>,
}

/// Writes `curve.csv` under `out`, plus an SVG at `plot` when given.
pub fn cmd_reject(args: &RejectArgs) -> Result<RejectionCurve> {
    let rows = load_observations(&args.input)?;
    let records = rows
        .iter()
        .map(|r| Evaluated {
            obs_id: r.obs_id,
            correct: r.correct(),
            uncertainty: match args.rank_by {
                UncertaintyComponent::Total => r.u_total,
                UncertaintyComponent::Data => r.u_data,
                UncertaintyComponent::Model => r.u_model,
            },
        })
        .collect();
    let es = EvaluatedSet::new(records)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.input.display())))?;
    let grid = args.grid.clone().unwrap_or_else(default_grid);
    let curve = sweep_curve(&es, &grid, args.seed)?;
    save_curve(&args.out.join(CURVE_FILE), &curve)?;
    if let Some(plot) = &args.plot {
        let label = args
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("curve");
        let svg = render_curves(
            &format!(
                "Rejection curves ranked by {} uncertainty",
                component_name(args.rank_by)
            ),
            &[Series {
                label,
                points: &curve.points,
            }],
        );
        fsio::write_text(plot, &svg)?;
    }
    Ok(curve)
}

pub fn component_name(c: UncertaintyComponent) -> &'static str {
    match c {
        UncertaintyComponent::Total => "total",
        UncertaintyComponent::Data => "data",
        UncertaintyComponent::Model => "model",
    }
}

pub fn cmd_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    write_experiment(cfg, out)
}
