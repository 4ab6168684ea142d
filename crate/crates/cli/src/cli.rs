//! Command-line argument parsing and dispatch.

use std::path::PathBuf;

use abstain_core::uncertainty::UncertaintyComponent;
use abstain_core::{PredictorKind, ShiftLevel};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{
    cmd_experiment, cmd_reject, cmd_synth, cmd_train, cmd_uncertainty, ModelSource, RejectArgs,
    SynthArgs, TrainConfig, UncertaintyArgs,
};
use crate::error::{CliError, Result};
use crate::experiment::{ExperimentConfig, SyntheticSource};
use crate::fsio;

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "ABSTAIN_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "abstain",
    version,
    about = "Uncertainty-aware classification with rejection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic training set and shifted test sets as CSV.
    Synth {
        /// JSON with any of `train_n`, `test_n`, `base`, `shifts`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Training rows.
        #[arg(long)]
        n: Option<usize>,
        /// Rows per test set.
        #[arg(long)]
        test_n: Option<usize>,
        /// Shift levels to write (repeatable); all by default.
        #[arg(long = "level", value_enum)]
        levels: Vec<LevelArg>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train the standard / MC Dropout network and the ensemble members.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's `output_dir`.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
    /// Per-observation predictions and uncertainties for a test CSV.
    Uncertainty {
        /// Directory written by `train`.
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        models: Option<PathBuf>,
        /// Model file; repeat for ensemble members.
        #[arg(long)]
        model: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// MC Dropout forward passes.
        #[arg(long, default_value_t = 128)]
        passes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Standardizer JSON; defaults to the one in `--models`.
        #[arg(long)]
        standardizer: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rejection curve (NRA, CQ, RQ) from an uncertainty CSV.
    Reject {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated rejection fractions; 0, 0.05, ..., 0.95 by default.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "total")]
        rank_by: ComponentArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also render the curves to this SVG file.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the full repeated experiment and write a report directory.
    Experiment {
        /// Experiment JSON; defaults apply to missing fields and to a missing file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MethodArg {
    Standard,
    McDropout,
    DeepEnsemble,
}

impl From<MethodArg> for PredictorKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Standard => PredictorKind::Standard,
            MethodArg::McDropout => PredictorKind::McDropout,
            MethodArg::DeepEnsemble => PredictorKind::DeepEnsemble,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ComponentArg {
    Total,
    Data,
    Model,
}

impl From<ComponentArg> for UncertaintyComponent {
    fn from(c: ComponentArg) -> Self {
        match c {
            ComponentArg::Total => UncertaintyComponent::Total,
            ComponentArg::Data => UncertaintyComponent::Data,
            ComponentArg::Model => UncertaintyComponent::Model,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    None,
    Small,
    Large,
}

impl From<LevelArg> for ShiftLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::None => ShiftLevel::None,
            LevelArg::Small => ShiftLevel::Small,
            LevelArg::Large => ShiftLevel::Large,
        }
    }
}

fn output_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config).unwrap_or_else(|| PathBuf::from("."))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            n,
            test_n,
            levels,
            out,
        } => {
            let mut source: SyntheticSource = match &config {
                Some(p) => fsio::read_json(p)?,
                None => SyntheticSource::default(),
            };
            if let Some(n) = n {
                source.train_n = n;
            }
            if let Some(n) = test_n {
                source.test_n = n;
            }
            let written = cmd_synth(&SynthArgs {
                source,
                levels: levels.into_iter().map(Into::into).collect(),
                seed,
                out: out.out,
            })?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Train { config, seed, out } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = output_dir(out, cfg.output_dir.clone());
            let summary = cmd_train(&cfg, &out)?;
            println!(
                "trained {} network(s) into {}",
                summary
                    .ensemble
                    .len()
                    .max(usize::from(summary.model.is_some())),
                out.display()
            );
        }
        Command::Uncertainty {
            models,
            model,
            test,
            method,
            passes,
            seed,
            standardizer,
            out,
        } => {
            let source = match models {
                Some(dir) => ModelSource::Dir(dir),
                None => ModelSource::Files(model),
            };
            let rows = cmd_uncertainty(&UncertaintyArgs {
                models: source,
                test,
                method: method.into(),
                passes,
                seed,
                standardizer,
                out: out.out.clone(),
            })?;
            println!("{} observations -> {}", rows.len(), out.out.display());
        }
        Command::Reject {
            input,
            grid,
            rank_by,
            seed,
            plot,
            out,
        } => {
            let curve = cmd_reject(&RejectArgs {
                input,
                grid,
                rank_by: rank_by.into(),
                seed,
                out: out.out.clone(),
                plot,
            })?;
            println!(
                "{} grid points -> {}",
                curve.points.len(),
                out.out.display()
            );
        }
        Command::Experiment {
            config,
            seed,
            runs,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            let out = output_dir(out, cfg.output_dir.clone());
            let report = cmd_experiment(&cfg, &out)?;
            print!("{}", crate::experiment::summary_markdown(&report));
            println!("report written to {}", out.join("report.json").display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; clap errors become usage errors.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    run(cli)
}
