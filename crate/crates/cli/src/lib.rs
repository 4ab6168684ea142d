//! File formats, the experiment harness and the command-line interface for `abstain-core`.
//!
//! - [`dataset_csv`]: datasets as CSV with a `label` column.
//! - [`model_json`]: networks as `{config, weights, biases}` JSON with 17 significant digits.
//! - [`tables`]: per-observation uncertainty CSVs and rejection-curve CSVs.
//! - [`svg`]: three-panel rejection-curve plots.
//! - [`experiment`]: the repeated three-method, multi-shift experiment and its report.
//! - [`commands`] and [`cli`]: the `synth`, `train`, `uncertainty`, `reject` and
//!   `experiment` subcommands.
#![forbid(unsafe_code)]

pub mod cli;
pub mod commands;
pub mod dataset_csv;
pub mod error;
pub mod experiment;
mod fsio;
pub mod model_json;
pub mod numfmt;
pub mod svg;
pub mod tables;

pub use error::{CliError, Result};
