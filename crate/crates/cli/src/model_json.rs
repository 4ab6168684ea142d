//! Model files: one JSON document `{config, weights, biases}`.
//!
//! `weights[l][i][j]` connects input unit `i` of layer `l` to output unit `j`. Every float is
//! printed with 17 significant digits, which is enough to reproduce each `f64` exactly.

use std::io;
use std::path::Path;

use abstain_core::{Mlp, MlpConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub config: MlpConfig,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelDocument {
    pub fn from_model(model: &Mlp) -> Self {
        ModelDocument {
            config: model.config().clone(),
            weights: model.weight_matrices(),
            biases: model.bias_vectors(),
        }
    }

    pub fn into_model(self) -> Result<Mlp> {
        Ok(Mlp::from_parts(self.config, self.weights, self.biases)?)
    }
}

/// serde_json formatter that prints floats as `d.dddddddddddddddde±x`.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json_sig17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Invariant(format!("serializing model: {e}")))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| CliError::Invariant(e.to_string()))
}

pub fn model_to_json(model: &Mlp) -> Result<String> {
    to_json_sig17(&ModelDocument::from_model(model))
}

pub fn model_from_json(text: &str, path: &Path) -> Result<Mlp> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    doc.into_model()
}

pub fn save_model(path: &Path, model: &Mlp) -> Result<()> {
    fsio::write_text(path, &model_to_json(model)?)
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    model_from_json(&fsio::read_text(path)?, path)
}
