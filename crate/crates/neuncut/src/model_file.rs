//! Versioned JSON model files.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "layer_dims": [2, 64, 64, 2],
//!   "weights": [[...], [...], [...]],
//!   "biases": [[...], [...], [...]],
//!   "objective": "ncut",
//!   "k": 2,
//!   "sigma": 3.0,
//!   "s": null,
//!   "seed": 0
//! }
//! ```
//!
//! `weights[l]` is layer `l`'s `fan_in × fan_out` matrix flattened row by
//! row. Floats are written in shortest round-trip form, so a save/load
//! cycle reproduces every bit.

use std::path::Path;

use neuncut_core::model::Dense;
use neuncut_core::{Matrix, MlpModel, Objective};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, write_atomic};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub objective: String,
    pub k: usize,
    pub sigma: f64,
    pub s: Option<usize>,
    pub seed: u64,
}

/// A model plus the graph settings it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub model: MlpModel,
    pub objective: Objective,
    pub sigma: f64,
    pub knn: Option<usize>,
}

impl SavedModel {
    pub fn to_file(&self) -> ModelFile {
        let layers = self.model.layers();
        ModelFile {
            format_version: FORMAT_VERSION,
            layer_dims: self.model.layer_dims().to_vec(),
            weights: layers.iter().map(|l| l.weights.as_slice().to_vec()).collect(),
            biases: layers.iter().map(|l| l.bias.clone()).collect(),
            objective: self.objective.name().to_string(),
            k: self.model.clusters(),
            sigma: self.sigma,
            s: self.knn,
            seed: self.model.seed(),
        }
    }

    pub fn from_file(file: ModelFile, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format { path: path.to_path_buf(), message };
        if file.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format_version {}", file.format_version)));
        }
        let dims = &file.layer_dims;
        if dims.len() < 2 || file.weights.len() != dims.len() - 1 || file.biases.len() != dims.len() - 1 {
            return Err(bad(format!("{} weight and {} bias arrays for layer_dims {dims:?}", file.weights.len(), file.biases.len())));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, (w, b)) in file.weights.into_iter().zip(file.biases).enumerate() {
            let weights = Matrix::from_vec(dims[l], dims[l + 1], w)
                .map_err(|_| bad(format!("layer {l} weights do not match {}x{}", dims[l], dims[l + 1])))?;
            layers.push(Dense { weights, bias: b });
        }
        let model = MlpModel::from_layers(layers, file.seed)?;
        if model.clusters() != file.k {
            return Err(bad(format!("k = {} but the output layer has {} units", file.k, model.clusters())));
        }
        Ok(Self { model, objective: file.objective.parse()?, sigma: file.sigma, knn: file.s })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_file(file, path)
    }
}
