use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::forward::{predict_cate, tarnet_forward};
use super::params::{Activation, Dense, TarnetParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "escfr-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Affine outcome transform applied during training: `y_std = (y - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    pub const IDENTITY: Self = Self { mean: 0.0, scale: 1.0 };

    pub fn fit(y: &[f64]) -> Self {
        let n = y.len().max(1) as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, scale }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

/// Trained parameters together with the outcome scaling they were fit under.
#[derive(Debug, Clone, PartialEq)]
pub struct TarnetModel {
    pub params: TarnetParams,
    pub outcome: Standardizer,
}

impl TarnetModel {
    /// Effect estimates in outcome units.
    pub fn predict_cate(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(predict_cate(&self.params, x)? * self.outcome.scale)
    }

    /// Potential-outcome predictions `(yhat0, yhat1)` in outcome units.
    pub fn predict_outcomes(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let f = tarnet_forward(&self.params, x)?;
        let back = |v: Array1<f64>| v.mapv(|z| self.outcome.inverse(z));
        Ok((back(f.yhat0), back(f.yhat1)))
    }

    pub fn predict_factual(&self, x: ArrayView2<'_, f64>, t: &[bool]) -> Result<Array1<f64>> {
        let (y0, y1) = self.predict_outcomes(x)?;
        Ok(Array1::from_iter(
            t.iter().enumerate().map(|(i, &ti)| if ti { y1[i] } else { y0[i] }),
        ))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    activation: Activation,
    psi: Vec<LayerRecord>,
    head0: Vec<LayerRecord>,
    head1: Vec<LayerRecord>,
    outcome: Standardizer,
    config_hash: String,
}

fn to_records(layers: &[Dense]) -> Vec<LayerRecord> {
    layers
        .iter()
        .map(|l| LayerRecord {
            rows: l.fan_in(),
            cols: l.fan_out(),
            weight: l.weight.iter().copied().collect(),
            bias: l.bias.to_vec(),
        })
        .collect()
}

fn from_records(records: Vec<LayerRecord>) -> Result<Vec<Dense>> {
    records
        .into_iter()
        .map(|r| {
            let weight = Array2::from_shape_vec((r.rows, r.cols), r.weight)
                .map_err(|e| Error::Shape(format!("checkpoint layer: {e}")))?;
            Ok(Dense {
                weight,
                bias: Array1::from(r.bias),
            })
        })
        .collect()
}

/// JSON checkpoint: layer shapes with flat row-major arrays, outcome scaling and config hash.
pub fn save_checkpoint(model: &TarnetModel, config_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        activation: model.params.activation,
        psi: to_records(&model.params.psi),
        head0: to_records(&model.params.head0),
        head1: to_records(&model.params.head1),
        outcome: model.outcome,
        config_hash: config_hash.into(),
    };
    std::fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

/// Returns the model and the config hash it was written with.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(TarnetModel, String)> {
    let file: CheckpointFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
        return Err(Error::Input(format!(
            "unsupported checkpoint {} v{}",
            file.format, file.version
        )));
    }
    let params = TarnetParams {
        psi: from_records(file.psi)?,
        head0: from_records(file.head0)?,
        head1: from_records(file.head1)?,
        activation: file.activation,
    };
    params.validate()?;
    Ok((
        TarnetModel {
            params,
            outcome: file.outcome,
        },
        file.config_hash,
    ))
}
