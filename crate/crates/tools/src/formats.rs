// SPDX-License-Identifier: Apache-2.0

//! JSON files for trained models.
//!
//! * `probe.json`: `{"d", "theta", "bias", "sign", "norm"}` for CCS probes,
//! * `direction.json`: `{"d", "v", "method", "loss", "sign"}` for TPC/BSS,
//! * LR models: `{"d", "weights", "bias", "sign", "norm", "covariate"}`.
//!
//! `sign` is `1` or `-1`. Direction files also carry the `norm` block so
//! they can be applied to raw datasets.

use std::fs;
use std::path::Path;

use ccs_core::baselines::LrModel;
use ccs_core::ccs::Probe;
use ccs_core::crc::{CrcMethod, Direction};
use ccs_core::dataset::NormStats;
use ccs_core::eval::FittedModel;
use ccs_core::Sign;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{ToolError, ToolResult};

pub const LR_COVARIATE: &str = "concat_pos_neg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormFile {
    pub mu_pos: Vec<f64>,
    pub sigma_pos: Vec<f64>,
    pub mu_neg: Vec<f64>,
    pub sigma_neg: Vec<f64>,
    pub epsilon: f64,
}

impl From<&NormStats> for NormFile {
    fn from(s: &NormStats) -> Self {
        Self {
            mu_pos: s.mu_pos.clone(),
            sigma_pos: s.sigma_pos.clone(),
            mu_neg: s.mu_neg.clone(),
            sigma_neg: s.sigma_neg.clone(),
            epsilon: s.epsilon,
        }
    }
}

impl From<NormFile> for NormStats {
    fn from(f: NormFile) -> Self {
        Self {
            mu_pos: f.mu_pos,
            sigma_pos: f.sigma_pos,
            mu_neg: f.mu_neg,
            sigma_neg: f.sigma_neg,
            epsilon: f.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFile {
    pub d: usize,
    pub theta: Vec<f64>,
    pub bias: f64,
    pub sign: Sign,
    pub norm: NormFile,
    /// Unsupervised training loss, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionFile {
    pub d: usize,
    pub v: Vec<f64>,
    pub method: CrcMethod,
    pub loss: f64,
    pub sign: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrFile {
    pub d: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub sign: Sign,
    pub norm: NormFile,
    pub covariate: String,
}

/// The JSON file contents for `model`.
pub fn model_to_json(model: &FittedModel) -> Value {
    let v = match model {
        FittedModel::Ccs { probe, loss } => serde_json::to_value(ProbeFile {
            d: probe.d(),
            theta: probe.theta.clone(),
            bias: probe.bias,
            sign: probe.sign,
            norm: NormFile::from(&probe.norm_stats),
            loss: loss.is_finite().then_some(*loss),
        }),
        FittedModel::Crc {
            direction,
            norm_stats,
        } => serde_json::to_value(DirectionFile {
            d: direction.d(),
            v: direction.v.clone(),
            method: direction.method,
            loss: direction.loss,
            sign: direction.sign,
            norm: Some(NormFile::from(norm_stats)),
        }),
        FittedModel::Lr(m) => serde_json::to_value(LrFile {
            d: m.d(),
            weights: m.weights.clone(),
            bias: m.bias,
            sign: Sign::Positive,
            norm: NormFile::from(&m.norm_stats),
            covariate: LR_COVARIATE.to_string(),
        }),
    };
    v.expect("model files contain only finite numbers and strings")
}

fn check_len(path: &Path, what: &str, len: usize, d: usize) -> ToolResult<()> {
    if len != d {
        return Err(ToolError::format(
            path,
            format!("{what} has length {len}, expected {d}"),
        ));
    }
    Ok(())
}

/// Parses any of the three model files, telling them apart by their keys.
pub fn model_from_json(path: &Path, v: Value) -> ToolResult<FittedModel> {
    let has = |k: &str| v.get(k).is_some();
    let model = if has("covariate") {
        let f: LrFile = serde_json::from_value(v).map_err(|e| ToolError::json(path, e))?;
        if f.covariate != LR_COVARIATE {
            return Err(ToolError::format(
                path,
                format!("unsupported covariate {:?}", f.covariate),
            ));
        }
        check_len(path, "weights", f.weights.len(), 2 * f.d)?;
        FittedModel::Lr(LrModel {
            weights: f.weights,
            bias: f.bias,
            norm_stats: f.norm.into(),
            converged: true,
            iterations: 0,
        })
    } else if has("theta") {
        let f: ProbeFile = serde_json::from_value(v).map_err(|e| ToolError::json(path, e))?;
        check_len(path, "theta", f.theta.len(), f.d)?;
        let probe = Probe {
            theta: f.theta,
            bias: f.bias,
            sign: f.sign,
            norm_stats: f.norm.into(),
        };
        probe.validate()?;
        FittedModel::Ccs {
            probe,
            loss: f.loss.unwrap_or(f64::NAN),
        }
    } else if has("v") {
        let f: DirectionFile = serde_json::from_value(v).map_err(|e| ToolError::json(path, e))?;
        check_len(path, "v", f.v.len(), f.d)?;
        let d = f.d;
        FittedModel::Crc {
            direction: Direction {
                v: f.v,
                method: f.method,
                loss: f.loss,
                sign: f.sign,
            },
            norm_stats: f.norm.map_or_else(|| NormStats::identity(d), NormStats::from),
        }
    } else {
        return Err(ToolError::format(
            path,
            "not a probe, direction or logistic-regression file",
        ));
    };
    if model.norm_stats().d() != model_dim(&model) {
        return Err(ToolError::format(path, "norm statistics do not match d"));
    }
    Ok(model)
}

fn model_dim(m: &FittedModel) -> usize {
    match m {
        FittedModel::Ccs { probe, .. } => probe.d(),
        FittedModel::Crc { direction, .. } => direction.d(),
        FittedModel::Lr(m) => m.d(),
    }
}

pub fn save_model(model: &FittedModel, path: impl AsRef<Path>) -> ToolResult<()> {
    write_json(path.as_ref(), &model_to_json(model))
}

pub fn load_model(path: impl AsRef<Path>) -> ToolResult<FittedModel> {
    let path = path.as_ref();
    model_from_json(path, read_json(path)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> ToolResult<T> {
    let bytes = fs::read(path).map_err(|e| ToolError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| ToolError::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> ToolResult<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| ToolError::json(path, e))?;
    text.push(b'\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| ToolError::io(path, e))
}
