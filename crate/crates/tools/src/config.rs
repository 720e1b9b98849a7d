// SPDX-License-Identifier: Apache-2.0

//! The JSON run configuration. Every section is optional; missing keys take
//! their defaults and unknown keys are rejected.
//!
//! ```json
//! {
//!   "synth":   {"n": 1000, "d": 64, "sep": 3.0},
//!   "split":   {"train_fraction": 0.6, "seed": 0},
//!   "methods": {"ccs": {"restarts": 10, "epochs": 1000}, "norm_mode": "probe-carried"},
//!   "sweep":   {"k": [1, 2, 4, 8], "trials": 32, "seed": 0},
//!   "jobs":    1,
//!   "paths":   {"data": ["runs/imdb"], "out": "runs/probe.json"}
//! }
//! ```

use std::path::{Path, PathBuf};

use ccs_core::dataset::SplitSpec;
use ccs_core::eval::{MethodConfig, DEFAULT_TRIALS};
use ccs_core::synthetic::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::formats::read_json;
use crate::{ToolError, ToolResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub k: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: vec![1, 2, 4, 8, 16, 32, 64],
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub data: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub split: SplitSpec,
    pub methods: MethodConfig,
    pub sweep: SweepConfig,
    pub jobs: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            split: SplitSpec::default(),
            methods: MethodConfig::default(),
            sweep: SweepConfig::default(),
            jobs: 1,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> ToolResult<Self> {
        let cfg: Self = read_json(path).map_err(|e| match e {
            ToolError::Json { path, source } => {
                ToolError::Usage(format!("{}: {source}", path.display()))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> ToolResult<()> {
        if self.jobs == 0 {
            return Err(ToolError::Usage("jobs must be >= 1".into()));
        }
        if self.sweep.trials == 0 {
            return Err(ToolError::Usage("sweep.trials must be >= 1".into()));
        }
        self.synth.validate()?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(ToolError::Usage(format!(
                "split.train_fraction must be in (0, 1), got {f}"
            )));
        }
        self.methods.ccs.validate()?;
        self.methods.bss.validate()?;
        Ok(())
    }
}
