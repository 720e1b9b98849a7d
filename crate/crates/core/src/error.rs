// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid label {value} at index {index}")]
    InvalidLabel { index: usize, value: u8 },
    #[error("invalid sign {0}, expected +1 or -1")]
    InvalidSign(i8),
    #[error("dataset is already normalized")]
    AlreadyNormalized,
    #[error("operation requires a normalized dataset")]
    NotNormalized,
    #[error("need at least {needed} examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("dataset has no logits")]
    MissingLogits,
    #[error("class {0} has no examples")]
    EmptyClass(u8),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("projections have no variance")]
    NoVariance,
    #[error("all {0} restarts produced non-finite losses")]
    AllRestartsFailed(usize),
    #[error("empty batch")]
    Empty,
}

impl Error {
    /// True for failures of the optimizers rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::AllRestartsFailed(_) | Error::NoVariance | Error::NonFinite(_)
        )
    }
}
