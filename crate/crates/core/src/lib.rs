// SPDX-License-Identifier: Apache-2.0

//! Unsupervised recovery of yes/no knowledge from contrast-pair activations.
//!
//! Every question is answered both ways, producing a pair of activation
//! vectors. This crate learns from those pairs without labels:
//!
//! * [`ccs`]: a sigmoid-linear probe trained so that the two answers of a
//!   pair get probabilities that are consistent (they sum to one) and
//!   confident (one of them is near zero).
//! * [`crc`]: clustering of the pair differences, either by thresholding the
//!   top principal component or by searching for a bimodal direction.
//! * [`baselines`]: calibrated zero-shot prediction from label logits and a
//!   supervised logistic-regression ceiling.
//! * [`eval`]: sign resolution, aggregation, transfer matrices, sample
//!   complexity sweeps and a coarse significance bound.
//! * [`synthetic`]: a generator with a planted truth direction.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel execution
//! and the command-line tool live in the `ccs-tools` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod ccs;
pub mod crc;
pub mod dataset;
mod error;
pub mod eval;
pub mod exec;
pub mod linalg;
mod math;
pub mod matrix;
pub mod optim;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Orientation of a learned clustering relative to the "Yes" answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "i8", try_from = "i8"))]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    #[must_use]
    pub fn flip(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(Error::InvalidSign(other)),
        }
    }
}
