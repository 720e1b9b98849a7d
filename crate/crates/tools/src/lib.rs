// SPDX-License-Identifier: Apache-2.0

//! Standard-library side of `ccs-core`: the on-disk dataset layout, model
//! and report files, a rayon-backed executor and the `ccs` command-line tool.

pub mod cli;
pub mod config;
mod error;
pub mod exec;
pub mod formats;
pub mod report;
pub mod store;

pub use error::{ToolError, ToolResult};
