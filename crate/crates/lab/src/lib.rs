//! Experiment harness around `wavesrc-core`: TOML run configs, a binary
//! dataset container, the stability sweep, self-checks and the `wavesrc`
//! command line.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod scenario;
pub mod svg;
pub mod sweep;

pub use config::RunConfig;
pub use error::{LabError, Result};
pub use scenario::Scenario;
