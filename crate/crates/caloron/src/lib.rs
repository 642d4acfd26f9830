//! Batch driver for the heat-flow construction of periodic instantons.
//!
//! A run reads one TOML config, flows the Hermitian metric to a stationary point,
//! checkpoints along the way and writes `diagnostics.csv` and `observables.json`.
//! File formats are described in `docs/formats.md`.

// `!(x > 0.0)` guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod run;
pub mod sweep;
pub mod verify;

pub use checkpoint::{Checkpoint, RunStatus};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use run::{run, ExitStatus, RunSummary};
