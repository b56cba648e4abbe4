//! Command-line pipeline around `volrisk`: synthetic cubes, smile
//! decomposition, FHS quantile forecasts, VaR backtests and no-arbitrage checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // the negated forms also reject NaN

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run_backtest, run_check_arb, run_decompose, run_fhs, run_synth};
pub use config::PipelineConfig;
pub use error::CliError;
pub use output::{Manifest, OutputDir, MANIFEST};
