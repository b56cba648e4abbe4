//! Dynamics of swaption implied-volatility smiles and surfaces.
//!
//! The crate decomposes log-returns of volatility smiles (1-D) and
//! expiry×tenor surfaces (2-D) into Karhunen-Loève modes, forecasts the
//! tails of the projection series with filtered historical simulation,
//! rebuilds extreme smiles, checks them for static arbitrage under the
//! Bachelier model and backtests the forecasts.
//!
//! Pipeline:
//!
//! ```text
//! VolCubeSeries ─extract_slice→ FieldSeries ─log_returns/center→ ReturnField
//!   ─decompose→ KLModel ─project→ ProjectionSeries ─fhs→ QuantileSeries
//!   ─extreme_field→ extreme smile ─price_curve/check_no_arbitrage→ report
//!   QuantileSeries + realized ─hit_sequence→ kupiec_pof / christoffersen_ind
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)] // the negated forms also reject NaN

pub mod bachelier;
pub mod backtest;
pub mod fhs;
pub mod interp;
pub mod kldecomp;
pub mod par;
pub mod series;
pub mod special;
pub mod synth;
pub mod volgrid;

pub use par::Execution;
pub use series::TimeSeries;
