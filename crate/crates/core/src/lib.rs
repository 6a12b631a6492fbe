//! Forecast-value evaluation for day-ahead electricity markets.
//!
//! The crate builds a pool of hourly day-ahead price forecasts (ARX, NARX and
//! LEAR models across several specifications and calibration windows),
//! backtests a daily-cycling battery against each forecast, and relates
//! statistical forecast quality to the realized arbitrage profit.
//!
//! Module map:
//! - [`ingest`]: market data loading, DST repair, regressor frames, synthetic markets
//! - [`transform`]: asinh variance stabilization and daily-mean decomposition
//! - [`models`]: OLS / LASSO / shallow-net estimation, rolling forecasts, the pool
//! - [`bess`]: battery schedules, profits and the perfect-foresight oracle
//! - [`metrics`]: RMSE, MAE, Cov-e, Corr-f, MHD, MPD and Spearman correlation
//! - [`analysis`]: metric-profit correlations and yearly profit statistics

pub mod analysis;
pub mod bess;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod panel;
pub mod transform;

pub use error::{EpfError, Result};
pub use panel::Panel;

/// Hours in a delivery day.
pub const HOURS: usize = 24;
