//! Price models, rolling-window forecasting and the forecast pool.

mod forecast;
mod lasso;
mod linalg;
mod narx;
mod ols;
mod pool;
mod seed;
mod spec;

pub use forecast::{
    calibrate, forecast_day, forecast_day_components, predict_with, FittedModel,
    ForecastComponents, ModelConfig, Regressor,
};
pub use lasso::{bic, lambda_grid, lambda_max, lasso_fit, lasso_path, LassoConfig};
pub use narx::{narx_train, MinMaxScaler, NarxCommittee, NarxConfig, NarxNet};
pub use ols::{ols_fit, LinearFit};
pub use pool::{average_forecasts, eval_indices, run_pool, ForecastMatrix, PoolConfig};
pub use seed::{fnv1a, mix_seed};
pub use spec::{base_specs, DepVar, Estimator, Family, ForecastSpec, Window, WINDOWS};
