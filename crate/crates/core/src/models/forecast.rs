//! Rolling-window calibration and day-ahead forecasting for one pool member.
//!
//! For target day `t` and window `W` the model is fitted on days
//! `t-W ..= t-1` (each needing seven days of lags), so the working span is
//! `t-W-7 ..= t`. The target day's prices are replaced by NaN before any
//! transformation, which makes any accidental look-ahead visible as a
//! non-finite forecast.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lasso::{lambda_grid, lasso_fit, LassoConfig};
use super::narx::{narx_train, NarxCommittee, NarxConfig};
use super::ols::{ols_fit, LinearFit};
use super::seed::{fnv1a, mix_seed};
use super::spec::{DepVar, Estimator, Family, ForecastSpec, Window, WINDOWS};
use crate::error::{EpfError, Result};
use crate::ingest::{frame_for, mean_frame_for, FrameOptions, FrameSource, MarketDataset, MAX_LAG_DAYS};
use crate::panel::Panel;
use crate::transform::{split_daily_mean, vst_apply_panel, vst_fit_scaled, vst_invert, VstParams};
use crate::HOURS;

/// Everything besides the spec that determines a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub seed: u64,
    pub frames: FrameOptions,
    pub lasso: LassoConfig,
    pub narx: NarxConfig,
    /// Multiplier applied to the MAD in the VST (1 = raw MAD).
    pub mad_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: FrameOptions::default(),
            lasso: LassoConfig::default(),
            narx: NarxConfig::default(),
            mad_scale: 1.0,
        }
    }
}

/// A fitted map from one regressor row to a prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Linear(LinearFit),
    Narx(NarxCommittee),
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Linear(fit) => fit.predict(x),
            Regressor::Narx(c) => c.predict(x),
        }
    }
}

/// Models estimated on one calibration window.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub spec: ForecastSpec,
    /// 24 models (heterogeneous) or one shared model (pooled).
    pub hourly: Vec<Regressor>,
    /// Daily-mean model of the deviation specification.
    pub daily_mean: Option<Regressor>,
    /// Price and load VST parameters when the VST is on.
    pub vst: Option<(VstParams, VstParams)>,
}

impl FittedModel {
    pub fn hour_model(&self, hour: usize) -> &Regressor {
        if self.hourly.len() == 1 {
            &self.hourly[0]
        } else {
            &self.hourly[hour - 1]
        }
    }
}

/// Forecast split into its modelled parts, in model (possibly transformed) units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastComponents {
    pub prices: [f64; HOURS],
    /// Predicted daily mean (deviation specification only).
    pub daily_mean: Option<f64>,
    /// Predicted hourly deviations (deviation specification only).
    pub deviation: Option<[f64; HOURS]>,
}

/// Panels of one calibration window in model space.
struct Workspace {
    prices: Panel,
    load: Panel,
    res: Panel,
    endogenous: Panel,
    daily_means: Vec<f64>,
    commodities: Vec<[f64; 4]>,
    vst: Option<(VstParams, VstParams)>,
}

impl Workspace {
    fn source(&self) -> FrameSource<'_> {
        FrameSource {
            endogenous: &self.endogenous,
            prices: &self.prices,
            load: &self.load,
            res: &self.res,
            commodities: &self.commodities,
        }
    }

    fn target(&self) -> usize {
        self.prices.days() - 1
    }
}

fn window_days(spec: &ForecastSpec) -> Result<usize> {
    match spec.window {
        Window::Days(w) if w > 0 => Ok(w),
        Window::Days(_) => Err(EpfError::InvalidArgument("window must be positive".into())),
        Window::Avg => Err(EpfError::InvalidArgument(
            "an averaged spec has no single calibration window".into(),
        )),
    }
}

fn target_index(ds: &MarketDataset, date: NaiveDate) -> Result<usize> {
    ds.index_of(date)
        .ok_or_else(|| EpfError::InvalidArgument(format!("{date} is not in the dataset")))
}

fn workspace(
    spec: &ForecastSpec,
    ds: &MarketDataset,
    t: usize,
    cfg: &ModelConfig,
    fixed_vst: Option<(VstParams, VstParams)>,
) -> Result<Workspace> {
    let w = window_days(spec)?;
    if t >= ds.days() {
        return Err(EpfError::InvalidArgument(format!("target index {t} beyond dataset")));
    }
    if t < w + MAX_LAG_DAYS {
        return Err(EpfError::InsufficientHistory(format!(
            "{} needs {} days before {}, only {t} available",
            spec.id(),
            w + MAX_LAG_DAYS,
            ds.dates()[t]
        )));
    }
    let start = t - w - MAX_LAG_DAYS;
    let mut prices = ds.prices.slice_days(start, t + 1);
    let mut load = ds.load_fc.slice_days(start, t + 1);
    let res = ds.res_fc.slice_days(start, t + 1);
    let local_t = prices.days() - 1;
    prices.row_mut(local_t).fill(f64::NAN);

    let mut vst = None;
    if spec.vst {
        let (pp, lp) = match fixed_vst {
            Some(params) => params,
            None => {
                let train = MAX_LAG_DAYS * HOURS..local_t * HOURS;
                (
                    vst_fit_scaled(&prices.data()[train.clone()], cfg.mad_scale)?.with_fallback(),
                    vst_fit_scaled(&load.data()[train], cfg.mad_scale)?.with_fallback(),
                )
            }
        };
        prices = vst_apply_panel(&prices, &pp)?;
        load = vst_apply_panel(&load, &lp)?;
        vst = Some((pp, lp));
    }

    let (endogenous, daily_means) = match spec.depvar {
        DepVar::Direct => (prices.clone(), Vec::new()),
        DepVar::Deviation => {
            let split = split_daily_mean(&prices);
            (split.deviation, split.daily_mean)
        }
    };

    Ok(Workspace {
        prices,
        load,
        res,
        endogenous,
        daily_means,
        commodities: ds.commodities[start..=t].to_vec(),
        vst,
    })
}

/// Seed for one fitted model slot (hour index, 24 = pooled, 25 = daily mean).
fn slot_seed(cfg: &ModelConfig, spec: &ForecastSpec, date: NaiveDate, slot: u64) -> u64 {
    let window = match spec.window {
        Window::Days(w) => w as u64,
        Window::Avg => 0,
    };
    let day = chrono::Datelike::num_days_from_ce(&date) as u64;
    mix_seed(&[cfg.seed, fnv1a(&spec.base().id()), window, day, slot])
}

fn estimate(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    seed: u64,
    cfg: &ModelConfig,
) -> Result<Regressor> {
    match family {
        Family::Arx => Ok(Regressor::Linear(ols_fit(x, y)?)),
        Family::Lear => {
            let grid = lambda_grid(x, y, &cfg.lasso)?;
            Ok(Regressor::Linear(lasso_fit(x, y, &grid, &cfg.lasso)?))
        }
        Family::Narx => Ok(Regressor::Narx(narx_train(x, y, seed, &cfg.narx)?)),
    }
}

fn design(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let p = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_row_iterator(rows.len(), p, rows.into_iter().flatten());
    (x, DVector::from_vec(targets))
}

/// Fits the spec's models on the window ending the day before `target`.
pub fn calibrate(
    spec: &ForecastSpec,
    ds: &MarketDataset,
    target: NaiveDate,
    cfg: &ModelConfig,
) -> Result<FittedModel> {
    let t = target_index(ds, target)?;
    let ws = workspace(spec, ds, t, cfg, None)?;
    fit_workspace(spec, &ws, target, cfg)
}

fn fit_workspace(
    spec: &ForecastSpec,
    ws: &Workspace,
    target: NaiveDate,
    cfg: &ModelConfig,
) -> Result<FittedModel> {
    let src = ws.source();
    let train_days = MAX_LAG_DAYS..ws.target();
    let hourly_rows = |hour: usize| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut rows = Vec::with_capacity(train_days.len());
        let mut ys = Vec::with_capacity(train_days.len());
        for day in train_days.clone() {
            let frame = frame_for(&src, day, hour, spec.family, spec.estimator, cfg.frames)?;
            rows.push(frame.regressors());
            ys.push(ws.endogenous.get(day, hour - 1));
        }
        Ok((rows, ys))
    };

    let hourly = match spec.estimator {
        Estimator::Heterogeneous => (1..=HOURS)
            .map(|hour| {
                let (rows, ys) = hourly_rows(hour)?;
                let (x, y) = design(rows, ys);
                estimate(spec.family, &x, &y, slot_seed(cfg, spec, target, hour as u64 - 1), cfg)
            })
            .collect::<Result<Vec<_>>>()?,
        Estimator::Pooled => {
            let mut rows = Vec::with_capacity(train_days.len() * HOURS);
            let mut ys = Vec::with_capacity(train_days.len() * HOURS);
            for day in train_days.clone() {
                for hour in 1..=HOURS {
                    let frame = frame_for(&src, day, hour, spec.family, spec.estimator, cfg.frames)?;
                    rows.push(frame.regressors());
                    ys.push(ws.endogenous.get(day, hour - 1));
                }
            }
            let (x, y) = design(rows, ys);
            vec![estimate(spec.family, &x, &y, slot_seed(cfg, spec, target, 24), cfg)?]
        }
    };

    let daily_mean = match spec.depvar {
        DepVar::Direct => None,
        DepVar::Deviation => {
            let mut rows = Vec::with_capacity(train_days.len());
            let mut ys = Vec::with_capacity(train_days.len());
            for day in train_days {
                rows.push(mean_frame_for(&src, &ws.daily_means, day, spec.family, cfg.frames)?.regressors());
                ys.push(ws.daily_means[day]);
            }
            let (x, y) = design(rows, ys);
            Some(estimate(spec.family, &x, &y, slot_seed(cfg, spec, target, 25), cfg)?)
        }
    };

    Ok(FittedModel {
        spec: *spec,
        hourly,
        daily_mean,
        vst: ws.vst,
    })
}

fn predict_workspace(model: &FittedModel, ws: &Workspace, cfg: &ModelConfig) -> Result<ForecastComponents> {
    let src = ws.source();
    let t = ws.target();
    let spec = &model.spec;
    let mut hourly = [0.0; HOURS];
    for (h, out) in hourly.iter_mut().enumerate() {
        let frame = frame_for(&src, t, h + 1, spec.family, spec.estimator, cfg.frames)?;
        *out = model.hour_model(h + 1).predict(&frame.regressors());
    }

    let (mut prices, daily_mean, deviation) = match &model.daily_mean {
        None => (hourly, None, None),
        Some(mean_model) => {
            let frame = mean_frame_for(&src, &ws.daily_means, t, spec.family, cfg.frames)?;
            let mean = mean_model.predict(&frame.regressors());
            (hourly.map(|d| mean + d), Some(mean), Some(hourly))
        }
    };

    if let Some((pp, _)) = &model.vst {
        for p in prices.iter_mut() {
            *p = vst_invert(*p, pp)?;
        }
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(EpfError::NonFinite("forecast"));
    }
    Ok(ForecastComponents {
        prices,
        daily_mean,
        deviation,
    })
}

/// Applies an already fitted model to `target`. The model should have been
/// calibrated for the same target day.
pub fn predict_with(
    model: &FittedModel,
    ds: &MarketDataset,
    target: NaiveDate,
    cfg: &ModelConfig,
) -> Result<ForecastComponents> {
    let t = target_index(ds, target)?;
    let ws = workspace(&model.spec, ds, t, cfg, model.vst)?;
    predict_workspace(model, &ws, cfg)
}

/// Forecast with its daily-mean and deviation parts. Averaged specs are not
/// decomposed; use [`forecast_day`] for them.
pub fn forecast_day_components(
    spec: &ForecastSpec,
    ds: &MarketDataset,
    target: NaiveDate,
    cfg: &ModelConfig,
) -> Result<ForecastComponents> {
    let t = target_index(ds, target)?;
    let ws = workspace(spec, ds, t, cfg, None)?;
    let model = fit_workspace(spec, &ws, target, cfg)?;
    predict_workspace(&model, &ws, cfg)
}

/// Day-ahead prices for `target`, re-estimating on the rolling window.
/// `Window::Avg` averages the seven standard windows.
pub fn forecast_day(
    spec: &ForecastSpec,
    ds: &MarketDataset,
    target: NaiveDate,
    cfg: &ModelConfig,
) -> Result<[f64; HOURS]> {
    match spec.window {
        Window::Days(_) => Ok(forecast_day_components(spec, ds, target, cfg)?.prices),
        Window::Avg => {
            let mut acc = [0.0; HOURS];
            for w in WINDOWS {
                let f = forecast_day_components(&spec.with_window(Window::Days(w)), ds, target, cfg)?;
                for (a, v) in acc.iter_mut().zip(f.prices) {
                    *a += v;
                }
            }
            Ok(acc.map(|a| a / WINDOWS.len() as f64))
        }
    }
}
