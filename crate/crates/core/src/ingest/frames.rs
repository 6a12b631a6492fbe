//! Per-(day, hour) regressor vectors for the ARX, NARX and LEAR models.
//!
//! Hourly frames (target hour `h` of day `t`):
//!
//! | block          | ARX / NARX                                   | LEAR                                   |
//! |----------------|----------------------------------------------|----------------------------------------|
//! | deterministic  | constant, weekend dummy, Monday dummy        | 7 day-of-week dummies                  |
//! | ar_terms       | `Y(t-1,h)`, `Y(t-2,h)`, `Y(t-7,h)`           | all 24 hours of `Y(t-1)`, `Y(t-2)`, `Y(t-7)` |
//! | x1             | min/max/mean `P(t-1)`, mean RES(t), mean L(t), gas/oil/coal/EUA(t-2) | same (optional) |
//! | x2             | `L(t,h)`, `RES(t,h)`, `L(t-1,h)`, `RES(t-1,h)` | all 24 hours of L(t), L(t-1), RES(t), RES(t-1) |
//! | augmentation   | optional hour encoding (pooled NARX)         | pooled only: `Y(t-1,h)`, `Y(t-2,h)`, `Y(t-7,h)`, L/RES at `t` and `t-1` |
//!
//! `Y` is the endogenous panel (prices or deviations from the daily mean);
//! `P` is always the price panel. Nothing dated on or after `t` is read
//! except the day-ahead load/RES forecasts and the calendar dummies.

use chrono::{NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::MarketDataset;
use crate::error::{EpfError, Result};
use crate::models::{DepVar, Estimator, Family};
use crate::panel::Panel;
use crate::transform::split_daily_mean;
use crate::HOURS;

/// Longest autoregressive lag in days.
pub const MAX_LAG_DAYS: usize = 7;

const AR_LAGS: [usize; 3] = [1, 2, 7];
const COMMODITY_LAG: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameOptions {
    /// Keep the 9-entry common vector in LEAR frames.
    pub lear_retain_x1: bool,
    /// Append a sin/cos encoding of the target hour to pooled NARX frames.
    pub narx_hour_encoding: bool,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self {
            lear_retain_x1: true,
            narx_hour_encoding: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTarget {
    /// Delivery hour, 1..=24.
    Hour(usize),
    /// The daily-mean component of the deviation specification.
    DailyMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorFrame {
    pub target_day: NaiveDate,
    pub target: FrameTarget,
    pub deterministic: Vec<f64>,
    pub ar_terms: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub augmentation: Vec<f64>,
}

impl RegressorFrame {
    pub fn len(&self) -> usize {
        self.deterministic.len()
            + self.ar_terms.len()
            + self.x1.len()
            + self.x2.len()
            + self.augmentation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenated regressors in block order.
    pub fn regressors(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.extend_into(&mut out);
        out
    }

    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.deterministic);
        out.extend_from_slice(&self.ar_terms);
        out.extend_from_slice(&self.x1);
        out.extend_from_slice(&self.x2);
        out.extend_from_slice(&self.augmentation);
    }
}

/// Panels the frame builder reads from. Each panel shares the day axis.
#[derive(Debug, Clone, Copy)]
pub struct FrameSource<'a> {
    pub endogenous: &'a Panel,
    pub prices: &'a Panel,
    pub load: &'a Panel,
    pub res: &'a Panel,
    pub commodities: &'a [[f64; 4]],
}

impl<'a> FrameSource<'a> {
    pub fn from_dataset(ds: &'a MarketDataset, endogenous: &'a Panel) -> Self {
        Self {
            endogenous,
            prices: &ds.prices,
            load: &ds.load_fc,
            res: &ds.res_fc,
            commodities: &ds.commodities,
        }
    }

    fn days(&self) -> usize {
        self.prices.days()
    }
}

/// Hourly regressor count for a family/estimator combination.
pub fn regressor_count(family: Family, estimator: Estimator, opts: FrameOptions) -> usize {
    match family {
        Family::Arx | Family::Narx => {
            let enc = if family == Family::Narx
                && estimator == Estimator::Pooled
                && opts.narx_hour_encoding
            {
                2
            } else {
                0
            };
            3 + 3 + 9 + 4 + enc
        }
        Family::Lear => {
            let x1 = if opts.lear_retain_x1 { 9 } else { 0 };
            let aug = if estimator == Estimator::Pooled { 7 } else { 0 };
            7 + 3 * HOURS + x1 + 4 * HOURS + aug
        }
    }
}

fn deterministic(family: Family, weekday: Weekday) -> Vec<f64> {
    match family {
        Family::Lear => {
            let idx = weekday.num_days_from_monday() as usize;
            (0..7).map(|i| if i == idx { 1.0 } else { 0.0 }).collect()
        }
        Family::Arx | Family::Narx => {
            let weekend = matches!(weekday, Weekday::Sat | Weekday::Sun);
            vec![
                1.0,
                if weekend { 1.0 } else { 0.0 },
                if weekday == Weekday::Mon { 1.0 } else { 0.0 },
            ]
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn common_vector(src: &FrameSource<'_>, day: usize) -> Vec<f64> {
    let prev = src.prices.row(day - 1);
    let min = prev.iter().copied().fold(f64::INFINITY, f64::min);
    let max = prev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = src.commodities[day - COMMODITY_LAG];
    vec![
        min,
        max,
        mean(prev),
        mean(src.res.row(day)),
        mean(src.load.row(day)),
        c[0],
        c[1],
        c[2],
        c[3],
    ]
}

fn check_day(src: &FrameSource<'_>, day: usize) -> Result<()> {
    if day < MAX_LAG_DAYS {
        return Err(EpfError::InsufficientHistory(format!(
            "day index {day} needs {MAX_LAG_DAYS} days of history"
        )));
    }
    if day >= src.days() {
        return Err(EpfError::InvalidArgument(format!(
            "day index {day} beyond the {} available days",
            src.days()
        )));
    }
    Ok(())
}

/// Frame for target day index `day` and delivery hour `hour` (1..=24).
pub fn frame_for(
    src: &FrameSource<'_>,
    day: usize,
    hour: usize,
    family: Family,
    estimator: Estimator,
    opts: FrameOptions,
) -> Result<RegressorFrame> {
    check_day(src, day)?;
    if !(1..=HOURS).contains(&hour) {
        return Err(EpfError::InvalidArgument(format!("hour {hour} outside 1..=24")));
    }
    let h = hour - 1;
    let date = src.prices.dates()[day];
    let weekday = chrono::Datelike::weekday(&date);
    let y = src.endogenous;

    let (ar_terms, x1, x2, augmentation) = match family {
        Family::Arx | Family::Narx => {
            let ar = AR_LAGS.iter().map(|&p| y.get(day - p, h)).collect();
            let x2 = vec![
                src.load.get(day, h),
                src.res.get(day, h),
                src.load.get(day - 1, h),
                src.res.get(day - 1, h),
            ];
            let aug = if family == Family::Narx
                && estimator == Estimator::Pooled
                && opts.narx_hour_encoding
            {
                let angle = 2.0 * std::f64::consts::PI * hour as f64 / HOURS as f64;
                vec![angle.sin(), angle.cos()]
            } else {
                Vec::new()
            };
            (ar, common_vector(src, day), x2, aug)
        }
        Family::Lear => {
            let mut ar = Vec::with_capacity(3 * HOURS);
            for p in AR_LAGS {
                ar.extend_from_slice(y.row(day - p));
            }
            let mut x2 = Vec::with_capacity(4 * HOURS);
            x2.extend_from_slice(src.load.row(day));
            x2.extend_from_slice(src.load.row(day - 1));
            x2.extend_from_slice(src.res.row(day));
            x2.extend_from_slice(src.res.row(day - 1));
            let x1 = if opts.lear_retain_x1 {
                common_vector(src, day)
            } else {
                Vec::new()
            };
            let aug = if estimator == Estimator::Pooled {
                vec![
                    y.get(day - 1, h),
                    y.get(day - 2, h),
                    y.get(day - 7, h),
                    src.load.get(day, h),
                    src.load.get(day - 1, h),
                    src.res.get(day, h),
                    src.res.get(day - 1, h),
                ]
            } else {
                Vec::new()
            };
            (ar, x1, x2, aug)
        }
    };

    Ok(RegressorFrame {
        target_day: date,
        target: FrameTarget::Hour(hour),
        deterministic: deterministic(family, weekday),
        ar_terms,
        x1,
        x2,
        augmentation,
    })
}

/// Frame for the daily-mean model: deterministic terms, lags 1/2/7 of the
/// daily mean, the common vector and the previous day's mean load and RES.
pub fn mean_frame_for(
    src: &FrameSource<'_>,
    daily_means: &[f64],
    day: usize,
    family: Family,
    opts: FrameOptions,
) -> Result<RegressorFrame> {
    check_day(src, day)?;
    let date = src.prices.dates()[day];
    let x1 = if family == Family::Lear && !opts.lear_retain_x1 {
        Vec::new()
    } else {
        common_vector(src, day)
    };
    Ok(RegressorFrame {
        target_day: date,
        target: FrameTarget::DailyMean,
        deterministic: deterministic(family, chrono::Datelike::weekday(&date)),
        ar_terms: AR_LAGS.iter().map(|&p| daily_means[day - p]).collect(),
        x1,
        x2: vec![mean(src.load.row(day - 1)), mean(src.res.row(day - 1))],
        augmentation: Vec::new(),
    })
}

fn endogenous_panel(ds: &MarketDataset, depvar: DepVar) -> Panel {
    match depvar {
        DepVar::Direct => ds.prices.clone(),
        DepVar::Deviation => split_daily_mean(&ds.prices).deviation,
    }
}

/// Hourly frames for every day with full lag history (day index ≥ 7), in
/// (day, hour) order.
///
/// The estimator only changes the frame content for LEAR (pooled frames
/// carry seven hour-specific augmentation regressors) and, optionally,
/// pooled NARX; stacking for pooled estimation happens at fit time.
pub fn build_frames(
    ds: &MarketDataset,
    family: Family,
    depvar: DepVar,
    estimator: Estimator,
    opts: FrameOptions,
) -> Result<Vec<RegressorFrame>> {
    if ds.days() <= MAX_LAG_DAYS {
        return Err(EpfError::InsufficientHistory(format!(
            "{} days available, at least {} required",
            ds.days(),
            MAX_LAG_DAYS + 1
        )));
    }
    let y = endogenous_panel(ds, depvar);
    let src = FrameSource::from_dataset(ds, &y);
    let mut frames = Vec::with_capacity((ds.days() - MAX_LAG_DAYS) * HOURS);
    for day in MAX_LAG_DAYS..ds.days() {
        for hour in 1..=HOURS {
            frames.push(frame_for(&src, day, hour, family, estimator, opts)?);
        }
    }
    Ok(frames)
}

/// Daily-mean frames for every day with full lag history.
pub fn build_mean_frames(
    ds: &MarketDataset,
    family: Family,
    opts: FrameOptions,
) -> Result<Vec<RegressorFrame>> {
    if ds.days() <= MAX_LAG_DAYS {
        return Err(EpfError::InsufficientHistory(format!(
            "{} days available, at least {} required",
            ds.days(),
            MAX_LAG_DAYS + 1
        )));
    }
    let split = split_daily_mean(&ds.prices);
    let src = FrameSource::from_dataset(ds, &split.deviation);
    (MAX_LAG_DAYS..ds.days())
        .map(|day| mean_frame_for(&src, &split.daily_mean, day, family, opts))
        .collect()
}
