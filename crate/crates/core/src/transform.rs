//! Variance-stabilizing transformation and the daily-mean decomposition.
//!
//! The VST standardizes a series by its median and median absolute
//! deviation and then applies the area hyperbolic sine:
//! `z = asinh((x - a) / b)`, inverted as `x = b * sinh(z) + a`.

use log::warn;

use crate::error::{EpfError, Result};
use crate::panel::Panel;

/// Normal-consistency factor for the MAD; pass to [`vst_fit_scaled`] to use it.
pub const MAD_NORMAL_CONSISTENCY: f64 = 1.4826;

/// Location `a` (median) and scale `b` (median absolute deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VstParams {
    pub a: f64,
    pub b: f64,
}

impl VstParams {
    pub fn is_degenerate(&self) -> bool {
        !(self.b > 0.0) || !self.b.is_finite()
    }

    /// Replaces a zero scale with 1 so constant calibration series stay usable.
    pub fn with_fallback(self) -> Self {
        if self.is_degenerate() {
            warn!("VST scale is degenerate (b = {}); falling back to b = 1", self.b);
            Self { a: self.a, b: 1.0 }
        } else {
            self
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median and raw (unscaled) MAD of `series`. `b` may be zero.
pub fn vst_fit(series: &[f64]) -> Result<VstParams> {
    vst_fit_scaled(series, 1.0)
}

/// Like [`vst_fit`] with the MAD multiplied by `mad_scale`.
pub fn vst_fit_scaled(series: &[f64], mad_scale: f64) -> Result<VstParams> {
    if series.is_empty() {
        return Err(EpfError::InvalidArgument("VST fit on an empty series".into()));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(EpfError::NonFinite("VST calibration series"));
    }
    let a = median(series);
    let deviations: Vec<f64> = series.iter().map(|x| (x - a).abs()).collect();
    let b = median(&deviations) * mad_scale;
    Ok(VstParams { a, b })
}

pub fn vst_apply(x: f64, p: &VstParams) -> Result<f64> {
    if p.is_degenerate() {
        return Err(EpfError::DegenerateScale);
    }
    Ok(((x - p.a) / p.b).asinh())
}

pub fn vst_invert(z: f64, p: &VstParams) -> Result<f64> {
    if p.is_degenerate() {
        return Err(EpfError::DegenerateScale);
    }
    Ok(p.b * z.sinh() + p.a)
}

pub fn vst_apply_panel(panel: &Panel, p: &VstParams) -> Result<Panel> {
    if p.is_degenerate() {
        return Err(EpfError::DegenerateScale);
    }
    let (a, b) = (p.a, p.b);
    Ok(panel.map(|x| ((x - a) / b).asinh()))
}

/// `daily_mean + deviation` reconstructs the source panel.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyDecomposition {
    pub daily_mean: Vec<f64>,
    pub deviation: Panel,
}

pub fn split_daily_mean(prices: &Panel) -> DailyDecomposition {
    let daily_mean: Vec<f64> = (0..prices.days()).map(|d| prices.row_mean(d)).collect();
    let mut deviation = prices.clone();
    for (d, mean) in daily_mean.iter().enumerate() {
        for v in deviation.row_mut(d) {
            *v -= mean;
        }
    }
    DailyDecomposition {
        daily_mean,
        deviation,
    }
}

/// Inverse of [`split_daily_mean`].
///
/// Bit-exact whenever every value lies within a factor of two of its day
/// mean (the subtraction in the split is then exact); otherwise exact up to
/// one rounding of the split.
pub fn recombine(d: &DailyDecomposition) -> Panel {
    let mut out = d.deviation.clone();
    for (day, mean) in d.daily_mean.iter().enumerate() {
        for v in out.row_mut(day) {
            *v += mean;
        }
    }
    out
}
