//! Forecast quality measures on day × hour panels.
//!
//! Errors are `e[t,h] = actual − forecast`. All functions work for any
//! number of hours per day, which keeps small hand-checked cases possible.

mod spearman;

pub use spearman::{average_ranks, spearman, Spearman};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::panel::Panel;

/// Relative pivot below which the error second-moment matrix counts as singular.
pub const COV_E_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPanel {
    pub errors: Panel,
}

impl ErrorPanel {
    pub fn new(actual: &Panel, forecast: &Panel) -> Result<Self> {
        actual.check_aligned(forecast, "actual vs forecast")?;
        let data = actual.data().iter().zip(forecast.data()).map(|(a, f)| a - f).collect();
        Self::from_panel(Panel::new(actual.dates().to_vec(), actual.hours(), data)?)
    }

    pub fn from_panel(errors: Panel) -> Result<Self> {
        if errors.days() == 0 {
            return Err(EpfError::Shape("error panel has no days".into()));
        }
        if !errors.is_finite() {
            return Err(EpfError::NonFinite("forecast errors"));
        }
        Ok(Self { errors })
    }

    pub fn days(&self) -> usize {
        self.errors.days()
    }
}

pub fn rmse(e: &ErrorPanel) -> f64 {
    let d = e.errors.data();
    (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
}

pub fn mae(e: &ErrorPanel) -> f64 {
    let d = e.errors.data();
    d.iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovE {
    /// `ln det Σ̂`, or −∞ when `degenerate`.
    pub value: f64,
    pub degenerate: bool,
}

/// Log-determinant of `Σ̂ = (1/T) Σ_t e_tᵀ e_t` through a Cholesky factor.
///
/// With `centered`, the daily error vectors are demeaned by their
/// column means first. Σ̂ is treated as singular when a squared Cholesky
/// pivot falls below [`COV_E_PIVOT_TOL`] times its largest diagonal entry.
pub fn cov_e(e: &ErrorPanel, centered: bool) -> CovE {
    let (t, h) = (e.days(), e.errors.hours());
    let mut x = DMatrix::from_row_slice(t, h, e.errors.data());
    if centered {
        for mut col in x.column_iter_mut() {
            let m = col.mean();
            col.add_scalar_mut(-m);
        }
    }
    let sigma = x.tr_mul(&x) / t as f64;
    let scale = sigma.diagonal().max();
    let singular = CovE {
        value: f64::NEG_INFINITY,
        degenerate: true,
    };
    if !(scale > 0.0) {
        return singular;
    }
    let Some(chol) = sigma.cholesky() else {
        return singular;
    };
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..h {
        let pivot = l[(i, i)] * l[(i, i)];
        if !(pivot > COV_E_PIVOT_TOL * scale) {
            return singular;
        }
        logdet += pivot.ln();
    }
    CovE {
        value: logdet,
        degenerate: false,
    }
}

/// Mean over days of the Spearman correlation between actual and forecast
/// hourly prices. Days without rank variance contribute 0; their count is
/// returned alongside.
pub fn corr_f(actual: &Panel, forecast: &Panel) -> Result<(f64, usize)> {
    actual.check_aligned(forecast, "actual vs forecast")?;
    let mut total = 0.0;
    let mut degenerate = 0;
    for d in 0..actual.days() {
        let s = spearman(actual.row(d), forecast.row(d));
        total += s.rho;
        degenerate += usize::from(s.degenerate);
    }
    Ok((total / actual.days() as f64, degenerate))
}

/// 1-based hour of the first minimum.
pub fn argmin_hour(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best + 1
}

/// 1-based hour of the first maximum.
pub fn argmax_hour(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best + 1
}

/// Mean absolute distance between actual and forecast extreme hours.
pub fn mhd(actual: &Panel, forecast: &Panel) -> Result<f64> {
    actual.check_aligned(forecast, "actual vs forecast")?;
    let total: usize = (0..actual.days())
        .map(|d| {
            let (a, f) = (actual.row(d), forecast.row(d));
            argmin_hour(a).abs_diff(argmin_hour(f)) + argmax_hour(a).abs_diff(argmax_hour(f))
        })
        .sum();
    Ok(total as f64 / actual.days() as f64)
}

/// Mean actual-price gap between the true extremes and the actual prices
/// at the forecast's extreme hours.
pub fn mpd(actual: &Panel, forecast: &Panel) -> Result<f64> {
    actual.check_aligned(forecast, "actual vs forecast")?;
    let total: f64 = (0..actual.days())
        .map(|d| {
            let (a, f) = (actual.row(d), forecast.row(d));
            let low = (a[argmin_hour(a) - 1] - a[argmin_hour(f) - 1]).abs();
            let high = (a[argmax_hour(a) - 1] - a[argmax_hour(f) - 1]).abs();
            low + high
        })
        .sum();
    Ok(total / actual.days() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Rmse,
    Mae,
    CovE,
    CorrF,
    Mhd,
    Mpd,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Rmse,
        Metric::Mae,
        Metric::CovE,
        Metric::CorrF,
        Metric::Mhd,
        Metric::Mpd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Mae => "mae",
            Metric::CovE => "cov_e",
            Metric::CorrF => "corr_f",
            Metric::Mhd => "mhd",
            Metric::Mpd => "mpd",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    /// Demean errors before forming the Cov-e matrix.
    pub centered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub rmse: f64,
    pub mae: f64,
    pub cov_e: f64,
    pub corr_f: f64,
    pub mhd: f64,
    pub mpd: f64,
    pub cov_e_degenerate: bool,
    /// Days whose Spearman coefficient was undefined.
    pub degenerate_days: usize,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Rmse => self.rmse,
            Metric::Mae => self.mae,
            Metric::CovE => self.cov_e,
            Metric::CorrF => self.corr_f,
            Metric::Mhd => self.mhd,
            Metric::Mpd => self.mpd,
        }
    }
}

pub fn evaluate(actual: &Panel, forecast: &Panel, opts: MetricOptions) -> Result<MetricReport> {
    let e = ErrorPanel::new(actual, forecast)?;
    let cov = cov_e(&e, opts.centered);
    let (corr, degenerate_days) = corr_f(actual, forecast)?;
    Ok(MetricReport {
        rmse: rmse(&e),
        mae: mae(&e),
        cov_e: cov.value,
        corr_f: corr,
        mhd: mhd(actual, forecast)?,
        mpd: mpd(actual, forecast)?,
        cov_e_degenerate: cov.degenerate,
        degenerate_days,
    })
}
