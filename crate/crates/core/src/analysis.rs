//! Relating forecast quality to realized battery profit across a pool.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bess::ProfitRecord;
use crate::error::{EpfError, Result};
use crate::metrics::{evaluate, spearman, Metric, MetricOptions, MetricReport, Spearman};
use crate::models::{Family, ForecastMatrix};
use crate::panel::Panel;

/// Metric values and mean daily profit of one pool member.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolOutcome {
    pub member_id: String,
    pub family: Family,
    pub metrics: MetricReport,
    /// Mean profit per MWh over the period.
    pub mean_profit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subset {
    All,
    Family(Family),
}

impl Subset {
    pub const ALL: [Subset; 4] = [
        Subset::Family(Family::Arx),
        Subset::Family(Family::Narx),
        Subset::Family(Family::Lear),
        Subset::All,
    ];

    pub fn contains(self, family: Family) -> bool {
        match self {
            Subset::All => true,
            Subset::Family(f) => f == family,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::All => f.write_str("All"),
            Subset::Family(fam) => write!(f, "{fam}"),
        }
    }
}

/// Spearman coefficient of each metric against mean profit, in [`Metric::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub subset: Subset,
    pub members: usize,
    pub coefficients: [Spearman; 6],
}

impl CorrelationRow {
    pub fn get(&self, m: Metric) -> Spearman {
        let i = Metric::ALL.iter().position(|x| *x == m).expect("known metric");
        self.coefficients[i]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Metrics and mean profit for every member over the days `start..end`.
pub fn outcomes(
    actual: &Panel,
    forecasts: &[ForecastMatrix],
    daily_profits: &[Vec<f64>],
    start: usize,
    end: usize,
    opts: MetricOptions,
) -> Result<Vec<PoolOutcome>> {
    if forecasts.len() != daily_profits.len() {
        return Err(EpfError::Shape(format!(
            "{} forecasts but {} profit series",
            forecasts.len(),
            daily_profits.len()
        )));
    }
    if start >= end || end > actual.days() {
        return Err(EpfError::InvalidArgument(format!(
            "day range {start}..{end} invalid for {} days",
            actual.days()
        )));
    }
    let actual_w = actual.slice_days(start, end);
    forecasts
        .iter()
        .zip(daily_profits)
        .map(|(f, p)| {
            if p.len() != actual.days() {
                return Err(EpfError::Shape(format!(
                    "{}: {} daily profits for {} days",
                    f.id(),
                    p.len(),
                    actual.days()
                )));
            }
            Ok(PoolOutcome {
                member_id: f.id(),
                family: f.spec.family,
                metrics: evaluate(&actual_w, &f.values.slice_days(start, end), opts)?,
                mean_profit: mean(&p[start..end]),
            })
        })
        .collect()
}

/// Spearman correlation between each metric and mean profit across the
/// members in `subset`.
pub fn pool_correlation(outcomes: &[PoolOutcome], subset: Subset) -> Result<CorrelationRow> {
    let members: Vec<&PoolOutcome> = outcomes.iter().filter(|o| subset.contains(o.family)).collect();
    if members.len() < 3 {
        return Err(EpfError::InvalidArgument(format!(
            "subset {subset} has {} members, at least 3 needed",
            members.len()
        )));
    }
    let profit: Vec<f64> = members.iter().map(|o| o.mean_profit).collect();
    let coefficients = Metric::ALL.map(|m| {
        let values: Vec<f64> = members.iter().map(|o| o.metrics.get(m)).collect();
        spearman(&values, &profit)
    });
    Ok(CorrelationRow {
        subset,
        members: members.len(),
        coefficients,
    })
}

/// Rolling-window correlation coefficients for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub subset: Subset,
    pub window: usize,
    pub stride: usize,
    pub starts: Vec<NaiveDate>,
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationSeries {
    /// Mean coefficient of `m` over all window positions.
    pub fn mean(&self, m: Metric) -> f64 {
        self.rows.iter().map(|r| r.get(m).rho).sum::<f64>() / self.rows.len() as f64
    }
}

/// Correlations recomputed on every window of `window` days, advancing by
/// `stride`. Metrics are evaluated afresh on each window's sub-panel.
pub fn rolling_correlation(
    actual: &Panel,
    forecasts: &[ForecastMatrix],
    daily_profits: &[Vec<f64>],
    window: usize,
    stride: usize,
    opts: MetricOptions,
    subsets: &[Subset],
) -> Result<Vec<CorrelationSeries>> {
    let days = actual.days();
    if window == 0 || window > days {
        return Err(EpfError::InvalidArgument(format!(
            "rolling window {window} does not fit {days} evaluation days"
        )));
    }
    if stride == 0 {
        return Err(EpfError::InvalidArgument("rolling stride must be positive".into()));
    }
    let positions: Vec<usize> = (0..=days - window).step_by(stride).collect();
    let per_position: Vec<Vec<CorrelationRow>> = positions
        .par_iter()
        .map(|&s| {
            let out = outcomes(actual, forecasts, daily_profits, s, s + window, opts)?;
            subsets.iter().map(|&sub| pool_correlation(&out, sub)).collect()
        })
        .collect::<Result<_>>()?;

    Ok(subsets
        .iter()
        .enumerate()
        .map(|(i, &subset)| CorrelationSeries {
            subset,
            window,
            stride,
            starts: positions.iter().map(|&s| actual.dates()[s]).collect(),
            rows: per_position.iter().map(|rows| rows[i].clone()).collect(),
        })
        .collect())
}

/// Profit summary for one calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearStats {
    pub year: i32,
    pub days: usize,
    pub oracle_mean: f64,
    /// Extremes, mean and population standard deviation of the members'
    /// mean daily profit per MWh.
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub std: f64,
}

pub fn yearly_stats(oracle: &[ProfitRecord], pool: &[Vec<ProfitRecord>]) -> Result<Vec<YearStats>> {
    if oracle.is_empty() || pool.is_empty() {
        return Err(EpfError::InvalidArgument("yearly statistics need profits".into()));
    }
    for member in pool {
        let aligned = member.len() == oracle.len()
            && member.iter().zip(oracle).all(|(a, b)| a.date == b.date);
        if !aligned {
            return Err(EpfError::Shape("member profits not aligned with oracle dates".into()));
        }
    }
    let mut years: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, r) in oracle.iter().enumerate() {
        years.entry(r.date.year()).or_default().push(i);
    }
    Ok(years
        .into_iter()
        .map(|(year, idx)| {
            let avg = |recs: &[ProfitRecord]| {
                idx.iter().map(|&i| recs[i].profit_per_mwh).sum::<f64>() / idx.len() as f64
            };
            let member_means: Vec<f64> = pool.iter().map(|m| avg(m)).collect();
            let m = mean(&member_means);
            let var = member_means.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                / member_means.len() as f64;
            YearStats {
                year,
                days: idx.len(),
                oracle_mean: avg(oracle),
                max: member_means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min: member_means.iter().copied().fold(f64::INFINITY, f64::min),
                mean: m,
                std: var.sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bess::DaySchedule;
    use crate::models::{DepVar, Estimator, ForecastSpec, Window};

    fn outcome(family: Family, metric: f64, profit: f64) -> PoolOutcome {
        PoolOutcome {
            member_id: format!("{family}-{metric}"),
            family,
            metrics: MetricReport {
                rmse: metric,
                mae: metric,
                cov_e: metric,
                corr_f: 0.5,
                mhd: metric,
                mpd: metric,
                cov_e_degenerate: false,
                degenerate_days: 0,
            },
            mean_profit: profit,
        }
    }

    #[test]
    fn anti_concordant_and_constant_metrics() {
        let outs: Vec<_> = (0..6).map(|i| outcome(Family::Arx, i as f64, -(i as f64).powi(3))).collect();
        let row = pool_correlation(&outs, Subset::All).unwrap();
        assert_eq!(row.get(Metric::Rmse).rho, -1.0);
        assert!(row.get(Metric::CorrF).degenerate);
        assert_eq!(row.get(Metric::CorrF).rho, 0.0);
    }

    #[test]
    fn subsets_filter_members() {
        let mut outs: Vec<_> = (0..3).map(|i| outcome(Family::Lear, i as f64, i as f64)).collect();
        outs.push(outcome(Family::Arx, 9.0, 0.0));
        assert_eq!(pool_correlation(&outs, Subset::Family(Family::Lear)).unwrap().members, 3);
        assert!(pool_correlation(&outs, Subset::Family(Family::Arx)).is_err());
    }

    fn rec(date: NaiveDate, p: f64) -> ProfitRecord {
        ProfitRecord {
            date,
            schedule: DaySchedule { h_ch: 1, h_dis: 2 },
            profit_abs: 3.0 * p,
            profit_per_mwh: p,
        }
    }

    #[test]
    fn two_member_two_day_stats() {
        let d1 = NaiveDate::from_ymd_opt(2021, 5, 1).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2021, 5, 2).unwrap();
        let oracle = vec![rec(d1, 10.0), rec(d2, 12.0)];
        let pool = vec![vec![rec(d1, 2.0), rec(d2, 4.0)], vec![rec(d1, 6.0), rec(d2, 8.0)]];
        let stats = yearly_stats(&oracle, &pool).unwrap();
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert_eq!((s.year, s.days), (2021, 2));
        assert_eq!(s.oracle_mean, 11.0);
        assert_eq!((s.max, s.min, s.mean, s.std), (7.0, 3.0, 5.0, 2.0));
    }

    #[test]
    fn rolling_length_follows_stride() {
        let dates = crate::panel::consecutive_dates(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), 10);
        let rows: Vec<Vec<f64>> = (0..10).map(|d| (0..24).map(|h| (d * h % 7) as f64 + h as f64).collect()).collect();
        let actual = Panel::from_rows(dates.clone(), &rows).unwrap();
        let forecasts: Vec<_> = (0..4)
            .map(|k| ForecastMatrix {
                spec: ForecastSpec::new(Family::Arx, DepVar::Direct, false, Estimator::Pooled, Window::Days(56 + k)),
                values: actual.map(|v| v + k as f64 * v.sin()),
            })
            .collect();
        let profits: Vec<Vec<f64>> = (0..4).map(|k| (0..10).map(|d| (k * d) as f64).collect()).collect();
        let series = rolling_correlation(&actual, &forecasts, &profits, 4, 3, MetricOptions::default(), &[Subset::All])
            .unwrap();
        assert_eq!(series[0].starts, vec![dates[0], dates[3], dates[6]]);
        assert!(rolling_correlation(&actual, &forecasts, &profits, 11, 1, MetricOptions::default(), &[Subset::All])
            .is_err());
    }
}
