//! The forecast pool: every configured spec over every window, plus
//! window-averaged members.

use chrono::NaiveDate;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forecast::{forecast_day_components, ModelConfig};
use super::spec::{base_specs, Family, ForecastSpec, Window, WINDOWS};
use crate::error::{EpfError, Result};
use crate::ingest::{MarketDataset, MAX_LAG_DAYS};
use crate::panel::Panel;
use crate::HOURS;

/// Predicted prices of one pool member over the evaluation period.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMatrix {
    pub spec: ForecastSpec,
    pub values: Panel,
}

impl ForecastMatrix {
    pub fn id(&self) -> String {
        self.spec.id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    /// Base specs; their window field is ignored.
    pub specs: Vec<ForecastSpec>,
    pub windows: Vec<usize>,
    /// Add one window-averaged member per base spec.
    pub averages: bool,
}

impl PoolConfig {
    /// All 24 base specs over the seven standard windows: 192 members.
    pub fn full() -> Self {
        Self {
            specs: base_specs(),
            windows: WINDOWS.to_vec(),
            averages: true,
        }
    }

    /// Restricts [`full`](Self::full) to the given families.
    pub fn families(families: &[Family]) -> Self {
        let mut cfg = Self::full();
        cfg.specs.retain(|s| families.contains(&s.family));
        cfg
    }

    pub fn member_count(&self) -> usize {
        self.specs.len() * (self.windows.len() + usize::from(self.averages))
    }

    /// Member specs in output order: each base's windows, then its average.
    pub fn members(&self) -> Vec<ForecastSpec> {
        let mut out = Vec::with_capacity(self.member_count());
        for base in &self.specs {
            for &w in &self.windows {
                out.push(base.with_window(Window::Days(w)));
            }
            if self.averages {
                out.push(base.base());
            }
        }
        out
    }

    pub fn max_window(&self) -> usize {
        self.windows.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() || self.windows.is_empty() {
            return Err(EpfError::InvalidArgument(
                "pool needs at least one spec and one window".into(),
            ));
        }
        if self.windows.contains(&0) {
            return Err(EpfError::InvalidArgument("windows must be positive".into()));
        }
        let mut seen = self.specs.iter().map(|s| s.base()).collect::<Vec<_>>();
        seen.sort();
        seen.dedup();
        if seen.len() != self.specs.len() {
            return Err(EpfError::InvalidArgument("duplicate base spec in pool".into()));
        }
        Ok(())
    }
}

/// Cell-wise arithmetic mean of members sharing a base spec and day range.
pub fn average_forecasts(members: &[ForecastMatrix]) -> Result<ForecastMatrix> {
    let first = members
        .first()
        .ok_or_else(|| EpfError::InvalidArgument("nothing to average".into()))?;
    let base = first.spec.base();
    for m in members {
        if m.spec.base() != base {
            return Err(EpfError::InvalidArgument(format!(
                "cannot average {} with {}",
                m.id(),
                first.id()
            )));
        }
        if m.values.dates() != first.values.dates() || m.values.hours() != first.values.hours() {
            return Err(EpfError::Shape(format!(
                "{} covers a different day range than {}",
                m.id(),
                first.id()
            )));
        }
    }
    let n = members.len() as f64;
    let mut sums = vec![0.0; first.values.data().len()];
    for m in members {
        for (s, v) in sums.iter_mut().zip(m.values.data()) {
            *s += v;
        }
    }
    let values = Panel::new(
        first.values.dates().to_vec(),
        first.values.hours(),
        sums.into_iter().map(|s| s / n).collect(),
    )?;
    Ok(ForecastMatrix { spec: base, values })
}

/// Day indices of `from ..= to`, checking that the pool's longest window fits.
pub fn eval_indices(ds: &MarketDataset, from: NaiveDate, to: NaiveDate, max_window: usize) -> Result<(usize, usize)> {
    let missing = |d: NaiveDate| EpfError::InvalidArgument(format!("{d} is not in the dataset"));
    let start = ds.index_of(from).ok_or_else(|| missing(from))?;
    let end = ds.index_of(to).ok_or_else(|| missing(to))?;
    if end < start {
        return Err(EpfError::InvalidArgument(format!("empty evaluation range {from}..{to}")));
    }
    if start < max_window + MAX_LAG_DAYS {
        return Err(EpfError::InsufficientHistory(format!(
            "evaluation from {from} needs {} prior days, dataset has {start}",
            max_window + MAX_LAG_DAYS
        )));
    }
    Ok((start, end))
}

/// Forecasts every member for every day in `from ..= to`.
///
/// Individual (member, day) forecasts run in parallel; assembly is in a
/// fixed order, so results do not depend on scheduling.
pub fn run_pool(
    ds: &MarketDataset,
    from: NaiveDate,
    to: NaiveDate,
    pool: &PoolConfig,
    cfg: &ModelConfig,
) -> Result<Vec<ForecastMatrix>> {
    pool.validate()?;
    let (start, end) = eval_indices(ds, from, to, pool.max_window())?;
    let dates = ds.dates()[start..=end].to_vec();
    let individual: Vec<ForecastSpec> = pool
        .specs
        .iter()
        .flat_map(|b| pool.windows.iter().map(move |&w| b.with_window(Window::Days(w))))
        .collect();

    let tasks: Vec<(usize, usize)> = (0..individual.len())
        .flat_map(|m| (0..dates.len()).map(move |d| (m, d)))
        .collect();
    info!(
        "forecasting {} members over {} days ({} tasks)",
        individual.len(),
        dates.len(),
        tasks.len()
    );
    let results: Vec<[f64; HOURS]> = tasks
        .par_iter()
        .map(|&(m, d)| {
            forecast_day_components(&individual[m], ds, dates[d], cfg)
                .map(|f| f.prices)
                .map_err(|e| match e {
                    EpfError::InvalidArgument(msg) => {
                        EpfError::InvalidArgument(format!("{} on {}: {msg}", individual[m].id(), dates[d]))
                    }
                    other => other,
                })
        })
        .collect::<Result<_>>()?;

    let mut matrices = Vec::with_capacity(individual.len());
    for (m, spec) in individual.iter().enumerate() {
        let rows = &results[m * dates.len()..(m + 1) * dates.len()];
        matrices.push(ForecastMatrix {
            spec: *spec,
            values: Panel::from_rows(dates.clone(), rows)?,
        });
    }

    let per_base = pool.windows.len();
    let mut out = Vec::with_capacity(pool.member_count());
    for chunk in matrices.chunks(per_base) {
        out.extend_from_slice(chunk);
        if pool.averages {
            out.push(average_forecasts(chunk)?);
        }
    }
    Ok(out)
}
