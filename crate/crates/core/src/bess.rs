//! Daily battery arbitrage: one charge block followed by one discharge block.
//!
//! With both blocks run at full power `Pow` for `B` hours, the day's profit is
//!
//! ```text
//! π = η_dis · Σ Pow·P[h_dis+i] − (1/η_ch) · Σ Pow·P[h_ch+i] − 2·C·E,   i = 0..B-1
//! ```
//!
//! The battery starts every day empty and always cycles once, even when the
//! best available margin is negative.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};
use crate::panel::Panel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BessSpec {
    pub name: String,
    /// Energy capacity, MWh.
    pub energy: f64,
    /// Power rating, MW.
    pub power: f64,
    /// Charge/discharge block length, hours.
    pub block: usize,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Operating cost per MWh charged or discharged.
    pub cost: f64,
}

impl BessSpec {
    /// 3 MWh, 3 MW: one-hour blocks.
    pub fn bess_a() -> Self {
        Self {
            name: "BESS-a".into(),
            energy: 3.0,
            power: 3.0,
            block: 1,
            eta_ch: 0.98,
            eta_dis: 0.97,
            cost: 11.63,
        }
    }

    /// 3 MWh, 1 MW: three-hour blocks.
    pub fn bess_b() -> Self {
        Self {
            name: "BESS-b".into(),
            power: 1.0,
            block: 3,
            ..Self::bess_a()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EpfError::InvalidBess(format!("{}: {msg}", self.name)));
        if !(1..=12).contains(&self.block) {
            return bad(format!("block length {} outside 1..=12", self.block));
        }
        for (label, eta) in [("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("{label} = {eta} outside (0, 1]"));
            }
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power {} must be positive", self.power));
        }
        if !self.cost.is_finite() {
            return bad("cost must be finite".into());
        }
        let full = self.power * self.block as f64;
        if (full - self.energy).abs() > 1e-9 * self.energy.abs().max(1.0) {
            return bad(format!(
                "energy {} must equal power × block = {full}",
                self.energy
            ));
        }
        Ok(())
    }
}

/// First hours (1-based) of the charge and discharge blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySchedule {
    pub h_ch: usize,
    pub h_dis: usize,
}

impl DaySchedule {
    pub fn is_feasible(&self, block: usize, hours: usize) -> bool {
        self.h_ch >= 1 && self.h_ch + block <= self.h_dis && self.h_dis + block - 1 <= hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitRecord {
    pub date: NaiveDate,
    pub schedule: DaySchedule,
    /// EUR over the day.
    pub profit_abs: f64,
    /// EUR per MWh of capacity.
    pub profit_per_mwh: f64,
}

fn block_sum(prices: &[f64], first: usize, spec: &BessSpec) -> f64 {
    prices[first - 1..first - 1 + spec.block]
        .iter()
        .map(|p| spec.power * p)
        .sum()
}

/// The profit equation; shared by evaluation and selection so ties agree bit for bit.
fn objective(prices: &[f64], sch: DaySchedule, spec: &BessSpec) -> f64 {
    let discharged = block_sum(prices, sch.h_dis, spec);
    let charged = block_sum(prices, sch.h_ch, spec);
    spec.eta_dis * discharged - charged / spec.eta_ch - 2.0 * spec.cost * spec.energy
}

fn check_prices(prices: &[f64], spec: &BessSpec) -> Result<()> {
    if prices.len() < 2 * spec.block {
        return Err(EpfError::InfeasibleSchedule(format!(
            "{} hours cannot hold two blocks of {}",
            prices.len(),
            spec.block
        )));
    }
    if prices.iter().any(|p| !p.is_finite()) {
        return Err(EpfError::NonFinite("battery prices"));
    }
    Ok(())
}

/// Realized profit of running `sch` against `prices`.
pub fn compute_profit(
    date: NaiveDate,
    sch: DaySchedule,
    prices: &[f64],
    spec: &BessSpec,
) -> Result<ProfitRecord> {
    spec.validate()?;
    check_prices(prices, spec)?;
    if !sch.is_feasible(spec.block, prices.len()) {
        return Err(EpfError::InfeasibleSchedule(format!(
            "charge at {} and discharge at {} with block {}",
            sch.h_ch, sch.h_dis, spec.block
        )));
    }
    let profit_abs = objective(prices, sch, spec);
    Ok(ProfitRecord {
        date,
        schedule: sch,
        profit_abs,
        profit_per_mwh: profit_abs / spec.energy,
    })
}

/// Profit-maximizing schedule on `prices` by exhaustive search. Ties go
/// to the smallest `h_ch`, then the smallest `h_dis`.
pub fn select_schedule(prices: &[f64], spec: &BessSpec) -> Result<DaySchedule> {
    spec.validate()?;
    check_prices(prices, spec)?;
    let hours = prices.len();
    let b = spec.block;
    let mut best = DaySchedule { h_ch: 1, h_dis: 1 + b };
    let mut best_value = objective(prices, best, spec);
    for h_ch in 1..=hours + 1 - 2 * b {
        for h_dis in h_ch + b..=hours + 1 - b {
            let sch = DaySchedule { h_ch, h_dis };
            let value = objective(prices, sch, spec);
            if value > best_value {
                best = sch;
                best_value = value;
            }
        }
    }
    Ok(best)
}

/// Schedules chosen on `forecast`, settled at `actual` prices.
pub fn backtest(forecast: &Panel, actual: &Panel, spec: &BessSpec) -> Result<Vec<ProfitRecord>> {
    forecast.check_aligned(actual, "forecast vs actual prices")?;
    (0..actual.days())
        .map(|d| {
            let sch = select_schedule(forecast.row(d), spec)?;
            compute_profit(actual.dates()[d], sch, actual.row(d), spec)
        })
        .collect()
}

/// Perfect-foresight profits: schedules chosen on the actual prices.
pub fn oracle_profit(actual: &Panel, spec: &BessSpec) -> Result<Vec<ProfitRecord>> {
    backtest(actual, actual, spec)
}
