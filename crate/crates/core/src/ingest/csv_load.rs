use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDate, TimeDelta, Timelike};

use super::dst::{fix_dst, HourlyEntry};
use super::MarketDataset;
use crate::error::{EpfError, Result};
use crate::panel::Panel;
use crate::HOURS;

/// Column names for the hourly and daily input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub timestamp: String,
    pub price: String,
    pub load_fc: String,
    pub res_fc: String,
    pub date: String,
    /// gas, oil, coal, eua
    pub commodities: [String; 4],
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            price: "price".into(),
            load_fc: "load_fc".into(),
            res_fc: "res_fc".into(),
            date: "date".into(),
            commodities: ["gas".into(), "oil".into(), "coal".into(), "eua".into()],
        }
    }
}

struct HourlyRow {
    at: DateTime<FixedOffset>,
    raw: String,
    values: [f64; 3],
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| EpfError::MissingColumn(name.to_string()))
}

fn parse_value(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EpfError::MalformedValue {
            value: raw.to_string(),
            column: name.to_string(),
            line,
        })
}

fn parse_timestamp(raw: &str, line: u64) -> Result<DateTime<FixedOffset>> {
    DateTime::parse_from_rfc3339(raw).map_err(|_| EpfError::MalformedTimestamp {
        value: raw.to_string(),
        line,
    })
}

fn read_hourly(path: &Path, schema: &CsvSchema) -> Result<Vec<HourlyRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let ts = column(&headers, &schema.timestamp)?;
    let cols = [
        (column(&headers, &schema.price)?, schema.price.as_str()),
        (column(&headers, &schema.load_fc)?, schema.load_fc.as_str()),
        (column(&headers, &schema.res_fc)?, schema.res_fc.as_str()),
    ];

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(ts).unwrap_or("").to_string();
        let at = parse_timestamp(&raw, line)?;
        let mut values = [0.0; 3];
        for (slot, (idx, name)) in values.iter_mut().zip(cols) {
            *slot = parse_value(&record, idx, name, line)?;
        }
        rows.push(HourlyRow { at, raw, values });
    }
    Ok(rows)
}

fn read_daily(path: &Path, schema: &CsvSchema) -> Result<BTreeMap<NaiveDate, [f64; 4]>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let date_col = column(&headers, &schema.date)?;
    let mut cols = [0usize; 4];
    for (slot, name) in cols.iter_mut().zip(&schema.commodities) {
        *slot = column(&headers, name)?;
    }

    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| {
            EpfError::MalformedTimestamp {
                value: raw.to_string(),
                line,
            }
        })?;
        let mut values = [0.0; 4];
        for (i, slot) in values.iter_mut().enumerate() {
            *slot = parse_value(&record, cols[i], &schema.commodities[i], line)?;
        }
        out.insert(date, values);
    }
    Ok(out)
}

/// Loads an hourly market file and a daily commodity file into an aligned
/// dataset.
///
/// Hourly timestamps are ISO-8601 with a UTC offset and mark the start of
/// the delivery hour; rows are grouped by their local calendar day. DST
/// anomalies are repaired with [`fix_dst`], partial leading and trailing
/// days are dropped, and commodities are forward-filled to every day.
pub fn load_csv(hourly: &Path, daily: &Path, schema: &CsvSchema) -> Result<MarketDataset> {
    let mut rows = read_hourly(hourly, schema)?;
    if rows.is_empty() {
        return Err(EpfError::InvalidDataset("hourly file has no rows".into()));
    }
    rows.sort_by_key(|r| r.at);

    for pair in rows.windows(2) {
        let step = pair[1].at - pair[0].at;
        if step == TimeDelta::zero() {
            return Err(EpfError::DuplicateHour(pair[1].raw.clone()));
        }
        if step > TimeDelta::hours(1) {
            return Err(EpfError::Gap(pair[1].raw.clone()));
        }
        if step < TimeDelta::hours(1) {
            return Err(EpfError::MalformedTimestamp {
                value: pair[1].raw.clone(),
                line: 0,
            });
        }
    }

    // Group consecutive rows by local date.
    let mut days: Vec<(NaiveDate, Vec<&HourlyRow>)> = Vec::new();
    for row in &rows {
        let date = row.at.date_naive();
        match days.last_mut() {
            Some((d, group)) if *d == date => group.push(row),
            _ => days.push((date, vec![row])),
        }
    }
    if days.first().is_some_and(|(_, g)| g[0].at.hour() != 0) {
        days.remove(0);
    }
    if days
        .last()
        .is_some_and(|(_, g)| g[g.len() - 1].at.hour() != HOURS as u32 - 1)
    {
        days.pop();
    }
    if days.is_empty() {
        return Err(EpfError::InvalidDataset("no complete day in hourly file".into()));
    }

    let dates: Vec<NaiveDate> = days.iter().map(|(d, _)| *d).collect();
    let mut columns: [Vec<f64>; 3] = Default::default();
    for (date, group) in &days {
        for (c, out) in columns.iter_mut().enumerate() {
            let entries: Vec<HourlyEntry> = group
                .iter()
                .map(|r| HourlyEntry::new(r.at.hour(), r.values[c]))
                .collect();
            out.extend_from_slice(&fix_dst(*date, &entries)?);
        }
    }
    let [price, load, res] = columns;

    let daily_rows = read_daily(daily, schema)?;
    let mut commodities = Vec::with_capacity(dates.len());
    for date in &dates {
        let last = daily_rows.range(..=*date).next_back().ok_or_else(|| {
            EpfError::InvalidDataset(format!("no commodity prices on or before {date}"))
        })?;
        commodities.push(*last.1);
    }

    MarketDataset::new(
        Panel::new(dates.clone(), HOURS, price)?,
        Panel::new(dates.clone(), HOURS, load)?,
        Panel::new(dates, HOURS, res)?,
        commodities,
    )
}
