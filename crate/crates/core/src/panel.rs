//! Day × hour matrices with a date axis.

use chrono::{Days, NaiveDate};

use crate::error::{EpfError, Result};

/// Row-major day × hour matrix. Each row is one calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    hours: usize,
    data: Vec<f64>,
}

impl Panel {
    pub fn new(dates: Vec<NaiveDate>, hours: usize, data: Vec<f64>) -> Result<Self> {
        if hours == 0 {
            return Err(EpfError::Shape("panel needs at least one hour".into()));
        }
        if data.len() != dates.len() * hours {
            return Err(EpfError::Shape(format!(
                "{} values for {} days x {} hours",
                data.len(),
                dates.len(),
                hours
            )));
        }
        Ok(Self { dates, hours, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dates: Vec<NaiveDate>, rows: &[R]) -> Result<Self> {
        if rows.len() != dates.len() {
            return Err(EpfError::Shape(format!(
                "{} rows for {} dates",
                rows.len(),
                dates.len()
            )));
        }
        let hours = rows.first().map_or(crate::HOURS, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * hours);
        for row in rows {
            let row = row.as_ref();
            if row.len() != hours {
                return Err(EpfError::Shape("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Self::new(dates, hours, data)
    }

    /// Rows dated on consecutive days starting 2000-01-01; for harnesses
    /// where the calendar is irrelevant.
    pub fn from_rows_undated<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_rows(consecutive_dates(default_epoch(), rows.len()), rows)
    }

    pub fn filled(dates: Vec<NaiveDate>, hours: usize, value: f64) -> Self {
        let data = vec![value; dates.len() * hours];
        Self { dates, hours, data }
    }

    pub fn days(&self) -> usize {
        self.dates.len()
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, day: usize) -> &[f64] {
        &self.data[day * self.hours..(day + 1) * self.hours]
    }

    pub fn row_mut(&mut self, day: usize) -> &mut [f64] {
        &mut self.data[day * self.hours..(day + 1) * self.hours]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.hours)
    }

    /// Value at `day` and zero-based `hour`.
    pub fn get(&self, day: usize, hour: usize) -> f64 {
        self.data[day * self.hours + hour]
    }

    pub fn set(&mut self, day: usize, hour: usize, value: f64) {
        self.data[day * self.hours + hour] = value;
    }

    /// Contiguous block of days `[start, end)`.
    pub fn slice_days(&self, start: usize, end: usize) -> Panel {
        Panel {
            dates: self.dates[start..end].to_vec(),
            hours: self.hours,
            data: self.data[start * self.hours..end * self.hours].to_vec(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Panel {
        Panel {
            dates: self.dates.clone(),
            hours: self.hours,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn row_mean(&self, day: usize) -> f64 {
        let row = self.row(day);
        row.iter().sum::<f64>() / row.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Position of `date` on the day axis.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn same_shape(&self, other: &Panel) -> bool {
        self.hours == other.hours && self.dates == other.dates
    }

    /// Errors unless both panels cover the same dates with the same width.
    pub fn check_aligned(&self, other: &Panel, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(EpfError::Shape(format!(
                "{what}: panels cover different day ranges or hour counts ({}x{} vs {}x{})",
                self.days(),
                self.hours,
                other.days(),
                other.hours
            )))
        }
    }
}

pub(crate) fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date")
}

pub fn consecutive_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n as u64)
        .map(|i| start.checked_add_days(Days::new(i)).expect("date in range"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_slices() {
        let p = Panel::from_rows_undated(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(p.days(), 3);
        assert_eq!(p.row(1), &[3.0, 4.0]);
        assert_eq!(p.row_mean(2), 5.5);
        let s = p.slice_days(1, 3);
        assert_eq!(s.data(), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.dates()[0], p.dates()[1]);
        assert_eq!(p.index_of(p.dates()[2]), Some(2));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(Panel::from_rows_undated(&rows).is_err());
    }
}
