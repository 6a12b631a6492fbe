use chrono::NaiveDate;

use crate::error::{EpfError, Result};
use crate::HOURS;

/// One observation tagged with its local wall-clock hour (0..=23).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyEntry {
    pub hour: u32,
    pub value: f64,
}

impl HourlyEntry {
    pub fn new(hour: u32, value: f64) -> Self {
        Self { hour, value }
    }
}

/// Repairs one local day to exactly 24 values.
///
/// A missing hour (spring forward) becomes the mean of its neighbours; a
/// duplicated hour (fall back) is replaced by the mean of the pair. More
/// than one anomaly in a day is an error. Days that already have one value
/// per hour pass through unchanged.
pub fn fix_dst(date: NaiveDate, entries: &[HourlyEntry]) -> Result<[f64; HOURS]> {
    let fail = |reason: String| EpfError::Dst { date, reason };

    let mut sums = [0.0; HOURS];
    let mut counts = [0usize; HOURS];
    for e in entries {
        let h = e.hour as usize;
        if h >= HOURS {
            return Err(fail(format!("hour {} out of range", e.hour)));
        }
        sums[h] += e.value;
        counts[h] += 1;
    }

    let missing: Vec<usize> = (0..HOURS).filter(|&h| counts[h] == 0).collect();
    let duplicated: Vec<usize> = (0..HOURS).filter(|&h| counts[h] > 1).collect();
    if let Some(&h) = duplicated.iter().find(|&&h| counts[h] > 2) {
        return Err(fail(format!("hour {h} appears {} times", counts[h])));
    }
    if missing.len() + duplicated.len() > 1 {
        return Err(fail(format!(
            "{} missing and {} duplicated hours; at most one DST anomaly per day",
            missing.len(),
            duplicated.len()
        )));
    }

    let mut out = [0.0; HOURS];
    for h in 0..HOURS {
        if counts[h] > 0 {
            out[h] = sums[h] / counts[h] as f64;
        }
    }
    if let Some(&h) = missing.first() {
        if h == 0 || h == HOURS - 1 {
            return Err(fail(format!("missing hour {h} has no neighbour on both sides")));
        }
        out[h] = 0.5 * (out[h - 1] + out[h + 1]);
    }
    Ok(out)
}

/// Applies [`fix_dst`] to a sequence of days.
pub fn fix_dst_days(days: &[(NaiveDate, Vec<HourlyEntry>)]) -> Result<Vec<[f64; HOURS]>> {
    days.iter().map(|(date, e)| fix_dst(*date, e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, 31).unwrap()
    }

    fn clean_day() -> Vec<HourlyEntry> {
        (0..24).map(|h| HourlyEntry::new(h, h as f64 * 1.5)).collect()
    }

    #[test]
    fn spring_gap_imputed_from_neighbours() {
        let mut entries = clean_day();
        entries[1].value = 10.0;
        entries[3].value = 20.0;
        entries.remove(2);
        let day = fix_dst(date(), &entries).unwrap();
        assert_eq!(day[2], 15.0);
        assert_eq!(day[1], 10.0);
        assert_eq!(day[3], 20.0);
    }

    #[test]
    fn autumn_duplicate_averaged() {
        let mut entries = clean_day();
        entries[2].value = 10.0;
        entries.insert(3, HourlyEntry::new(2, 30.0));
        assert_eq!(entries.len(), 25);
        let day = fix_dst(date(), &entries).unwrap();
        assert_eq!(day[2], 20.0);
        assert_eq!(day[3], 4.5);
    }

    #[test]
    fn clean_day_unchanged() {
        let entries = clean_day();
        let day = fix_dst(date(), &entries).unwrap();
        let expected: Vec<f64> = entries.iter().map(|e| e.value).collect();
        assert_eq!(day.to_vec(), expected);
    }

    #[test]
    fn two_anomalies_rejected() {
        let mut entries = clean_day();
        entries.remove(5);
        entries.remove(10);
        assert!(fix_dst(date(), &entries).is_err());

        let mut entries = clean_day();
        entries.remove(5);
        entries.push(HourlyEntry::new(8, 1.0));
        assert!(fix_dst(date(), &entries).is_err());
    }

    #[test]
    fn triple_hour_rejected() {
        let mut entries = clean_day();
        entries.push(HourlyEntry::new(2, 1.0));
        entries.push(HourlyEntry::new(2, 1.0));
        assert!(fix_dst(date(), &entries).is_err());
    }

    proptest! {
        #[test]
        fn repair_is_idempotent(
            values in prop::collection::vec(-500.0f64..500.0, 24),
            anomaly in 1usize..23,
            kind in 0u8..3,
        ) {
            let mut entries: Vec<HourlyEntry> =
                values.iter().enumerate().map(|(h, &v)| HourlyEntry::new(h as u32, v)).collect();
            match kind {
                0 => { entries.remove(anomaly); }
                1 => entries.push(HourlyEntry::new(anomaly as u32, values[anomaly] + 3.0)),
                _ => {}
            }
            let once = fix_dst(date(), &entries).unwrap();
            let again: Vec<HourlyEntry> =
                once.iter().enumerate().map(|(h, &v)| HourlyEntry::new(h as u32, v)).collect();
            prop_assert_eq!(fix_dst(date(), &again).unwrap(), once);
        }
    }
}
