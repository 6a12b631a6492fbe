//! Market data: the aligned dataset, CSV loading with DST repair,
//! per-day regressor frames and a synthetic market generator.

mod csv_load;
mod dst;
mod frames;
mod synth;

pub use csv_load::{load_csv, CsvSchema};
pub use dst::{fix_dst, fix_dst_days, HourlyEntry};
pub use frames::{
    build_frames, build_mean_frames, frame_for, mean_frame_for, regressor_count, FrameOptions,
    FrameSource, FrameTarget, RegressorFrame, MAX_LAG_DAYS,
};
pub use synth::{duck_base_curve, synth_market, synth_market_with, PriceProfile, SynthParams};

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{EpfError, Result};
use crate::panel::Panel;
use crate::HOURS;

/// Daily commodity closes, in column order.
pub const COMMODITIES: [&str; 4] = ["gas", "oil", "coal", "eua"];

/// Aligned day × hour market panels plus daily commodity prices.
///
/// Prices are EUR/MWh, load and RES forecasts MW. Commodities are the daily
/// close of gas, oil, coal and EUA, forward-filled over closures.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    pub prices: Panel,
    pub load_fc: Panel,
    pub res_fc: Panel,
    pub commodities: Vec<[f64; 4]>,
}

impl MarketDataset {
    pub fn new(
        prices: Panel,
        load_fc: Panel,
        res_fc: Panel,
        commodities: Vec<[f64; 4]>,
    ) -> Result<Self> {
        let ds = Self {
            prices,
            load_fc,
            res_fc,
            commodities,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.prices.hours() != HOURS {
            return Err(EpfError::InvalidDataset(format!(
                "expected {HOURS} hours per day, got {}",
                self.prices.hours()
            )));
        }
        if !self.prices.same_shape(&self.load_fc) || !self.prices.same_shape(&self.res_fc) {
            return Err(EpfError::InvalidDataset(
                "price, load and RES panels are not aligned".into(),
            ));
        }
        if self.commodities.len() != self.prices.days() {
            return Err(EpfError::InvalidDataset(format!(
                "{} commodity rows for {} days",
                self.commodities.len(),
                self.prices.days()
            )));
        }
        for pair in self.dates().windows(2) {
            if pair[0].succ_opt() != Some(pair[1]) {
                return Err(EpfError::InvalidDataset(format!(
                    "dates are not consecutive: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        let finite = self.prices.is_finite()
            && self.load_fc.is_finite()
            && self.res_fc.is_finite()
            && self.commodities.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(EpfError::NonFinite("market dataset"));
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.prices.days()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        self.prices.dates()
    }

    pub fn weekday(&self, day: usize) -> Weekday {
        self.dates()[day].weekday()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.prices.index_of(date)
    }

    /// Days `[start, end)` as a standalone dataset.
    pub fn slice_days(&self, start: usize, end: usize) -> MarketDataset {
        MarketDataset {
            prices: self.prices.slice_days(start, end),
            load_fc: self.load_fc.slice_days(start, end),
            res_fc: self.res_fc.slice_days(start, end),
            commodities: self.commodities[start..end].to_vec(),
        }
    }
}
