//! Seeded synthetic day-ahead markets.
//!
//! Prices follow a parametric daily shape scaled by a seasonal level, plus
//! load/RES pass-through terms and an hour-wise AR(1) disturbance:
//!
//! ```text
//! P(t,h) = level(t) + amp(t) * 40 * shape(h)
//!        + 0.0008 * (L(t,h) - 55000) - 0.0012 * (RES(t,h) - 15000) + u(t,h)
//! level(t) = 60 + 15 sin(2πt/365) + 0.8 (gas(t) - 30) - 8 [weekend]
//! amp(t)   = 1 + 0.3 sin(2πt/365 + 1)
//! u(t,h)   = 0.6 u(t-1,h) + N(0, 4²)
//! ```
//!
//! The duck shape is a morning bump at 08:00 (height 0.6), an evening peak
//! at 19:30 (height 1.0) and a midday trough at 13:30 (depth 0.9), each a
//! Gaussian bump. `Flat` collapses every day to a single level; `Spiky` adds
//! sparse upward (3% of hours) and downward (1%) exponential spikes.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::MarketDataset;
use crate::panel::{consecutive_dates, Panel};
use crate::HOURS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceProfile {
    Duck,
    Flat,
    Spiky,
}

impl std::str::FromStr for PriceProfile {
    type Err = crate::EpfError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "duck" => Ok(Self::Duck),
            "flat" => Ok(Self::Flat),
            "spiky" => Ok(Self::Spiky),
            _ => Err(crate::EpfError::InvalidArgument(format!("unknown profile `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub days: usize,
    pub profile: PriceProfile,
    pub start: NaiveDate,
}

impl SynthParams {
    pub fn new(seed: u64, days: usize, profile: PriceProfile) -> Self {
        Self {
            seed,
            days,
            profile,
            start: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
        }
    }
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    let z = (h - centre) / width;
    (-0.5 * z * z).exp()
}

/// Noise-free duck shape for hours 1..=24 (hour `h` starts at `h-1`:00).
pub fn duck_base_curve() -> [f64; HOURS] {
    let mut out = [0.0; HOURS];
    for (i, v) in out.iter_mut().enumerate() {
        let clock = i as f64; // start of the delivery hour
        *v = 0.6 * bump(clock, 8.0, 1.8) + bump(clock, 19.5, 1.8) - 0.9 * bump(clock, 13.5, 2.5);
    }
    out
}

fn load_shape(clock: f64) -> f64 {
    // daytime plateau peaking early afternoon
    -(2.0 * std::f64::consts::PI * (clock - 1.0) / 24.0).cos()
}

fn solar_shape(clock: f64) -> f64 {
    if (6.0..=19.0).contains(&clock) {
        (std::f64::consts::PI * (clock - 6.0) / 13.0).sin()
    } else {
        0.0
    }
}

pub fn synth_market(seed: u64, days: usize, profile: PriceProfile) -> MarketDataset {
    synth_market_with(&SynthParams::new(seed, days, profile))
}

/// Generates a deterministic synthetic market. `days` should be at least 15
/// so that lagged regressors exist for a week of targets.
pub fn synth_market_with(params: &SynthParams) -> MarketDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.days;
    let dates = consecutive_dates(params.start, n);
    let two_pi = 2.0 * std::f64::consts::PI;
    let shape = duck_base_curve();

    let unit: Normal<f64> = Normal::new(0.0, 1.0).expect("valid normal");
    let mut commodities = Vec::with_capacity(n);
    let mut level_c = [30.0, 80.0, 100.0, 70.0];
    let vols: [f64; 4] = [0.02, 0.015, 0.015, 0.02];

    let mut load = Vec::with_capacity(n * HOURS);
    let mut res = Vec::with_capacity(n * HOURS);
    let mut prices = Vec::with_capacity(n * HOURS);
    let mut wind: f64 = 15_000.0;
    let mut disturbance = [0.0; HOURS];

    let spike_up = Exp::new(1.0 / 80.0).expect("valid rate");
    let spike_down = Exp::new(1.0 / 30.0).expect("valid rate");

    for (t, date) in dates.iter().enumerate() {
        if t > 0 {
            for (c, vol) in level_c.iter_mut().zip(vols) {
                *c *= (vol * unit.sample(&mut rng)).exp();
            }
        }
        commodities.push(level_c);

        let weekday = chrono::Datelike::weekday(date);
        let weekend = matches!(weekday, chrono::Weekday::Sat | chrono::Weekday::Sun);
        let season = (two_pi * t as f64 / 365.0).sin();
        let level = 60.0 + 15.0 * season + 0.8 * (level_c[0] - 30.0) - if weekend { 8.0 } else { 0.0 };
        let amp = 1.0 + 0.3 * (two_pi * t as f64 / 365.0 + 1.0).sin();

        let load_scale = 55_000.0
            * if weekend { 0.85 } else { 1.0 }
            * (1.0 + 0.1 * (two_pi * t as f64 / 365.0).cos());
        let solar_cap = 20_000.0
            * (1.0 + 0.5 * (two_pi * (t as f64 - 80.0) / 365.0).sin())
            * rng.random_range(0.4..1.0);
        wind = (15_000.0 + 0.7 * (wind - 15_000.0) + 5_000.0 * unit.sample(&mut rng)).max(500.0);
        let flat_noise = 4.0 * unit.sample(&mut rng);

        for h in 0..HOURS {
            let clock = h as f64;
            let l = load_scale * (1.0 + 0.18 * load_shape(clock)) + 800.0 * unit.sample(&mut rng);
            let r = solar_cap * solar_shape(clock)
                + wind * (1.0 + 0.1 * (two_pi * clock / 24.0).sin());
            load.push(l);
            res.push(r);

            let p = match params.profile {
                PriceProfile::Flat => level + flat_noise,
                PriceProfile::Duck | PriceProfile::Spiky => {
                    disturbance[h] = 0.6 * disturbance[h] + 4.0 * unit.sample(&mut rng);
                    let mut p = level
                        + amp * 40.0 * shape[h]
                        + 0.0008 * (l - 55_000.0)
                        - 0.0012 * (r - 15_000.0)
                        + disturbance[h];
                    if params.profile == PriceProfile::Spiky {
                        let u: f64 = rng.random();
                        if u < 0.03 {
                            p += spike_up.sample(&mut rng);
                        } else if u < 0.04 {
                            p -= spike_down.sample(&mut rng);
                        }
                    }
                    p
                }
            };
            prices.push(p);
        }
    }

    MarketDataset::new(
        Panel::new(dates.clone(), HOURS, prices).expect("shape"),
        Panel::new(dates.clone(), HOURS, load).expect("shape"),
        Panel::new(dates, HOURS, res).expect("shape"),
        commodities,
    )
    .expect("synthetic dataset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(xs: &[f64]) -> usize {
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate() {
            if x > xs[best] {
                best = i;
            }
        }
        best + 1
    }

    fn argmin(xs: &[f64]) -> usize {
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate() {
            if x < xs[best] {
                best = i;
            }
        }
        best + 1
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = synth_market(9, 40, PriceProfile::Spiky);
        let b = synth_market(9, 40, PriceProfile::Spiky);
        assert_eq!(a, b);
        let c = synth_market(10, 40, PriceProfile::Spiky);
        assert_ne!(a.prices, c.prices);
    }

    #[test]
    fn flat_days_are_constant() {
        let ds = synth_market(3, 30, PriceProfile::Flat);
        for row in ds.prices.rows() {
            assert!(row.iter().all(|&p| p == row[0]));
        }
    }

    #[test]
    fn duck_base_curve_extremes() {
        let curve = duck_base_curve();
        assert!((18..=21).contains(&argmax(&curve)), "argmax {}", argmax(&curve));
        assert!((12..=15).contains(&argmin(&curve)), "argmin {}", argmin(&curve));
    }

    #[test]
    fn res_and_load_are_positive() {
        let ds = synth_market(1, 60, PriceProfile::Duck);
        assert!(ds.res_fc.data().iter().all(|&v| v > 0.0));
        assert!(ds.load_fc.data().iter().all(|&v| v > 0.0));
    }
}
