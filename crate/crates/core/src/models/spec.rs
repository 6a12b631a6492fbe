use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EpfError, Result};

/// Calibration window lengths in days.
pub const WINDOWS: [usize; 7] = [56, 84, 112, 182, 365, 730, 1460];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "ARX")]
    Arx,
    #[serde(rename = "NARX")]
    Narx,
    #[serde(rename = "LEAR")]
    Lear,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Arx, Family::Narx, Family::Lear];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepVar {
    /// Hourly prices modelled directly.
    Direct,
    /// Daily mean and hourly deviation from it modelled separately.
    Deviation,
}

impl DepVar {
    pub const ALL: [DepVar; 2] = [DepVar::Direct, DepVar::Deviation];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// One coefficient vector per hour.
    Heterogeneous,
    /// One coefficient vector shared by all hours, fitted on stacked rows.
    Pooled,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Heterogeneous, Estimator::Pooled];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Days(usize),
    /// Arithmetic mean over all configured windows.
    Avg,
}

/// Identity of one pool member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForecastSpec {
    pub family: Family,
    pub depvar: DepVar,
    pub vst: bool,
    pub estimator: Estimator,
    pub window: Window,
}

impl ForecastSpec {
    pub fn new(family: Family, depvar: DepVar, vst: bool, estimator: Estimator, window: Window) -> Self {
        Self {
            family,
            depvar,
            vst,
            estimator,
            window,
        }
    }

    pub fn with_window(self, window: Window) -> Self {
        Self { window, ..self }
    }

    /// Same model with the window erased; members sharing a base are averaged.
    pub fn base(self) -> Self {
        self.with_window(Window::Avg)
    }

    /// Stable identifier such as `ARX-direct-raw-het-56` or `LEAR-deviation-vst-pool-avg`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

/// All 24 model configurations (3 families × 2 dependent variables × VST on/off × 2 estimators).
pub fn base_specs() -> Vec<ForecastSpec> {
    let mut out = Vec::with_capacity(24);
    for family in Family::ALL {
        for depvar in DepVar::ALL {
            for vst in [false, true] {
                for estimator in Estimator::ALL {
                    out.push(ForecastSpec::new(family, depvar, vst, estimator, Window::Avg));
                }
            }
        }
    }
    out
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Arx => "ARX",
            Family::Narx => "NARX",
            Family::Lear => "LEAR",
        })
    }
}

impl fmt::Display for ForecastSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let depvar = match self.depvar {
            DepVar::Direct => "direct",
            DepVar::Deviation => "deviation",
        };
        let vst = if self.vst { "vst" } else { "raw" };
        let est = match self.estimator {
            Estimator::Heterogeneous => "het",
            Estimator::Pooled => "pool",
        };
        match self.window {
            Window::Days(d) => write!(f, "{}-{depvar}-{vst}-{est}-{d}", self.family),
            Window::Avg => write!(f, "{}-{depvar}-{vst}-{est}-avg", self.family),
        }
    }
}

impl FromStr for Family {
    type Err = EpfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ARX" => Ok(Family::Arx),
            "NARX" => Ok(Family::Narx),
            "LEAR" => Ok(Family::Lear),
            _ => Err(EpfError::InvalidArgument(format!("unknown model family `{s}`"))),
        }
    }
}

impl FromStr for ForecastSpec {
    type Err = EpfError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || EpfError::InvalidArgument(format!("malformed forecast id `{s}`"));
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 5 {
            return Err(bad());
        }
        let family = parts[0].parse()?;
        let depvar = match parts[1] {
            "direct" => DepVar::Direct,
            "deviation" => DepVar::Deviation,
            _ => return Err(bad()),
        };
        let vst = match parts[2] {
            "vst" => true,
            "raw" => false,
            _ => return Err(bad()),
        };
        let estimator = match parts[3] {
            "het" => Estimator::Heterogeneous,
            "pool" => Estimator::Pooled,
            _ => return Err(bad()),
        };
        let window = match parts[4] {
            "avg" => Window::Avg,
            d => Window::Days(d.parse().map_err(|_| bad())?),
        };
        Ok(ForecastSpec::new(family, depvar, vst, estimator, window))
    }
}
