//! Run configuration: a TOML file layered over a bundled preset.
//!
//! Effective values come from, in increasing priority, the built-in
//! defaults, the preset (`configs/desk.toml` or `configs/full.toml`) and the
//! user's file. Semantic errors name the offending field and, when the user
//! file sets it, its line.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epf_core::bess::BessSpec;
use epf_core::ingest::{FrameOptions, PriceProfile, MAX_LAG_DAYS};
use epf_core::models::{
    base_specs, Family, ForecastSpec, LassoConfig, ModelConfig, NarxConfig, PoolConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const DESK: &str = include_str!("../../../configs/desk.toml");
const FULL: &str = include_str!("../../../configs/full.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn source(self) -> &'static str {
        match self {
            Preset::Desk => DESK,
            Preset::Full => FULL,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("invalid `{field}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },

    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Synthetic market length.
    pub days: usize,
    pub profile: PriceProfile,
    pub start: NaiveDate,
    /// Hourly prices, load and RES forecasts; relative to the config file.
    pub hourly_csv: Option<PathBuf>,
    /// Daily commodity closes; relative to the config file.
    pub daily_csv: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            days: 400,
            profile: PriceProfile::Duck,
            start: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            hourly_csv: None,
            daily_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSection {
    /// Base models: ids such as `LEAR-deviation-vst-pool`, a family name, or `all`.
    pub specs: Vec<String>,
    pub windows: Vec<usize>,
    pub averages: bool,
}

impl Default for PoolSection {
    fn default() -> Self {
        Self {
            specs: vec!["all".into()],
            windows: vec![56, 84, 112],
            averages: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Length of the evaluation period, ending on the last day of data.
    /// Unset: every day with enough history for the largest window.
    pub days: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub frames: FrameOptions,
    pub lasso: LassoConfig,
    pub narx: NarxConfig,
    pub mad_scale: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            frames: m.frames,
            lasso: m.lasso,
            narx: m.narx,
            mad_scale: m.mad_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub rolling_window: usize,
    pub stride: usize,
    /// Center errors before the Cov-e second-moment matrix.
    pub centered_cov: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            rolling_window: 91,
            stride: 7,
            centered_cov: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub pool: PoolSection,
    pub eval: EvalSection,
    pub model: ModelSection,
    pub bess: Vec<BessSpec>,
    pub analysis: AnalysisSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataConfig::default(),
            pool: PoolSection::default(),
            eval: EvalSection::default(),
            model: ModelSection::default(),
            bess: vec![BessSpec::bess_a(), BessSpec::bess_b()],
            analysis: AnalysisSection::default(),
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn parse_table(origin: &str, src: &str) -> Result<toml::Table, ConfigError> {
    src.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })
}

/// Expands `pool.specs` entries into base specs.
pub fn expand_specs(entries: &[String]) -> Result<Vec<ForecastSpec>, String> {
    let mut out = Vec::new();
    for entry in entries {
        if entry.eq_ignore_ascii_case("all") {
            out.extend(base_specs());
        } else if let Ok(family) = entry.parse::<Family>() {
            out.extend(base_specs().into_iter().filter(|s| s.family == family));
        } else {
            let spec: ForecastSpec = format!("{entry}-avg")
                .parse()
                .map_err(|_| format!("`{entry}` is not a base model id, family name or `all`"))?;
            out.push(spec);
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Preset overlaid with `user` (the text of a config file), then validated.
    pub fn load(preset: Preset, user: Option<(&str, &Path)>) -> Result<Self, ConfigError> {
        let mut table = parse_table("preset", preset.source())?;
        let mut base_dir = None;
        if let Some((src, path)) = user {
            let origin = path.display().to_string();
            // Typed pass over the user file alone, so type errors and unknown
            // keys report the user's own line numbers.
            toml::from_str::<RunConfig>(src).map_err(|e| ConfigError::Parse {
                origin: origin.clone(),
                message: e.to_string(),
            })?;
            merge(&mut table, parse_table(&origin, src)?);
            base_dir = path.parent().map(Path::to_path_buf);
        }
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            origin: "merged config".into(),
            message: e.to_string(),
        })?;
        if let Some(dir) = base_dir {
            for p in [&mut cfg.data.hourly_csv, &mut cfg.data.daily_csv].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        let src = user.map(|(s, _)| s);
        cfg.validate().map_err(|(field, message)| ConfigError::Invalid {
            line: src.and_then(|s| line_of(s, &field)),
            field,
            message,
        })?;
        Ok(cfg)
    }

    pub fn from_file(preset: Preset, path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::load(preset, Some((&src, path)))
    }

    pub fn pool(&self) -> PoolConfig {
        PoolConfig {
            specs: expand_specs(&self.pool.specs).expect("validated"),
            windows: self.pool.windows.clone(),
            averages: self.pool.averages,
        }
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            frames: self.model.frames,
            lasso: self.model.lasso,
            narx: self.model.narx,
            mad_scale: self.model.mad_scale,
        }
    }

    /// Days of data needed before the first forecast day.
    pub fn history_needed(&self) -> usize {
        self.pool.windows.iter().copied().max().unwrap_or(0) + MAX_LAG_DAYS
    }

    /// First evaluation day index for a dataset of `days` days.
    pub fn eval_start(&self, days: usize) -> Result<usize, ConfigError> {
        let need = self.history_needed();
        let start = match self.eval.days {
            Some(n) => days.checked_sub(n).unwrap_or(0),
            None => need,
        };
        if start < need || start >= days {
            let available = days.saturating_sub(self.eval.days.unwrap_or(1));
            return Err(ConfigError::Invalid {
                field: "pool.windows".into(),
                line: None,
                message: format!(
                    "the largest window needs {need} days of history before the evaluation period, \
                     but the {days}-day dataset leaves {available}"
                ),
            });
        }
        Ok(start)
    }

    /// Stable digest of the effective configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn validate(&self) -> Result<(), (String, String)> {
        let err = |field: &str, msg: String| Err((field.to_string(), msg));
        match self.data.source {
            DataSource::Synthetic if self.data.days == 0 => {
                return err("data.days", "must be positive".into());
            }
            DataSource::Csv => {
                if self.data.hourly_csv.is_none() {
                    return err("data.hourly_csv", "required when data.source = \"csv\"".into());
                }
                if self.data.daily_csv.is_none() {
                    return err("data.daily_csv", "required when data.source = \"csv\"".into());
                }
            }
            _ => {}
        }

        let specs = match expand_specs(&self.pool.specs) {
            Ok(s) => s,
            Err(msg) => return err("pool.specs", msg),
        };
        let pool = PoolConfig {
            specs,
            windows: self.pool.windows.clone(),
            averages: self.pool.averages,
        };
        if let Err(e) = pool.validate() {
            let field = if self.pool.windows.is_empty() || self.pool.windows.contains(&0) {
                "pool.windows"
            } else {
                "pool.specs"
            };
            return err(field, e.to_string());
        }
        if let Some(0) = self.eval.days {
            return err("eval.days", "must be positive".into());
        }
        if self.data.source == DataSource::Synthetic {
            let need = self.history_needed();
            let eval = self.eval.days.unwrap_or(1);
            if need + eval > self.data.days {
                return err(
                    "pool.windows",
                    format!(
                        "window {} plus {MAX_LAG_DAYS} lag days and {eval} evaluation days exceeds the {}-day history",
                        need - MAX_LAG_DAYS,
                        self.data.days
                    ),
                );
            }
        }

        let narx = &self.model.narx;
        if narx.committee_size == 0 {
            return err("model.narx.committee_size", "must be at least 1".into());
        }
        if narx.hidden == 0 {
            return err("model.narx.hidden", "must be at least 1".into());
        }
        if !(narx.holdout_fraction > 0.0 && narx.holdout_fraction < 1.0) {
            return err("model.narx.holdout_fraction", "must lie in (0, 1)".into());
        }
        let lasso = &self.model.lasso;
        if lasso.grid_points == 0 {
            return err("model.lasso.grid_points", "must be positive".into());
        }
        if !(lasso.min_ratio > 0.0 && lasso.min_ratio < 1.0) {
            return err("model.lasso.min_ratio", "must lie in (0, 1)".into());
        }
        if !(self.model.mad_scale > 0.0 && self.model.mad_scale.is_finite()) {
            return err("model.mad_scale", "must be positive".into());
        }

        if self.bess.is_empty() {
            return err("bess", "at least one battery is required".into());
        }
        for (i, b) in self.bess.iter().enumerate() {
            if let Err(e) = b.validate() {
                return err(&format!("bess[{i}]"), e.to_string());
            }
            if self.bess[..i].iter().any(|o| o.name == b.name) {
                return err(&format!("bess[{i}].name"), format!("duplicate battery name `{}`", b.name));
            }
        }

        if self.analysis.stride == 0 {
            return err("analysis.stride", "must be positive".into());
        }
        if self.analysis.rolling_window < 2 {
            return err("analysis.rolling_window", "must be at least 2 days".into());
        }
        if let Some(n) = self.eval.days {
            if self.analysis.rolling_window > n {
                return err(
                    "analysis.rolling_window",
                    format!("{} days exceeds the {n}-day evaluation period", self.analysis.rolling_window),
                );
            }
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&toml::to_string(self).map_err(|_| fmt::Error)?)
    }
}

enum Key<'a> {
    Name(&'a str),
    Index(usize),
}

fn path_keys(field: &str) -> Vec<Key<'_>> {
    let mut keys = Vec::new();
    for part in field.split('.') {
        match part.split_once('[') {
            Some((name, rest)) => {
                keys.push(Key::Name(name));
                if let Ok(i) = rest.trim_end_matches(']').parse() {
                    keys.push(Key::Index(i));
                }
            }
            None => keys.push(Key::Name(part)),
        }
    }
    keys
}

/// 1-based line of the deepest part of `field` present in `src`.
fn line_of(src: &str, field: &str) -> Option<usize> {
    use toml::de::{DeTable, DeValue};
    let doc = DeTable::parse(src).ok()?;
    let mut value: Option<&DeValue<'_>> = None;
    let mut table = Some(doc.get_ref());
    let mut span = None;
    for key in path_keys(field) {
        let next = match (key, table, value) {
            (Key::Name(name), Some(t), _) => t.get(name),
            (Key::Index(i), _, Some(DeValue::Array(items))) => items.get(i),
            _ => None,
        };
        let Some(next) = next else { break };
        span = Some(next.span());
        value = Some(next.get_ref());
        table = match next.get_ref() {
            DeValue::Table(t) => Some(t),
            _ => None,
        };
    }
    span.map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1)
}
