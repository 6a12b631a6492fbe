//! Pipeline stages. Each reads the previous stage's files under the output
//! directory and writes its own, so running them one by one gives the same
//! bytes as `cmd_all`.
//!
//! Layout:
//! - `data/{prices,load_fc,res_fc,commodities}.csv`
//! - `forecasts/<member>.csv`, `forecasts/manifest.json`
//! - `profits/<bess>.csv`
//! - `metrics.csv`
//! - `correlation_table.csv`, `rolling_correlation.csv`, `yearly_stats.csv`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chrono::NaiveDate;
use epf_core::analysis::{outcomes, pool_correlation, rolling_correlation, yearly_stats, CorrelationRow, Subset};
use epf_core::bess::{backtest, oracle_profit, DaySchedule, ProfitRecord};
use epf_core::ingest::{load_csv, synth_market_with, CsvSchema, SynthParams};
use epf_core::metrics::{evaluate, Metric, MetricOptions};
use epf_core::models::{run_pool, Family, ForecastMatrix, ForecastSpec};
use epf_core::Panel;
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::io::{
    csv_bytes, panel_bytes, read_dataset, read_panel, sha256_file, sha256_hex, write_atomic, write_dataset,
    DATA_FILES,
};

/// Member id used for perfect-foresight profits.
pub const ORACLE: &str = "Oracle";

pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Run {
    pub fn new(cfg: RunConfig, out: impl Into<PathBuf>) -> Self {
        Self { cfg, out: out.into() }
    }

    fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    fn forecast_dir(&self) -> PathBuf {
        self.out.join("forecasts")
    }

    fn profit_path(&self, bess: &str) -> PathBuf {
        self.out.join("profits").join(format!("{bess}.csv"))
    }

    fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            centered: self.cfg.analysis.centered_cov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub id: String,
    pub family: Family,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// Dataset file name to content hash.
    pub inputs: BTreeMap<String, String>,
    pub eval_start: NaiveDate,
    pub eval_end: NaiveDate,
    pub eval_days: usize,
    pub members: Vec<MemberEntry>,
}

pub fn cmd_synth(run: &Run) -> Result<()> {
    let d = &run.cfg.data;
    let ds = match d.source {
        DataSource::Synthetic => synth_market_with(&SynthParams {
            seed: run.cfg.seed,
            days: d.days,
            profile: d.profile,
            start: d.start,
        }),
        DataSource::Csv => {
            let (hourly, daily) = (d.hourly_csv.as_ref().expect("validated"), d.daily_csv.as_ref().expect("validated"));
            for p in [hourly, daily] {
                ensure!(p.exists(), "missing input {}", p.display());
            }
            load_csv(hourly, daily, &CsvSchema::default())?
        }
    };
    write_dataset(&run.data_dir(), &ds)?;
    info!("wrote {} days to {}", ds.days(), run.data_dir().display());
    Ok(())
}

pub fn cmd_forecast(run: &Run) -> Result<()> {
    let dir = run.data_dir();
    let ds = read_dataset(&dir)?;
    let start = run.cfg.eval_start(ds.days())?;
    let end = ds.days() - 1;
    let (from, to) = (ds.dates()[start], ds.dates()[end]);
    let pool = run.cfg.pool();
    info!("forecasting {} members for {from}..={to}", pool.member_count());
    let members = run_pool(&ds, from, to, &pool, &run.cfg.model())?;

    let fdir = run.forecast_dir();
    let mut entries = Vec::with_capacity(members.len());
    for m in &members {
        let file = format!("{}.csv", m.id());
        let bytes = panel_bytes(&m.values)?;
        write_atomic(&fdir.join(&file), &bytes)?;
        entries.push(MemberEntry {
            id: m.id(),
            family: m.spec.family,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let inputs = DATA_FILES
        .iter()
        .map(|f| Ok((f.to_string(), sha256_file(&dir.join(f))?)))
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        config_hash: run.cfg.hash(),
        seed: run.cfg.seed,
        inputs,
        eval_start: from,
        eval_end: to,
        eval_days: end - start + 1,
        members: entries,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&fdir.join("manifest.json"), &json)?;
    Ok(())
}

/// Forecast members listed in the manifest, checked against their hashes.
pub fn read_pool(run: &Run) -> Result<(Manifest, Vec<ForecastMatrix>)> {
    let fdir = run.forecast_dir();
    let path = fdir.join("manifest.json");
    ensure!(path.exists(), "missing input {}; run `epf forecast` first", path.display());
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let members = manifest
        .members
        .iter()
        .map(|e| {
            let p = fdir.join(&e.file);
            ensure!(p.exists(), "missing input {}", p.display());
            ensure!(sha256_file(&p)? == e.sha256, "{} does not match its manifest hash", p.display());
            let spec: ForecastSpec = e.id.parse()?;
            Ok(ForecastMatrix {
                spec,
                values: read_panel(&p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, members))
}

/// Realized prices over the evaluation days.
fn actual_prices(run: &Run, manifest: &Manifest) -> Result<Panel> {
    let prices = read_panel(&run.data_dir().join(DATA_FILES[0]))?;
    let start = prices
        .index_of(manifest.eval_start)
        .with_context(|| format!("{} not in price data", manifest.eval_start))?;
    let end = start + manifest.eval_days;
    ensure!(end <= prices.days(), "price data ends before {}", manifest.eval_end);
    Ok(prices.slice_days(start, end))
}

fn profit_header() -> Vec<String> {
    ["member_id", "date", "h_ch", "h_dis", "profit_abs", "profit_per_mwh"]
        .map(str::to_string)
        .to_vec()
}

pub fn cmd_backtest(run: &Run) -> Result<()> {
    let (manifest, members) = read_pool(run)?;
    let actual = actual_prices(run, &manifest)?;
    for spec in &run.cfg.bess {
        let oracle = oracle_profit(&actual, spec)?;
        let runs: Vec<Vec<ProfitRecord>> = members
            .par_iter()
            .map(|m| backtest(&m.values, &actual, spec))
            .collect::<epf_core::Result<_>>()?;
        let series = std::iter::once((ORACLE.to_string(), &oracle))
            .chain(members.iter().map(|m| m.id()).zip(&runs));
        let rows = series.flat_map(|(id, recs)| {
            recs.iter().map(move |r| {
                vec![
                    id.clone(),
                    r.date.to_string(),
                    r.schedule.h_ch.to_string(),
                    r.schedule.h_dis.to_string(),
                    r.profit_abs.to_string(),
                    r.profit_per_mwh.to_string(),
                ]
            })
        });
        write_atomic(&run.profit_path(&spec.name), &csv_bytes(&profit_header(), rows)?)?;
    }
    Ok(())
}

/// Profit records by member id, in file order.
pub fn read_profits(path: &Path) -> Result<BTreeMap<String, Vec<ProfitRecord>>> {
    ensure!(path.exists(), "missing input {}; run `epf backtest` first", path.display());
    let mut r = csv::Reader::from_path(path)?;
    ensure!(
        r.headers()?.iter().eq(profit_header().iter().map(String::as_str)),
        "{}: unexpected header",
        path.display()
    );
    let mut out: BTreeMap<String, Vec<ProfitRecord>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = || -> Result<ProfitRecord> {
            Ok(ProfitRecord {
                date: rec[1].parse()?,
                schedule: DaySchedule {
                    h_ch: rec[2].parse()?,
                    h_dis: rec[3].parse()?,
                },
                profit_abs: rec[4].parse()?,
                profit_per_mwh: rec[5].parse()?,
            })
        };
        let record = parse().with_context(|| format!("{} row {}", path.display(), i + 2))?;
        out.entry(rec[0].to_string()).or_default().push(record);
    }
    Ok(out)
}

pub fn cmd_evaluate(run: &Run) -> Result<()> {
    let (manifest, members) = read_pool(run)?;
    let actual = actual_prices(run, &manifest)?;
    let opts = run.metric_options();
    let reports = members
        .par_iter()
        .map(|m| evaluate(&actual, &m.values, opts))
        .collect::<epf_core::Result<Vec<_>>>()?;
    let header: Vec<String> = ["member_id"]
        .into_iter()
        .chain(Metric::ALL.map(Metric::name))
        .chain(["degenerate_days"])
        .map(str::to_string)
        .collect();
    // A singular error covariance shows up as cov_e = -inf.
    let rows = members.iter().zip(&reports).map(|(m, r)| {
        std::iter::once(m.id())
            .chain(Metric::ALL.map(|k| r.get(k).to_string()))
            .chain([r.degenerate_days.to_string()])
            .collect::<Vec<_>>()
    });
    write_atomic(&run.out.join("metrics.csv"), &csv_bytes(&header, rows)?)?;
    Ok(())
}

/// Subsets with enough members for a rank correlation.
pub fn usable_subsets(members: &[ForecastMatrix]) -> Vec<Subset> {
    Subset::ALL
        .into_iter()
        .filter(|s| members.iter().filter(|m| s.contains(m.spec.family)).count() >= 3)
        .collect()
}

fn correlation_cells(row: &CorrelationRow) -> impl Iterator<Item = String> + '_ {
    row.coefficients.iter().map(|c| c.rho.to_string())
}

fn rho_header(lead: &[&str]) -> Vec<String> {
    lead.iter()
        .copied()
        .chain(Metric::ALL.map(Metric::name))
        .map(str::to_string)
        .collect()
}

pub fn cmd_correlate(run: &Run) -> Result<()> {
    let (manifest, members) = read_pool(run)?;
    let actual = actual_prices(run, &manifest)?;
    let opts = run.metric_options();
    let subsets = usable_subsets(&members);
    if subsets.is_empty() {
        bail!("no model family has the 3 members a rank correlation needs");
    }
    let a = &run.cfg.analysis;
    if a.rolling_window > actual.days() {
        return Err(crate::config::ConfigError::Invalid {
            field: "analysis.rolling_window".into(),
            line: None,
            message: format!("{} days exceeds the {}-day evaluation period", a.rolling_window, actual.days()),
        }
        .into());
    }

    let mut table = Vec::new();
    let mut rolling = Vec::new();
    let mut yearly = Vec::new();
    for spec in &run.cfg.bess {
        let path = run.profit_path(&spec.name);
        let mut profits = read_profits(&path)?;
        let oracle = profits
            .remove(ORACLE)
            .with_context(|| format!("{}: no {ORACLE} rows", path.display()))?;
        let pool = members
            .iter()
            .map(|m| {
                let recs = profits
                    .remove(&m.id())
                    .with_context(|| format!("{}: no rows for {}", path.display(), m.id()))?;
                ensure!(
                    recs.iter().map(|r| r.date).eq(actual.dates().iter().copied()),
                    "{}: {} rows do not cover the evaluation days",
                    path.display(),
                    m.id()
                );
                Ok(recs)
            })
            .collect::<Result<Vec<_>>>()?;
        let daily: Vec<Vec<f64>> = pool
            .iter()
            .map(|recs| recs.iter().map(|r| r.profit_per_mwh).collect())
            .collect();

        let out = outcomes(&actual, &members, &daily, 0, actual.days(), opts)?;
        let series = rolling_correlation(&actual, &members, &daily, a.rolling_window, a.stride, opts, &subsets)?;
        for (&subset, s) in subsets.iter().zip(&series) {
            let row = pool_correlation(&out, subset)?;
            table.push(
                ["full_period".into(), spec.name.clone(), subset.to_string(), row.members.to_string()]
                    .into_iter()
                    .chain(correlation_cells(&row))
                    .collect::<Vec<_>>(),
            );
            table.push(
                ["rolling_mean".into(), spec.name.clone(), subset.to_string(), row.members.to_string()]
                    .into_iter()
                    .chain(Metric::ALL.map(|m| s.mean(m).to_string()))
                    .collect(),
            );
            for (start, r) in s.starts.iter().zip(&s.rows) {
                rolling.push(
                    [spec.name.clone(), subset.to_string(), start.to_string(), r.members.to_string()]
                        .into_iter()
                        .chain(correlation_cells(r))
                        .collect::<Vec<_>>(),
                );
            }
        }
        for y in yearly_stats(&oracle, &pool)? {
            yearly.push(vec![
                spec.name.clone(),
                y.year.to_string(),
                y.days.to_string(),
                y.oracle_mean.to_string(),
                y.max.to_string(),
                y.min.to_string(),
                y.mean.to_string(),
                y.std.to_string(),
            ]);
        }
    }
    write_atomic(
        &run.out.join("correlation_table.csv"),
        &csv_bytes(&rho_header(&["kind", "bess", "subset", "members"]), table)?,
    )?;
    write_atomic(
        &run.out.join("rolling_correlation.csv"),
        &csv_bytes(&rho_header(&["bess", "subset", "window_start", "members"]), rolling)?,
    )?;
    let yheader = ["bess", "year", "days", "oracle_mean", "max", "min", "mean", "std"].map(str::to_string);
    write_atomic(&run.out.join("yearly_stats.csv"), &csv_bytes(&yheader, yearly)?)?;
    Ok(())
}

pub fn cmd_all(run: &Run) -> Result<()> {
    cmd_synth(run)?;
    cmd_forecast(run)?;
    cmd_backtest(run)?;
    cmd_evaluate(run)?;
    cmd_correlate(run)
}
