//! Stage files: atomic writes, day × hour panel CSVs and content hashes.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use epf_core::ingest::{MarketDataset, COMMODITIES};
use epf_core::{Panel, HOURS};
use sha2::{Digest, Sha256};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let name = path.file_name().context("output path has no file name")?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Builds a CSV in memory. Floats use the shortest representation that
/// round-trips, so rereading a file reproduces the values bit for bit.
pub fn csv_bytes<I, R>(header: &[String], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn hour_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((1..=HOURS).map(|h| format!("h{h}")))
        .collect()
}

pub fn panel_bytes(panel: &Panel) -> Result<Vec<u8>> {
    csv_bytes(
        &hour_header("date"),
        (0..panel.days()).map(|d| {
            std::iter::once(panel.dates()[d].to_string()).chain(panel.row(d).iter().map(|v| v.to_string()))
        }),
    )
}

pub fn read_panel(path: &Path) -> Result<Panel> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != hour_header("date") {
        bail!("{}: expected header date,h1..h{HOURS}", path.display());
    }
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{} row {}", path.display(), i + 2))?;
        let date: NaiveDate = rec[0]
            .parse()
            .with_context(|| format!("{} row {}: bad date `{}`", path.display(), i + 2, &rec[0]))?;
        let row = rec
            .iter()
            .skip(1)
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{} row {}: bad number", path.display(), i + 2))?;
        dates.push(date);
        rows.push(row);
    }
    Ok(Panel::from_rows(dates, &rows)?)
}

pub const DATA_FILES: [&str; 4] = ["prices.csv", "load_fc.csv", "res_fc.csv", "commodities.csv"];

/// Writes the dataset under `dir` and returns each file's hash, in [`DATA_FILES`] order.
pub fn write_dataset(dir: &Path, ds: &MarketDataset) -> Result<Vec<String>> {
    let mut hashes = Vec::new();
    for (name, panel) in DATA_FILES.iter().zip([&ds.prices, &ds.load_fc, &ds.res_fc]) {
        let bytes = panel_bytes(panel)?;
        write_atomic(&dir.join(name), &bytes)?;
        hashes.push(sha256_hex(&bytes));
    }
    let header: Vec<String> = std::iter::once("date").chain(COMMODITIES).map(str::to_string).collect();
    let bytes = csv_bytes(
        &header,
        ds.dates().iter().zip(&ds.commodities).map(|(d, c)| {
            std::iter::once(d.to_string()).chain(c.iter().map(|v| v.to_string()))
        }),
    )?;
    write_atomic(&dir.join(DATA_FILES[3]), &bytes)?;
    hashes.push(sha256_hex(&bytes));
    Ok(hashes)
}

pub fn read_dataset(dir: &Path) -> Result<MarketDataset> {
    let missing = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            bail!("missing input {}; run `epf synth` first", p.display())
        }
    };
    let prices = read_panel(&missing(DATA_FILES[0])?)?;
    let load = read_panel(&missing(DATA_FILES[1])?)?;
    let res = read_panel(&missing(DATA_FILES[2])?)?;
    let path = missing(DATA_FILES[3])?;
    let mut r = csv::Reader::from_path(&path)?;
    let mut commodities = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut row = [0.0; 4];
        for (k, v) in row.iter_mut().enumerate() {
            *v = rec
                .get(k + 1)
                .context("short row")
                .and_then(|s| Ok(s.parse::<f64>()?))
                .with_context(|| format!("{} row {}", path.display(), i + 2))?;
        }
        commodities.push(row);
    }
    Ok(MarketDataset::new(prices, load, res, commodities)?)
}
