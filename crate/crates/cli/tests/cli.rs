use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11

[data]
days = 90

[pool]
specs = ["ARX-direct-raw-het", "ARX-deviation-vst-pool", "LEAR-direct-raw-pool"]
windows = [56, 60]

[eval]
days = 14

[analysis]
rolling_window = 10
stride = 2
"#;

fn epf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epf"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) {
    std::fs::write(dir.join("run.toml"), text).unwrap();
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn all_writes_every_output_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    for out in ["a", "b"] {
        let o = epf(dir.path(), &["all", "--config", "run.toml", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tree(&dir.path().join("a"));
    for f in [
        "data/prices.csv",
        "forecasts/manifest.json",
        "forecasts/ARX-direct-raw-het-avg.csv",
        "profits/BESS-a.csv",
        "profits/BESS-b.csv",
        "metrics.csv",
        "correlation_table.csv",
        "rolling_correlation.csv",
        "yearly_stats.csv",
    ] {
        assert!(a.contains_key(f), "missing {f}");
    }
    // 3 bases × (2 windows + average), plus the manifest.
    assert_eq!(a.keys().filter(|k| k.starts_with("forecasts/")).count(), 10);
    assert_eq!(a, tree(&dir.path().join("b")));
}

#[test]
fn stages_run_separately_match_all() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    let o = epf(dir.path(), &["all", "--config", "run.toml", "--out", "whole"]);
    assert!(o.status.success());
    for stage in ["synth", "forecast", "backtest", "evaluate", "correlate"] {
        let o = epf(dir.path(), &[stage, "--config", "run.toml", "--out", "split"]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(tree(&dir.path().join("whole")), tree(&dir.path().join("split")));
}

#[test]
fn seed_flag_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), SMALL);
    assert!(epf(dir.path(), &["synth", "--config", "run.toml", "--out", "x"]).status.success());
    assert!(epf(dir.path(), &["synth", "--config", "run.toml", "--out", "y", "--seed", "12"]).status.success());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("data/prices.csv")).unwrap();
    assert_ne!(read("x"), read("y"));
}

#[test]
fn window_beyond_history_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "[data]\ndays = 400\n\n[pool]\nwindows = [56, 730]\n");
    let o = epf(dir.path(), &["all", "--config", "run.toml", "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("pool.windows") && err.contains("line 5"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn malformed_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "seed = 1\n[eval]\ndays = \"many\"\n");
    let o = epf(dir.path(), &["synth", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn missing_stage_inputs_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = epf(dir.path(), &["backtest", "--out", "empty"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}

#[test]
fn usage_errors_and_help_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(epf(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(epf(dir.path(), &["all", "--preset", "huge"]).status.code(), Some(1));
    let help = epf(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("correlate"));
}
