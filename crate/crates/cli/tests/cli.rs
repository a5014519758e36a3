use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use goalrate_cli::validate::run_validation_with;
use goalrate_cli::ExperimentConfig;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn goalrate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_goalrate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_sub(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    goalrate(&args)
}

const SMALL: &str = r#"
schema_version = 1
budget = 8.0
[system]
horizon = 4
sigma_z2 = 1.0
c2 = 10.0
[sweep]
parameter = "A"
from = 0.5
to = 2.0
step = 0.5
[mc]
replications = 20000
master_seed = 3
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn every_subcommand_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, cfg) in [
        ("cost-sweep", "cost_sweep.toml"),
        ("rate-profile", "rate_profile.toml"),
        ("time-variant", "time_variant.toml"),
        ("validate", "validate.toml"),
    ] {
        let out = dir.path().join(sub);
        let result = run_sub(sub, &configs().join(cfg), &out, &["--replications", "2000"]);
        assert!(result.status.success(), "{sub}: {}", String::from_utf8_lossy(&result.stderr));
        let csv = fs::read_to_string(out.join(format!("{sub}.csv"))).unwrap();
        assert!(csv.starts_with(&format!("# {sub} v1: ")));
        let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(manifest.contains("config_sha256 = "));
        assert!(manifest.contains("replications = 2000"));
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_sub("cost-sweep", &config, &a, &["--threads", "1"]).status.success());
    assert!(run_sub("cost-sweep", &config, &b, &["--threads", "3"]).status.success());
    assert_eq!(
        fs::read(a.join("cost-sweep.csv")).unwrap(),
        fs::read(b.join("cost-sweep.csv")).unwrap()
    );
    let c = dir.path().join("c");
    assert!(run_sub("cost-sweep", &config, &c, &["--seed", "4"]).status.success());
    assert_ne!(
        fs::read(a.join("cost-sweep.csv")).unwrap(),
        fs::read(c.join("cost-sweep.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), &SMALL.replace("budget = 8.0", "budgte = 8.0"));
    let out = run_sub("cost-sweep", &typo, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    let out = run_sub("cost-sweep", &missing, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));

    // time-variant without a jump
    let config = write_config(dir.path(), SMALL);
    let out = run_sub("time-variant", &config, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_one() {
    // One replication leaves no spread to compare the Monte Carlo gap against.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run_sub("validate", &config, &dir.path().join("o"), &["--replications", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let report = fs::read_to_string(dir.path().join("o/validate.csv")).unwrap();
    assert!(report.contains("mc_gap_optimal,A=0.5,false"));
}

#[test]
fn zero_compression_constant_gives_zero_costs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("c2 = 10.0", "c2 = 0.0"));
    let out_dir = dir.path().join("o");
    assert!(run_sub("validate", &config, &out_dir, &[]).status.success());
    assert!(run_sub("cost-sweep", &config, &out_dir, &[]).status.success());
    let csv = fs::read_to_string(out_dir.join("cost-sweep.csv")).unwrap();
    let mut rows = csv.lines().skip(2);
    for line in rows.by_ref() {
        let fields: Vec<&str> = line.split(',').collect();
        for col in [8, 10, 12] {
            assert_eq!(fields[col], "0.0", "{line}");
        }
    }
}

#[test]
fn injected_terminal_gain_is_reported() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let report = run_validation_with(&cfg, |spec| {
        let mut gains = goalrate::synthesize_gains(spec)?;
        *gains.f_seq.last_mut().unwrap() = 0.25;
        Ok(gains)
    })
    .unwrap();
    assert!(!report.passed());
    let bad: Vec<&str> = report.failures().map(|c| c.name).collect();
    assert!(bad.contains(&"gain_schedule"));
    assert!(bad.contains(&"path_identity"));
}

#[test]
fn rate_profile_rows_respect_allocation_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(run_sub("rate-profile", &configs().join("rate_profile.toml"), &out, &[]).status.success());
    let text = fs::read_to_string(out.join("rate-profile.csv")).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["A", "B", "t", "F_t", "a_t", "R_raw", "R_optimal", "R_uniform"]
    );
    let mut totals = std::collections::BTreeMap::<String, f64>::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let r: f64 = rec[6].parse().unwrap();
        assert!(r >= 0.0);
        *totals.entry(format!("{},{}", &rec[0], &rec[1])).or_default() += r;
    }
    assert_eq!(totals.len(), 7);
    for total in totals.values() {
        assert!(*total <= 22.0 + 1e-9);
    }
}
