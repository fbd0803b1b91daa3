// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn cavfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavfb"))
        .args(args)
        .env_remove("SIM_SEED")
        .output()
        .expect("spawn cavfb")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Tables for the default configuration, built once per test binary.
fn tables() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tables");
        let out = cavfb(&["tables", "--tables", dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
}

fn tables_arg() -> &'static str {
    tables().to_str().unwrap()
}

// Short campaigns keep the suite fast.
const SMALL: [&str; 6] = [
    "--experiment.n_drops",
    "12",
    "--experiment.sim.t_max_s",
    "1e-3",
    "--experiment.sim.substeps",
    "30",
];

#[test]
fn help_lists_subcommands_and_config_flags() {
    let out = cavfb(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for word in ["tables", "run", "batch", "analyze", "--jobs", "--preset", "--set", "--config"] {
        assert!(text.contains(word), "missing {word}");
    }
    // Config overrides show on each subcommand.
    let out = cavfb(&["run", "--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--experiment.controller.limit_m_s", "--experiment.sim.substeps", "--system.waist_m", "--index"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&cavfb(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&cavfb(&["config", "--preset", "nope"])), 1);
    assert_eq!(code(&cavfb(&["config", "--set", "experiment.bogus=1"])), 1);
    assert_eq!(code(&cavfb(&["config", "--set", "no-equals"])), 1);
}

#[test]
fn config_reflects_flags_and_seed_variable() {
    let out = Command::new(env!("CARGO_BIN_EXE_cavfb"))
        .args(["config", "--preset", "o2", "--experiment.n_drops", "9"])
        .env("SIM_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["experiment"]["n_drops"], 9);
    assert_eq!(v["experiment"]["master_seed"], 77);

    // The printed config loads back as a config file.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(&path, &out.stdout).unwrap();
    let again = cavfb(&["config", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    let w: serde_json::Value = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(w["experiment"]["n_drops"], 9);

    let mut bad = v.clone();
    bad["experiment"]["typo"] = serde_json::json!(true);
    fs::write(&path, bad.to_string()).unwrap();
    assert_eq!(code(&cavfb(&["config", "--config", path.to_str().unwrap()])), 1);
}

#[test]
fn missing_and_stale_tables_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("none");
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(code(&cavfb(&["run", "--tables", empty.to_str().unwrap(), "--out", out])), 3);
    assert_eq!(code(&cavfb(&["batch", "--tables", empty.to_str().unwrap(), "--out", out])), 3);
    let stale = cavfb(&["run", "--tables", tables_arg(), "--out", out, "--system.waist_m", "15e-6"]);
    assert_eq!(code(&stale), 3);
    assert!(String::from_utf8_lossy(&stale.stderr).contains("error"));
}

#[test]
fn run_is_reproducible_and_embeds_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let go = |sub: &str| {
        let out = dir.path().join(sub);
        let o = cavfb(&["run", "--tables", tables_arg(), "--out", out.to_str().unwrap(), "--index", "4", "--svg"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (go("a"), go("b"));
    for name in ["trajectory_4.csv", "trajectory_4.json", "trajectory_4.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let side: serde_json::Value = serde_json::from_slice(&fs::read(a.join("trajectory_4.json")).unwrap()).unwrap();
    assert_eq!(side["index"], 4);
    assert_eq!(side["config"]["experiment"]["name"], "c1");
    let svg = fs::read_to_string(a.join("trajectory_4.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn constant_policy_has_no_switches_after_trigger() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for index in ["0", "1", "2"] {
        let o = cavfb(&["run", "--preset", "constant-hi", "--tables", tables_arg(), "--out", out, "--index", index]);
        assert_eq!(code(&o), 0);
        let side: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(format!("trajectory_{index}.json"))).unwrap()).unwrap();
        // At most the trigger itself.
        let events = side["events"].as_array().unwrap();
        assert!(events.len() <= 1, "drop {index}");
        assert!(events.iter().all(|e| e["cause"] == "trigger"), "drop {index}");
    }
}

#[test]
fn batch_is_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let go = |jobs: &str| {
        let out = dir.path().join(format!("jobs{jobs}"));
        let mut args = vec!["batch", "--tables", tables_arg(), "--out", out.to_str().unwrap(), "--jobs", jobs];
        args.extend(SMALL);
        let o = cavfb(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (go("1"), go("3"));
    for name in ["campaign.jsonl", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let lines = fs::read_to_string(a.join("campaign.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 12);

    let report = dir.path().join("analysis");
    let o = cavfb(&[
        "analyze",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--svg",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(report.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(v["campaigns"].as_array().unwrap().len(), 2);
    assert_eq!(v["comparisons"].as_array().unwrap().len(), 1);
    assert_eq!(v["campaigns"][0]["n_drops"], 12);
}

#[test]
fn analyze_handles_empty_and_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let report = dir.path().join("report");
    let o = cavfb(&["analyze", empty.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(report.join("analysis.json")).unwrap()).unwrap();
    assert_eq!(v["campaigns"][0]["n_drops"], 0);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{ not json\n").unwrap();
    assert_eq!(code(&cavfb(&["analyze", bad.to_str().unwrap(), "--out", report.to_str().unwrap()])), 4);
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(code(&cavfb(&["analyze", missing.to_str().unwrap(), "--out", report.to_str().unwrap()])), 3);
}
