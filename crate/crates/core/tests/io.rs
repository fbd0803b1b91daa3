// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::fs;

use cavfb::config::{Preset, RunConfig, SCHEMA_VERSION, SEED_ENV};
use cavfb::dynamics::{run_trajectory, trajectory_rng};
use cavfb::error::Error;
use cavfb::experiment::{run_campaign, TrajectorySummary};
use cavfb::io::{
    load_tables, read_campaign_config, read_campaign_jsonl, trajectory_csv, write_campaign, write_tables, CampaignFile,
    COUPLING_CSV, RADIAL_CSV, TABLES_REPORT,
};
use cavfb::params::DriveLevel;

fn written() -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::default();
    write_tables(dir.path(), &config, common::tables()).unwrap();
    (dir, config)
}

#[test]
fn tables_round_trip_bit_for_bit() {
    let (dir, config) = written();
    let (loaded, report) = load_tables(dir.path(), &config).unwrap();
    let orig = &common::tables().maps;
    for (a, b) in orig.levels.iter().zip(&loaded.maps.levels) {
        assert_eq!(a.potential_j, b.potential_j);
        assert_eq!(a.force_n, b.force_n);
        assert_eq!(a.transmission, b.transmission);
        assert_eq!(a.diffusion, b.diffusion);
        assert_eq!(a.coupling_dipole, b.coupling_dipole);
        assert_eq!(a.depth_j, b.depth_j);
        assert_eq!(a.fitted_waist_m, b.fitted_waist_m);
        assert_eq!(a.branch_start, b.branch_start);
    }
    assert_eq!(loaded.noise, common::tables().noise);
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    assert_eq!(report.levels.len(), 4);
    // 4 levels × 2048 rows plus the header.
    let radial = fs::read_to_string(dir.path().join(RADIAL_CSV)).unwrap();
    assert_eq!(radial.lines().count(), 4 * 2048 + 1);
    let hi = report.levels.iter().find(|l| l.level == DriveLevel::Hi).unwrap();
    assert!((hi.depth_k * 1e3 / 2.5 - 1.0).abs() < 0.1);
}

#[test]
fn rewriting_tables_is_byte_identical() {
    let (a, config) = written();
    let b = tempfile::tempdir().unwrap();
    write_tables(b.path(), &config, common::tables()).unwrap();
    for name in [RADIAL_CSV, COUPLING_CSV, TABLES_REPORT] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn missing_stale_and_corrupt_tables_are_distinguished() {
    let empty = tempfile::tempdir().unwrap();
    let config = RunConfig::default();
    let err = load_tables(empty.path(), &config).unwrap_err();
    assert!(matches!(err, Error::MissingArtifact(_)));
    assert_eq!(err.exit_code(), 3);

    let (dir, config) = written();
    let mut other = config.clone();
    other.set("system.waist_m", "15e-6").unwrap();
    let err = load_tables(dir.path(), &other).unwrap_err();
    assert!(matches!(err, Error::StaleArtifact { .. }));
    assert_eq!(err.exit_code(), 3);

    // Experiment settings do not invalidate tables.
    let mut same = config.clone();
    same.set("experiment.n_drops", "7").unwrap();
    assert!(load_tables(dir.path(), &same).is_ok());

    let path = dir.path().join(RADIAL_CSV);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("hi,0,0,0,0,0,0\n");
    fs::write(&path, text).unwrap();
    let err = load_tables(dir.path(), &config).unwrap_err();
    assert!(matches!(err, Error::BadData { .. }), "{err}");
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn trajectory_csv_is_reproducible() {
    let tables = common::tables();
    let mut config = RunConfig::preset(Preset::C1);
    config.experiment.sim.substeps = 30;
    let spec = config.campaign_spec(tables.noise.model);
    let run = || {
        let r = run_trajectory(&spec.sim, &tables.maps, &spec.controller, &spec.measurement, &mut trajectory_rng(3, 17)).unwrap();
        trajectory_csv(&r)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let header = a.lines().next().unwrap();
    assert_eq!(
        header,
        "t_us,rho_um,drho_dt_um_per_us,x_nm,L_norm,level,T_noiseless,T_noisy,rho_est_um,drho_dt_est_um_per_us"
    );
    assert!(a.lines().count() > 10);
}

#[test]
fn campaign_files_round_trip() {
    let tables = common::tables();
    let mut config = RunConfig::preset(Preset::PinnedHi);
    config.experiment.n_drops = 6;
    config.experiment.sim.t_max_s = 1.5e-3;
    let spec = config.campaign_spec(tables.noise.model);
    let result = run_campaign(&spec, &tables.maps, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = CampaignFile {
        config: config.clone(),
        tables_fingerprint: config.tables_fingerprint(),
        noise_gain: tables.noise.model.gain,
        summary: result.summary.clone(),
    };
    write_campaign(dir.path(), &result.trajectories, &file).unwrap();
    let back = read_campaign_jsonl(&dir.path().join("campaign.jsonl")).unwrap();
    assert_eq!(back.len(), result.trajectories.len());
    for (a, b) in result.trajectories.iter().zip(&back) {
        assert_eq!(a.index, b.index);
        assert_eq!(a.dwell_s, b.dwell_s);
        assert_eq!(a.merit, b.merit);
    }
    assert_eq!(read_campaign_config(&dir.path().join("summary.json")).unwrap(), config);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"index\": 0}\nnot json\n").unwrap();
    assert!(matches!(read_campaign_jsonl(&bad), Err(Error::BadData { .. })));
    let blank = dir.path().join("blank.jsonl");
    fs::write(&blank, "\n\n").unwrap();
    assert_eq!(read_campaign_jsonl(&blank).unwrap(), Vec::<TrajectorySummary>::new());
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    for preset in Preset::ALL {
        let c = RunConfig::preset(preset);
        assert_eq!(Preset::from_name(preset.name()).unwrap(), preset);
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }
    let c = RunConfig::default();
    let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
    v["experiment"]["sim"]["bogus"] = serde_json::json!(1);
    assert!(matches!(RunConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
    v["schema_version"] = serde_json::json!(SCHEMA_VERSION + 1);
    assert!(RunConfig::from_json(&v.to_string()).is_err());

    let mut c = RunConfig::default();
    assert!(c.set("experiment.sim.nope", "1").is_err());
    c.set("experiment.controller.policy", "open_loop").unwrap();
    c.set("experiment.n_drops", "11").unwrap();
    assert_eq!(c.experiment.n_drops, 11);
    assert_eq!(c.experiment.controller.policy, cavfb::controllers::Policy::OpenLoop);
    // Windows must stay on the sample grid.
    assert!(c.set("experiment.estimator.fir_window_s", "40.5e-6").is_err());
    assert!(Preset::from_name("nope").is_err());
}

#[test]
fn seed_comes_from_the_environment() {
    let mut c = RunConfig::default();
    std::env::set_var(SEED_ENV, "4242");
    c.apply_env().unwrap();
    std::env::set_var(SEED_ENV, "x");
    assert!(c.apply_env().is_err());
    std::env::remove_var(SEED_ENV);
    assert_eq!(c.experiment.master_seed, 4242);
}
