// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! On-disk artifacts: lookup tables with their calibration report,
//! single-trajectory records and campaign outputs.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a table
//! loaded from disk is bit-identical to the one that was written and every
//! output is byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{fnv1a, RunConfig, SCHEMA_VERSION};
use crate::detection::{calibrate_noise, resolvable_amplitude, NoiseCalibration};
use crate::dynamics::{Termination, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::experiment::{CampaignSummary, TrajectorySummary};
use crate::field_maps::{
    build_maps, calibrate_diffusion, orbital_period, DiffusionCalibration, DiffusionModel, LevelTables, RadialMaps,
};
use crate::controllers::ControlEvent;
use crate::params::{DriveLevel, HBAR, KB};

pub const RADIAL_CSV: &str = "radial_maps.csv";
pub const COUPLING_CSV: &str = "coupling_maps.csv";
pub const TABLES_REPORT: &str = "tables_report.json";
pub const CAMPAIGN_JSONL: &str = "campaign.jsonl";
pub const CAMPAIGN_SUMMARY: &str = "summary.json";

/// Calibrated tables ready for simulation.
#[derive(Debug, Clone)]
pub struct Tables {
    /// Maps with the calibrated diffusion model installed.
    pub maps: RadialMaps,
    pub diffusion: DiffusionCalibration,
    pub noise: NoiseCalibration,
}

/// Builds the four level maps and runs both calibrations.
pub fn build_tables(config: &RunConfig) -> Result<Tables> {
    let cal = &config.calibration;
    let model = DiffusionModel { gain: 1.0, projection: cal.diffusion_projection };
    let mut maps = build_maps(&config.system, &config.maps, model)?;
    let diffusion = calibrate_diffusion(&maps, cal.heating_fraction, &cal.heating_probe)?;
    maps.set_diffusion_model(diffusion.model);
    let noise = calibrate_noise(
        &maps,
        cal.noise_level,
        cal.sensitivity_m_per_rthz,
        config.experiment.sim.dt_info_s,
        cal.noise_floor,
        cal.noise_scaling,
    )?;
    Ok(Tables { maps, diffusion, noise })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: DriveLevel,
    pub photons: f64,
    pub drive_rad_s: f64,
    pub depth_j: f64,
    /// `U0 / k_B`.
    pub depth_k: f64,
    pub fitted_waist_m: f64,
    pub fit_relative_rms: f64,
    /// Radius where the monotonic inversion branch starts.
    pub branch_start_m: f64,
}

/// Calibration report written next to the tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TablesReport {
    pub schema_version: u32,
    pub fingerprint: String,
    pub config: RunConfig,
    pub levels: Vec<LevelReport>,
    pub calibration_gain: f64,
    pub noise_gain: f64,
    pub diffusion: DiffusionCalibration,
    pub noise: NoiseCalibration,
    pub orbital_period_s: f64,
    pub resolvable_amplitude_m: f64,
    /// FNV-1a of each table file, hex.
    pub files: BTreeMap<String, String>,
}

fn hash_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}

fn radial_csv(maps: &RadialMaps) -> String {
    let mut out = String::from("level,rho_m,U_J,F_N,T,D,pop_e\n");
    let rho = maps.rho_grid();
    for lm in &maps.levels {
        for (i, r) in rho.iter().enumerate() {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                lm.level, r, lm.potential_j[i], lm.force_n[i], lm.transmission[i], lm.diffusion[i], lm.excited_population[i]
            ));
        }
    }
    out
}

fn coupling_csv(maps: &RadialMaps) -> String {
    let mut out = String::from("level,g_rad_s,Phi_J,C,T,pop_e\n");
    let g = maps.coupling_grid();
    for lm in &maps.levels {
        for (i, gi) in g.iter().enumerate() {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e}\n",
                lm.level,
                gi,
                lm.coupling_potential_j[i],
                lm.coupling_dipole[i],
                lm.coupling_transmission[i],
                lm.coupling_excited_population[i]
            ));
        }
    }
    out
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes both table files and the report into `dir`.
pub fn write_tables(dir: &Path, config: &RunConfig, tables: &Tables) -> Result<TablesReport> {
    fs::create_dir_all(dir)?;
    let maps = &tables.maps;
    let radial = radial_csv(maps);
    let coupling = coupling_csv(maps);
    fs::write(dir.join(RADIAL_CSV), &radial)?;
    fs::write(dir.join(COUPLING_CSV), &coupling)?;

    let levels = maps
        .levels
        .iter()
        .map(|lm| LevelReport {
            level: lm.level,
            photons: lm.photons,
            drive_rad_s: lm.drive_rad_s,
            depth_j: lm.depth_j,
            depth_k: lm.depth_j / KB,
            fitted_waist_m: lm.fitted_waist_m,
            fit_relative_rms: lm.fit_relative_rms,
            branch_start_m: lm.branch_start as f64 * maps.rho_step_m,
        })
        .collect();
    let tau = orbital_period(maps, &config.calibration.heating_probe)?;
    let report = TablesReport {
        schema_version: SCHEMA_VERSION,
        fingerprint: config.tables_fingerprint(),
        config: config.clone(),
        levels,
        calibration_gain: tables.diffusion.model.gain,
        noise_gain: tables.noise.model.gain,
        diffusion: tables.diffusion,
        noise: tables.noise,
        orbital_period_s: tau,
        resolvable_amplitude_m: resolvable_amplitude(tables.noise.sensitivity_m_per_rthz, tau),
        files: BTreeMap::from([
            (RADIAL_CSV.to_string(), hash_hex(radial.as_bytes())),
            (COUPLING_CSV.to_string(), hash_hex(coupling.as_bytes())),
        ]),
    };
    write_json(&dir.join(TABLES_REPORT), &report)?;
    Ok(report)
}

fn read_artifact(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    Ok(fs::read(path)?)
}

fn bad(path: &Path, message: impl Into<String>) -> Error {
    Error::BadData { context: path.display().to_string(), message: message.into() }
}

/// Parses a table CSV into one column-major block per level.
fn parse_table(path: &Path, bytes: &[u8], header: &[&str], rows_per_level: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(bad(path, format!("header {found:?}, expected {header:?}")));
    }
    let ncol = header.len() - 1;
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(rows_per_level); ncol]; DriveLevel::ALL.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let level: DriveLevel = rec[0].parse().map_err(|_| bad(path, format!("row {}: bad level `{}`", row + 1, &rec[0])))?;
        if row / rows_per_level != level.index() {
            return Err(bad(path, format!("row {}: level {level} out of order", row + 1)));
        }
        for c in 0..ncol {
            let v: f64 = rec[c + 1].trim().parse().map_err(|_| bad(path, format!("row {}: bad number `{}`", row + 1, &rec[c + 1])))?;
            blocks[level.index()][c].push(v);
        }
    }
    for (lvl, b) in DriveLevel::ALL.iter().zip(&blocks) {
        if b[0].len() != rows_per_level {
            return Err(bad(path, format!("level {lvl} has {} rows, expected {rows_per_level}", b[0].len())));
        }
    }
    Ok(blocks)
}

/// Loads tables written by [`write_tables`] for `config`.
///
/// Fails with [`Error::MissingArtifact`] if any file is absent,
/// [`Error::StaleArtifact`] if they were built from a different system or
/// calibration, and [`Error::BadData`] if a file does not match its hash.
pub fn load_tables(dir: &Path, config: &RunConfig) -> Result<(Tables, TablesReport)> {
    let report_path = dir.join(TABLES_REPORT);
    let report_bytes = read_artifact(&report_path)?;
    let radial_path = dir.join(RADIAL_CSV);
    let coupling_path = dir.join(COUPLING_CSV);
    let radial = read_artifact(&radial_path)?;
    let coupling = read_artifact(&coupling_path)?;

    let report: TablesReport = serde_json::from_slice(&report_bytes).map_err(|e| bad(&report_path, e.to_string()))?;
    let expected = config.tables_fingerprint();
    if report.fingerprint != expected {
        return Err(Error::StaleArtifact { path: report_path, expected, found: report.fingerprint });
    }
    for (path, bytes, name) in [(&radial_path, &radial, RADIAL_CSV), (&coupling_path, &coupling, COUPLING_CSV)] {
        if report.files.get(name) != Some(&hash_hex(bytes)) {
            return Err(bad(path, "content does not match the hash in the report"));
        }
    }

    let settings = &config.maps;
    let radial = parse_table(&radial_path, &radial, &["level", "rho_m", "U_J", "F_N", "T", "D", "pop_e"], settings.n_rho)?;
    let coupling = parse_table(&coupling_path, &coupling, &["level", "g_rad_s", "Phi_J", "C", "T", "pop_e"], settings.n_coupling)?;
    let model = report.diffusion.model;
    let levels = DriveLevel::ALL
        .iter()
        .zip(radial.into_iter().zip(coupling))
        .map(|(&level, (mut r, mut c))| {
            // Columns after the key: rho U F T D pop_e / g Phi C T pop_e.
            let tables = LevelTables {
                excited_population: r.swap_remove(5),
                transmission: r.swap_remove(3),
                force_n: r.swap_remove(2),
                potential_j: r.swap_remove(1),
                coupling_excited_population: c.swap_remove(4),
                coupling_transmission: c.swap_remove(3),
                coupling_dipole: c.swap_remove(2),
                coupling_potential_j: c.swap_remove(1),
            };
            tables.finish(&config.system, settings, &model, level)
        })
        .collect::<Result<Vec<_>>>()?;
    let maps = RadialMaps::from_levels(&config.system, settings, model, levels);
    let tables = Tables { maps, diffusion: report.diffusion, noise: report.noise };
    Ok((tables, report))
}

/// Trajectory CSV in display units: µs, µm, nm and `L/ħ`.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut out = String::from(
        "t_us,rho_um,drho_dt_um_per_us,x_nm,L_norm,level,T_noiseless,T_noisy,rho_est_um,drho_dt_est_um_per_us\n",
    );
    for s in &record.samples {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e}\n",
            s.t_s * 1e6,
            s.rho_m * 1e6,
            s.rho_dot_m_s,
            s.x_m * 1e9,
            s.angular_momentum / HBAR,
            s.level,
            s.transmission,
            s.noisy_transmission,
            s.rho_est_m * 1e6,
            s.rho_dot_est_m_s,
        ));
    }
    out
}

/// JSON sidecar for one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub config: RunConfig,
    pub tables_fingerprint: String,
    pub index: usize,
    pub termination: Termination,
    pub trigger_time_s: Option<f64>,
    pub end_time_s: f64,
    pub trigger_threshold: f64,
    pub events: Vec<ControlEvent>,
    pub report: TrajectorySummary,
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_trajectory(dir: &Path, stem: &str, record: &TrajectoryRecord, sidecar: &TrajectorySidecar) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, trajectory_csv(record))?;
    write_json(&json_path, sidecar)?;
    Ok((csv_path, json_path))
}

/// Summary JSON written beside the campaign JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignFile {
    pub config: RunConfig,
    pub tables_fingerprint: String,
    pub noise_gain: f64,
    pub summary: CampaignSummary,
}

pub fn write_campaign(dir: &Path, trajectories: &[TrajectorySummary], file: &CampaignFile) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join(CAMPAIGN_JSONL))?);
    for t in trajectories {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    write_json(&dir.join(CAMPAIGN_SUMMARY), file)
}

/// Reads a campaign JSONL; blank lines are skipped.
pub fn read_campaign_jsonl(path: &Path) -> Result<Vec<TrajectorySummary>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| bad(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// The configuration embedded in a campaign summary. Only the config is
/// read back: undefined means are stored as `null`.
pub fn read_campaign_config(path: &Path) -> Result<RunConfig> {
    let bytes = read_artifact(path)?;
    let mut value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| bad(path, e.to_string()))?;
    let config = value.get_mut("config").map(serde_json::Value::take).ok_or_else(|| bad(path, "no embedded config"))?;
    RunConfig::from_json(&config.to_string()).map_err(|e| bad(path, e.to_string()))
}
