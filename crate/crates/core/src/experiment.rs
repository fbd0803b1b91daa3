// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo campaigns and the statistics used to score them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::ControllerConfig;
use crate::dynamics::{run_trajectory, trajectory_rng, MeasurementConfig, SimConfig, Termination, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::field_maps::RadialMaps;
use crate::stats::{self, exponential_lifetime, Histogram, LifetimeFit};

/// Two equal-length windows, in seconds after the trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeritWindows {
    pub early_s: (f64, f64),
    pub late_s: (f64, f64),
}

impl MeritWindows {
    /// 15-215 µs against 415-615 µs.
    pub const PRIMARY: MeritWindows = MeritWindows { early_s: (15e-6, 215e-6), late_s: (415e-6, 615e-6) };
    /// 15-215 µs against 1015-1215 µs.
    pub const EXTENDED: MeritWindows = MeritWindows { early_s: (15e-6, 215e-6), late_s: (1015e-6, 1215e-6) };

    pub fn required_dwell(&self) -> f64 {
        self.late_s.1
    }
}

fn window<'a>(record: &'a TrajectoryRecord, span: (f64, f64)) -> Result<&'a [crate::dynamics::Sample]> {
    let t0 = record.trigger_index().ok_or(Error::InsufficientDwell { needed_s: span.1, have_s: 0.0 })?;
    let dwell = record.dwell().unwrap_or(0.0);
    if dwell + 0.5 * record.dt_info_s < span.1 {
        return Err(Error::InsufficientDwell { needed_s: span.1, have_s: dwell });
    }
    let a = t0 + (span.0 / record.dt_info_s).round() as usize;
    let b = t0 + (span.1 / record.dt_info_s).round() as usize;
    if b > record.samples.len() {
        return Err(Error::InsufficientDwell { needed_s: span.1, have_s: dwell });
    }
    Ok(&record.samples[a..b])
}

/// Sample variance of `ρ̇_est` over one window after the trigger, m²/s².
pub fn window_variance(record: &TrajectoryRecord, span: (f64, f64)) -> Result<f64> {
    let xs: Vec<f64> = window(record, span)?.iter().map(|s| s.rho_dot_est_m_s).collect();
    Ok(stats::variance(&xs))
}

/// Ratio of `ρ̇_est` variances, early window over late window.
pub fn figure_of_merit(record: &TrajectoryRecord, windows: &MeritWindows) -> Result<f64> {
    Ok(window_variance(record, windows.early_s)? / window_variance(record, windows.late_s)?)
}

/// Same ratio computed from the true `ρ̇`.
pub fn true_figure_of_merit(record: &TrajectoryRecord, windows: &MeritWindows) -> Result<f64> {
    let early: Vec<f64> = window(record, windows.early_s)?.iter().map(|s| s.rho_dot_m_s).collect();
    let late: Vec<f64> = window(record, windows.late_s)?.iter().map(|s| s.rho_dot_m_s).collect();
    Ok(stats::variance(&early) / stats::variance(&late))
}

/// Window-averaged motional energy, measured from the bottom of the
/// reference (hi) well so it is positive for any trapped atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyChange {
    pub early_j: f64,
    pub late_j: f64,
    pub delta_j: f64,
    /// `ΔE / E_early`.
    pub fractional: f64,
}

/// Mean of kinetic plus reference-map potential energy in each window,
/// offset by the reference well depth.
pub fn energy_accounting(record: &TrajectoryRecord, maps: &RadialMaps, windows: &MeritWindows) -> Result<EnergyChange> {
    let depth = maps.level(crate::params::DriveLevel::Hi).depth_j;
    let e = |span| -> Result<f64> {
        let w = window(record, span)?;
        Ok(depth + w.iter().map(|s| s.kinetic_j + s.reference_potential_j).sum::<f64>() / w.len() as f64)
    };
    let early_j = e(windows.early_s)?;
    let late_j = e(windows.late_s)?;
    let delta_j = late_j - early_j;
    Ok(EnergyChange { early_j, late_j, delta_j, fractional: delta_j / early_j })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub name: String,
    pub n_drops: usize,
    pub master_seed: u64,
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub measurement: MeasurementConfig,
    pub merit_windows: MeritWindows,
    pub extended_windows: MeritWindows,
    /// Dwell times shorter than this are left out of the lifetime fit.
    pub lifetime_burn_in_s: f64,
}

/// Per-trajectory line of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub termination: Termination,
    pub trigger_time_s: Option<f64>,
    pub dwell_s: Option<f64>,
    pub merit: Option<f64>,
    pub merit_extended: Option<f64>,
    pub energy_change: Option<EnergyChange>,
    pub switch_count: usize,
    /// `ρ̇_est` variances in the early, late and extended late windows.
    pub early_variance_m2_s2: Option<f64>,
    pub late_variance_m2_s2: Option<f64>,
    pub late_extended_variance_m2_s2: Option<f64>,
}

impl TrajectorySummary {
    pub fn from_record(index: usize, record: &TrajectoryRecord, maps: &RadialMaps, spec: &CampaignSpec) -> Self {
        Self {
            index,
            termination: record.termination,
            trigger_time_s: record.trigger_time_s,
            dwell_s: record.dwell(),
            merit: figure_of_merit(record, &spec.merit_windows).ok(),
            merit_extended: figure_of_merit(record, &spec.extended_windows).ok(),
            energy_change: energy_accounting(record, maps, &spec.extended_windows).ok(),
            switch_count: record.events.len(),
            early_variance_m2_s2: window_variance(record, spec.merit_windows.early_s).ok(),
            late_variance_m2_s2: window_variance(record, spec.merit_windows.late_s).ok(),
            late_extended_variance_m2_s2: window_variance(record, spec.extended_windows.late_s).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanWithError {
    pub n: usize,
    pub mean: f64,
    pub standard_error: f64,
}

impl MeanWithError {
    pub fn of(xs: &[f64]) -> Self {
        Self { n: xs.len(), mean: stats::mean(xs), standard_error: stats::standard_error(xs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub name: String,
    pub n_drops: usize,
    pub n_triggered: usize,
    pub merit: MeanWithError,
    pub merit_extended: MeanWithError,
    pub dwell_s: MeanWithError,
    pub fractional_energy_change: MeanWithError,
    pub lifetime: LifetimeFit,
    pub merit_histogram: Histogram,
    pub merit_extended_histogram: Histogram,
    pub dwell_histogram: Histogram,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub trajectories: Vec<TrajectorySummary>,
    pub summary: CampaignSummary,
}

impl CampaignResult {
    pub fn merits(&self) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| t.merit).collect()
    }

    pub fn extended_merits(&self) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| t.merit_extended).collect()
    }
}

pub fn summarize(spec: &CampaignSpec, trajectories: &[TrajectorySummary]) -> CampaignSummary {
    let triggered: Vec<&TrajectorySummary> = trajectories.iter().filter(|t| t.trigger_time_s.is_some()).collect();
    let merits: Vec<f64> = trajectories.iter().filter_map(|t| t.merit).collect();
    let merits_ext: Vec<f64> = trajectories.iter().filter_map(|t| t.merit_extended).collect();
    let dwells: Vec<f64> = triggered.iter().filter_map(|t| t.dwell_s).collect();
    let energy: Vec<f64> = trajectories.iter().filter_map(|t| t.energy_change.map(|e| e.fractional)).collect();
    let censored: Vec<(f64, bool)> = triggered
        .iter()
        .filter_map(|t| t.dwell_s.map(|d| (d, t.termination == Termination::TMax)))
        .collect();
    CampaignSummary {
        name: spec.name.clone(),
        n_drops: spec.n_drops,
        n_triggered: triggered.len(),
        merit: MeanWithError::of(&merits),
        merit_extended: MeanWithError::of(&merits_ext),
        dwell_s: MeanWithError::of(&dwells),
        fractional_energy_change: MeanWithError::of(&energy),
        lifetime: exponential_lifetime(&censored, spec.lifetime_burn_in_s),
        merit_histogram: Histogram::log_spaced(0.1, 100.0, 16, &merits),
        merit_extended_histogram: Histogram::log_spaced(0.1, 100.0, 16, &merits_ext),
        dwell_histogram: Histogram::linear(0.0, spec.sim.t_max_s, 50, &dwells),
    }
}

/// Runs `spec.n_drops` seeded trajectories on a pool of `jobs` threads.
/// Results are ordered by trajectory index and independent of `jobs`.
pub fn run_campaign(spec: &CampaignSpec, maps: &RadialMaps, jobs: usize) -> Result<CampaignResult> {
    run_campaign_with(spec, maps, jobs, |_, _| {})
}

/// As [`run_campaign`], also handing every full record to `inspect`.
pub fn run_campaign_with<F>(spec: &CampaignSpec, maps: &RadialMaps, jobs: usize, inspect: F) -> Result<CampaignResult>
where
    F: Fn(usize, &TrajectoryRecord) + Sync,
{
    spec.sim.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let trajectories = pool.install(|| {
        (0..spec.n_drops)
            .into_par_iter()
            .map(|i| {
                let mut rng = trajectory_rng(spec.master_seed, i as u64);
                let record = run_trajectory(&spec.sim, maps, &spec.controller, &spec.measurement, &mut rng)?;
                inspect(i, &record);
                Ok(TrajectorySummary::from_record(i, &record, maps, spec))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(spec, &trajectories);
    Ok(CampaignResult { trajectories, summary })
}

/// Polar trajectory inferred from a radial record.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Magnitude of `L` inferred from turning-point pairs.
    pub angular_momentum: f64,
    pub t_s: Vec<f64>,
    pub rho_m: Vec<f64>,
    /// Angle from integrating `θ̇ = L / m ρ²`; the sense of rotation is not
    /// observable, so `θ` increases by convention.
    pub theta: Vec<f64>,
}

/// Infers `|L|` from consecutive radial turning points under the current
/// level's potential, `L² = 2m (U(ρ_max) - U(ρ_min)) / (1/ρ_min² - 1/ρ_max²)`,
/// then integrates the angle. A flat series is treated as a circular orbit.
/// Works on any radial series (true or estimated).
pub fn reconstruct_trajectory(
    maps: &RadialMaps,
    t_s: &[f64],
    rho_m: &[f64],
    levels: &[crate::params::DriveLevel],
) -> Result<Reconstruction> {
    let m = maps.params.mass_kg;
    let n = rho_m.len();
    let mut turning = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (a, b, c) = (rho_m[i - 1], rho_m[i], rho_m[i + 1]);
        if (b > a && b >= c) || (b < a && b <= c) {
            turning.push(i);
        }
    }
    let mut l2 = Vec::new();
    for w in turning.windows(2) {
        let (i, j) = (w[0], w[1]);
        if levels[i] != levels[j] {
            continue;
        }
        let (r1, r2) = (rho_m[i], rho_m[j]);
        let (rmin, rmax) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        if rmin <= 0.0 || rmax - rmin < 1e-3 * maps.params.waist_m {
            continue;
        }
        let du = maps.potential(levels[i], rmax) - maps.potential(levels[i], rmin);
        let val = 2.0 * m * du / (1.0 / (rmin * rmin) - 1.0 / (rmax * rmax));
        if val.is_finite() && val >= 0.0 {
            l2.push(val);
        }
    }
    if l2.is_empty() {
        // A circular orbit has no turning points; it sits where V_eff is
        // stationary, L² = m ρ³ |F(ρ)|.
        let (lo, hi) = rho_m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        let flat = n >= 2 && lo > 0.0 && hi - lo < 1e-3 * maps.params.waist_m && levels.iter().all(|&l| l == levels[0]);
        if !flat {
            return Err(Error::NoTurningPoints);
        }
        let r = stats::mean(rho_m);
        let f = maps.force(levels[0], r);
        if !(f < 0.0) {
            return Err(Error::NoTurningPoints);
        }
        l2.push(m * r.powi(3) * -f);
    }
    let l = stats::mean(&l2).sqrt();
    let mut theta = vec![0.0; n];
    for i in 1..n {
        let dt = t_s[i] - t_s[i - 1];
        let w = |r: f64| if r > 0.0 { l / (m * r * r) } else { 0.0 };
        theta[i] = theta[i - 1] + 0.5 * dt * (w(rho_m[i - 1]) + w(rho_m[i]));
    }
    Ok(Reconstruction { angular_momentum: l, t_s: t_s.to_vec(), rho_m: rho_m.to_vec(), theta })
}
