// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use cavfb::config::{Preset, RunConfig};
use cavfb::controllers::{ControllerConfig, Policy};
use cavfb::dynamics::{run_from, trajectory_rng, AtomState, MeasurementConfig, Sample, SimConfig, SimMode, Termination, TrajectoryRecord};
use cavfb::error::Error;
use cavfb::experiment::{
    energy_accounting, figure_of_merit, reconstruct_trajectory, run_campaign, summarize, MeritWindows, TrajectorySummary,
};
use cavfb::params::DriveLevel;
use cavfb::stats::{exponential_lifetime, Histogram};
use proptest::prelude::*;

const DT: f64 = 1e-6;

fn sample(t: f64, rho_dot_est: f64) -> Sample {
    Sample {
        t_s: t,
        rho_m: 0.0,
        rho_dot_m_s: 0.0,
        x_m: 0.0,
        y_m: 0.0,
        z_m: 0.0,
        angular_momentum: 0.0,
        level: DriveLevel::Hi,
        transmission: 0.0,
        noisy_transmission: 0.0,
        filtered_transmission: 0.0,
        rho_est_m: 0.0,
        rho_dot_est_m_s: rho_dot_est,
        rho_dot_smoothed_m_s: 0.0,
        kinetic_j: 0.0,
        reference_potential_j: 0.0,
        potential_j: 0.0,
    }
}

/// Record triggered at sample 0 with `ρ̇_est(t)` given, lasting `dwell`.
fn synthetic(dwell: f64, f: impl Fn(f64) -> f64) -> TrajectoryRecord {
    let n = (dwell / DT).round() as usize;
    TrajectoryRecord {
        mode: SimMode::AxialPinned,
        dt_info_s: DT,
        samples: (0..=n).map(|k| sample(k as f64 * DT, f(k as f64 * DT))).collect(),
        events: Vec::new(),
        termination: Termination::Escaped,
        trigger_time_s: Some(0.0),
        end_time_s: n as f64 * DT,
    }
}

#[test]
fn halving_the_late_amplitude_gives_four() {
    let w = MeritWindows::PRIMARY;
    let shape = |t: f64| (2.0 * PI * t / 50e-6).sin() + 0.3 * (2.0 * PI * t / 25e-6).cos();
    let r = synthetic(700e-6, |t| if t < 300e-6 { 0.2 * shape(t) } else { 0.1 * shape(t) });
    assert!((figure_of_merit(&r, &w).unwrap() - 4.0).abs() < 1e-9);
    let same = synthetic(700e-6, |t| 0.2 * shape(t));
    assert!((figure_of_merit(&same, &w).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn merit_needs_the_dwell() {
    let r = synthetic(600e-6, |t| t.sin());
    assert!(matches!(figure_of_merit(&r, &MeritWindows::PRIMARY), Err(Error::InsufficientDwell { .. })));
    let r = synthetic(615e-6, |t| (t * 1e5).sin());
    assert!(figure_of_merit(&r, &MeritWindows::PRIMARY).is_ok());
    assert!(figure_of_merit(&r, &MeritWindows::EXTENDED).is_err());
    let mut untriggered = r.clone();
    untriggered.trigger_time_s = None;
    assert!(figure_of_merit(&untriggered, &MeritWindows::PRIMARY).is_err());

    let config = RunConfig::preset(Preset::C1);
    let spec = config.campaign_spec(common::tables().noise.model);
    let s = TrajectorySummary::from_record(0, &r, common::maps(), &spec);
    assert!(s.merit.is_some() && s.merit_extended.is_none() && s.energy_change.is_none());
}

#[test]
fn empty_campaign_has_an_empty_summary() {
    let mut config = RunConfig::preset(Preset::C1);
    config.experiment.n_drops = 0;
    let spec = config.campaign_spec(common::tables().noise.model);
    let result = run_campaign(&spec, common::maps(), 2).unwrap();
    assert!(result.trajectories.is_empty());
    let s = &result.summary;
    assert_eq!((s.n_drops, s.n_triggered, s.merit.n, s.dwell_s.n), (0, 0, 0, 0));
    assert!(s.merit.mean.is_nan());
    assert_eq!(s.merit_histogram.counts.iter().sum::<u64>(), 0);
    assert_eq!(summarize(&spec, &[]).n_triggered, 0);
}

#[test]
fn merit_histogram_uses_sixteen_log_bins() {
    let h = Histogram::log_spaced(0.1, 100.0, 16, &[0.05, 0.1, 1.0, 99.0, 150.0]);
    assert_eq!(h.counts.len(), 16);
    assert_eq!(h.edges.len(), 17);
    assert!((h.edges[0] - 0.1).abs() < 1e-15 && (h.edges[16] - 100.0).abs() < 1e-12);
    let ratio = h.edges[1] / h.edges[0];
    for w in h.edges.windows(2) {
        assert!((w[1] / w[0] / ratio - 1.0).abs() < 1e-12);
    }
    assert_eq!((h.below, h.above, h.counts.iter().sum::<u64>()), (1, 1, 3));
}

#[test]
fn lifetime_fit_recovers_an_exponential() {
    use rand::Rng;
    let mut rng = trajectory_rng(9, 0);
    let tau = 2e-3;
    let burn = 200e-6;
    let t_max = 6e-3;
    let dwells: Vec<(f64, bool)> = (0..20_000)
        .map(|_| {
            let d = burn - tau * (1.0 - rng.random::<f64>()).ln();
            if d > t_max { (t_max, true) } else { (d, false) }
        })
        .collect();
    let fit = exponential_lifetime(&dwells, burn);
    assert!(fit.censored > 0);
    assert!((fit.lifetime_s - tau).abs() < 3.0 * fit.standard_error_s, "{} ± {}", fit.lifetime_s, fit.standard_error_s);
}

/// Pinned atom trapped at the hi level from t = 0 (constant policy).
fn constant_hi(seed: u64, clean: bool, t_max: f64) -> TrajectoryRecord {
    let maps = if clean { common::clean_maps() } else { common::maps() };
    let w0 = maps.params.waist_m;
    let m = maps.params.mass_kg;
    let mut config = SimConfig::axial_pinned(w0);
    config.gravity = false;
    config.t_max_s = t_max;
    let state = AtomState { t: 0.0, position: [0.0, 0.4 * w0, 0.0], momentum: [0.0, 0.0, 0.06 * m], level: DriveLevel::Hi };
    let controller = ControllerConfig {
        detect_level: DriveLevel::Hi,
        trap_on_level: DriveLevel::Hi,
        trigger_fraction: f64::NEG_INFINITY,
        trigger_window_s: 0.0,
        ..ControllerConfig::axial_pinned(Policy::Constant)
    };
    run_from(&config, maps, &controller, &MeasurementConfig::default(), state, &mut trajectory_rng(seed, 0)).unwrap()
}

#[test]
fn noise_free_constant_drive_conserves_energy() {
    let r = constant_hi(0, true, 1.3e-3);
    assert_eq!(r.termination, Termination::TMax);
    let e = energy_accounting(&r, common::clean_maps(), &MeritWindows::EXTENDED).unwrap();
    assert!(e.early_j > 0.0);
    assert!(e.fractional.abs() < 1e-4, "{}", e.fractional);
}

#[test]
fn diffusion_heats_at_constant_drive() {
    let maps = common::maps();
    let changes: Vec<f64> = (0..60)
        .filter_map(|s| energy_accounting(&constant_hi(s, false, 1.3e-3), maps, &MeritWindows::EXTENDED).ok())
        .map(|e| e.delta_j)
        .collect();
    assert!(changes.len() > 30);
    let mean = cavfb::stats::mean(&changes);
    let se = cavfb::stats::standard_error(&changes);
    assert!(mean > 3.0 * se, "ΔE = {mean} ± {se}");
}

#[test]
fn circular_orbit_reconstructs_exactly() {
    let maps = common::clean_maps();
    let m = maps.params.mass_kg;
    let rho = 0.45 * maps.params.waist_m;
    let l = (m * rho.powi(3) * maps.force(DriveLevel::Hi, rho).abs()).sqrt();
    let t: Vec<f64> = (0..500).map(|k| k as f64 * DT).collect();
    let rhos = vec![rho; t.len()];
    let levels = vec![DriveLevel::Hi; t.len()];
    let rec = reconstruct_trajectory(maps, &t, &rhos, &levels).unwrap();
    assert!((rec.angular_momentum / l - 1.0).abs() < 1e-12);
    let omega = l / (m * rho * rho);
    for (k, th) in rec.theta.iter().enumerate() {
        assert!((th - omega * t[k]).abs() < 1e-9 * (1.0 + omega * t[k]));
    }
}

/// Noise-free elliptical orbit; `mirror` flips the sense of rotation.
fn elliptical(mirror: bool) -> (TrajectoryRecord, f64) {
    let maps = common::clean_maps();
    let w0 = maps.params.waist_m;
    let m = maps.params.mass_kg;
    let mut config = SimConfig::axial_pinned(w0);
    config.gravity = false;
    config.t_max_s = 600e-6;
    let sign = if mirror { -1.0 } else { 1.0 };
    let state = AtomState { t: 0.0, position: [0.0, 0.0, 0.7 * w0], momentum: [0.0, sign * 0.05 * m, 0.0], level: DriveLevel::Hi };
    let l = state.angular_momentum();
    let controller = ControllerConfig {
        detect_level: DriveLevel::Hi,
        trap_on_level: DriveLevel::Hi,
        trigger_fraction: f64::NEG_INFINITY,
        trigger_window_s: 0.0,
        ..ControllerConfig::axial_pinned(Policy::Constant)
    };
    let r = run_from(&config, maps, &controller, &MeasurementConfig::default(), state, &mut trajectory_rng(0, 0)).unwrap();
    (r, l)
}

fn reconstruct(r: &TrajectoryRecord) -> cavfb::experiment::Reconstruction {
    let t: Vec<f64> = r.samples.iter().map(|s| s.t_s).collect();
    let rho: Vec<f64> = r.samples.iter().map(|s| s.rho_m).collect();
    let levels: Vec<DriveLevel> = r.samples.iter().map(|s| s.level).collect();
    reconstruct_trajectory(common::clean_maps(), &t, &rho, &levels).unwrap()
}

#[test]
fn elliptical_orbit_angular_momentum_within_two_percent() {
    let (r, l) = elliptical(false);
    let rec = reconstruct(&r);
    assert!((rec.angular_momentum / l.abs() - 1.0).abs() < 0.02, "{} vs {l}", rec.angular_momentum);
}

#[test]
fn handedness_is_not_observable() {
    let (a, la) = elliptical(false);
    let (b, lb) = elliptical(true);
    assert_eq!(la, -lb);
    assert_eq!(reconstruct(&a), reconstruct(&b));
}

#[test]
fn no_turning_points_is_an_error() {
    let maps = common::maps();
    let t: Vec<f64> = (0..100).map(|k| k as f64 * DT).collect();
    let rho: Vec<f64> = t.iter().map(|&x| 1e-6 + 0.05 * x).collect();
    let levels = vec![DriveLevel::Hi; t.len()];
    assert!(matches!(reconstruct_trajectory(maps, &t, &rho, &levels), Err(Error::NoTurningPoints)));
}

#[test]
fn campaigns_do_not_depend_on_the_pool_size() {
    let mut config = RunConfig::preset(Preset::PinnedClosed);
    config.experiment.n_drops = 12;
    config.experiment.sim.t_max_s = 2e-3;
    let spec = config.campaign_spec(common::tables().noise.model);
    let a = run_campaign(&spec, common::maps(), 1).unwrap();
    let b = run_campaign(&spec, common::maps(), 3).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(serde_json::to_string(&a.summary).unwrap(), serde_json::to_string(&b.summary).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merit_scales_with_amplitude_squared(a in 0.01f64..1.0, b in 0.01f64..1.0, period_us in 20.0f64..120.0) {
        let shape = |t: f64| (2.0 * PI * t / (period_us * 1e-6)).sin();
        let r = synthetic(650e-6, |t| if t < 300e-6 { a * shape(t) } else { b * shape(t) });
        let m = figure_of_merit(&r, &MeritWindows::PRIMARY).unwrap();
        let base = synthetic(650e-6, shape);
        let m0 = figure_of_merit(&base, &MeritWindows::PRIMARY).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert!((m / m0 / (a * a / (b * b)) - 1.0).abs() < 1e-9);
    }
}
