// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use cavfb::detection::{add_shot_noise, calibrate_noise, resolvable_amplitude, NoiseModel, NoiseScaling};
use cavfb::dynamics::trajectory_rng;
use cavfb::params::DriveLevel;
use cavfb::stats;
use proptest::prelude::*;

const DT: f64 = 1e-6;

#[test]
fn zero_gain_is_identity() {
    let mut rng = trajectory_rng(1, 1);
    let model = NoiseModel { gain: 0.0, floor: 0.3, scaling: NoiseScaling::SignalSqrt };
    for t in [0.0, 0.12, 1.7] {
        assert_eq!(add_shot_noise(&model, t, &mut rng), t);
    }
}

#[test]
fn output_variance_follows_the_model() {
    let model = NoiseModel { gain: 0.8, floor: 0.05, scaling: NoiseScaling::SignalSqrt };
    let mut rng = trajectory_rng(2, 0);
    let n = 100_000;
    let mut last = 0.0;
    for t in [0.0, 0.2, 0.6, 1.4] {
        let xs: Vec<f64> = (0..n).map(|_| add_shot_noise(&model, t, &mut rng)).collect();
        let var = stats::variance(&xs);
        let want = 0.64 * (t + 0.05);
        // Relative standard error of a sample variance is √(2/n) ≈ 0.45%.
        assert!((var / want - 1.0).abs() < 0.025, "T = {t}: {var} vs {want}");
        assert!((stats::mean(&xs) - t).abs() < 5.0 * (want / n as f64).sqrt());
        assert!(var > last);
        last = var;
    }
}

#[test]
fn noise_spectrum_is_white() {
    let model = NoiseModel { gain: 1.0, floor: 0.0, scaling: NoiseScaling::SignalSqrt };
    let mut rng = trajectory_rng(3, 0);
    let seg = 256;
    let segments = 128;
    let bins = seg / 2 + 1;
    let mut power = vec![0.0; bins];
    for _ in 0..segments {
        let x: Vec<f64> = (0..seg).map(|_| add_shot_noise(&model, 0.5, &mut rng) - 0.5).collect();
        for (k, p) in power.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ph = 2.0 * PI * (k * j) as f64 / seg as f64;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            *p += (re * re + im * im) / seg as f64;
        }
    }
    // Interior bins, 0 to 500 kHz in eight bands.
    let interior = &power[1..bins - 1];
    let overall = interior.iter().sum::<f64>() / interior.len() as f64;
    assert!((overall / (segments as f64 * 0.5) - 1.0).abs() < 0.05);
    for band in interior.chunks(interior.len() / 8) {
        let m = band.iter().sum::<f64>() / band.len() as f64;
        assert!((m / overall - 1.0).abs() < 0.1, "band {m} vs {overall}");
    }
}

#[test]
fn calibration_hits_the_target_sensitivity() {
    let tables = common::tables();
    let cal = &tables.noise;
    assert_eq!(cal.level, DriveLevel::Hi);
    assert!((cal.implied_sensitivity() / 20e-9 - 1.0).abs() < 1e-12);
    let measured = cal.measured_sensitivity(100_000, &mut trajectory_rng(4, 0));
    assert!((measured / 20e-9 - 1.0).abs() < 0.05, "{measured}");
}

#[test]
fn calibration_is_linear_in_the_target() {
    let maps = common::maps();
    let cal = |s| calibrate_noise(maps, DriveLevel::Hi, s, DT, 0.0, NoiseScaling::SignalSqrt).unwrap();
    assert_eq!(cal(0.0).model.gain, 0.0);
    let (a, b) = (cal(20e-9).model.gain, cal(40e-9).model.gain);
    assert!(a > 0.0);
    assert!((b / a - 2.0).abs() < 1e-12);
}

#[test]
fn resolvable_amplitude_is_sub_micron() {
    let tables = common::tables();
    let tau = tables.diffusion.measurement.orbital_period_s;
    let a = resolvable_amplitude(tables.noise.sensitivity_m_per_rthz, tau);
    assert!((a / 0.77e-6 - 1.0).abs() < 0.1, "{a}");
}

proptest! {
    #[test]
    fn sigma_grows_with_signal(gain in 0.01f64..5.0, floor in 0.0f64..1.0, t in 0.0f64..3.0, dt in 0.001f64..1.0) {
        for scaling in [NoiseScaling::SignalSqrt, NoiseScaling::Linear] {
            let m = NoiseModel { gain, floor, scaling };
            prop_assert!(m.sigma(t + dt) > m.sigma(t));
            prop_assert!(m.sigma(t) >= 0.0);
        }
    }
}
