// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Shot-noise model for the sampled heterodyne transmission record.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_maps::{RadialMaps, SteepestPoint};
use crate::params::DriveLevel;

/// Position sensitivity of the transmission measurement, m/√Hz.
pub const DEFAULT_SENSITIVITY: f64 = 20e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// `σ_T = gain · √(T + floor)`, the heterodyne amplitude-noise law.
    SignalSqrt,
    /// `σ_T = gain · (T + floor)`.
    Linear,
}

/// Gaussian white noise added to each information-rate sample of `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub gain: f64,
    pub floor: f64,
    pub scaling: NoiseScaling,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { gain: 0.0, floor: 0.0, scaling: NoiseScaling::SignalSqrt }
    }

    pub fn sigma(&self, t: f64) -> f64 {
        let base = (t + self.floor).max(0.0);
        match self.scaling {
            NoiseScaling::SignalSqrt => self.gain * base.sqrt(),
            NoiseScaling::Linear => self.gain * base,
        }
    }
}

/// One noisy sample of a noiseless transmission value.
pub fn add_shot_noise<R: Rng + ?Sized>(model: &NoiseModel, t: f64, rng: &mut R) -> f64 {
    if model.gain == 0.0 {
        return t;
    }
    let xi: f64 = rng.sample(StandardNormal);
    t + model.sigma(t) * xi
}

/// Sensitivity `S` (m/√Hz) implied by per-sample position noise `σ_ρ` at
/// sample interval `dt`, using the one-sided spectral density of white
/// noise sampled at `1/dt`: `S = σ_ρ √(2 dt)`.
pub fn sensitivity_from_sigma(sigma_rho: f64, dt: f64) -> f64 {
    sigma_rho * (2.0 * dt).sqrt()
}

/// Smallest radial oscillation amplitude resolvable over one motional period
/// `tau`: `S √(1 / 2πτ)`.
pub fn resolvable_amplitude(sensitivity: f64, tau: f64) -> f64 {
    sensitivity * (1.0 / (2.0 * std::f64::consts::PI * tau)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub model: NoiseModel,
    pub level: DriveLevel,
    pub steepest: SteepestPoint,
    pub dt_info_s: f64,
    pub sensitivity_m_per_rthz: f64,
}

impl NoiseCalibration {
    /// Sensitivity implied analytically by the calibrated model.
    pub fn implied_sensitivity(&self) -> f64 {
        let sigma_rho = self.model.sigma(self.steepest.transmission) / self.steepest.slope_per_m;
        sensitivity_from_sigma(sigma_rho, self.dt_info_s)
    }

    /// Sensitivity estimated from `n` synthetic samples at the steepest point.
    pub fn measured_sensitivity<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> f64 {
        let t0 = self.steepest.transmission;
        let mut acc = 0.0;
        for _ in 0..n {
            let d = add_shot_noise(&self.model, t0, rng) - t0;
            acc += d * d;
        }
        let sigma_rho = (acc / n as f64).sqrt() / self.steepest.slope_per_m;
        sensitivity_from_sigma(sigma_rho, self.dt_info_s)
    }
}

/// Chooses the noise gain so the position sensitivity at the steepest point
/// of `level`'s transmission branch equals `target` (m/√Hz).
pub fn calibrate_noise(
    maps: &RadialMaps,
    level: DriveLevel,
    target: f64,
    dt_info: f64,
    floor: f64,
    scaling: NoiseScaling,
) -> Result<NoiseCalibration> {
    let steepest = maps.steepest_point(level);
    if !(steepest.slope_per_m > 0.0) {
        return Err(Error::DegenerateSlope);
    }
    let unit = NoiseModel { gain: 1.0, floor, scaling };
    let unit_sigma = unit.sigma(steepest.transmission);
    if !(unit_sigma > 0.0) {
        return Err(Error::DegenerateSlope);
    }
    let sigma_rho = target / (2.0 * dt_info).sqrt();
    let gain = sigma_rho * steepest.slope_per_m / unit_sigma;
    Ok(NoiseCalibration {
        model: NoiseModel { gain, floor, scaling },
        level,
        steepest,
        dt_info_s: dt_info,
        sensitivity_m_per_rthz: target,
    })
}
