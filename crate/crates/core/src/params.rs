// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical constants and cavity/atom parameters.
//!
//! Everything is SI internally. Rates and detunings are angular (rad/s).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const KB: f64 = 1.380_649e-23;
pub const STANDARD_GRAVITY: f64 = 9.806_65;
/// 133Cs atomic mass.
pub const CESIUM_MASS_KG: f64 = 2.206_946_50e-25;

const TWO_PI_MHZ: f64 = 2.0 * PI * 1e6;

/// Named probe strengths, in increasing order of drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveLevel {
    ExLo,
    Lo,
    Hi,
    ExHi,
}

impl DriveLevel {
    pub const ALL: [DriveLevel; 4] = [DriveLevel::ExLo, DriveLevel::Lo, DriveLevel::Hi, DriveLevel::ExHi];

    pub fn name(self) -> &'static str {
        match self {
            DriveLevel::ExLo => "exlo",
            DriveLevel::Lo => "lo",
            DriveLevel::Hi => "hi",
            DriveLevel::ExHi => "exhi",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DriveLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DriveLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exlo" => Ok(DriveLevel::ExLo),
            "lo" => Ok(DriveLevel::Lo),
            "hi" => Ok(DriveLevel::Hi),
            "exhi" => Ok(DriveLevel::ExHi),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

/// Empty-cavity mean photon number for each drive level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveLevels {
    pub exlo: f64,
    pub lo: f64,
    pub hi: f64,
    pub exhi: f64,
}

impl DriveLevels {
    pub fn get(&self, level: DriveLevel) -> f64 {
        match level {
            DriveLevel::ExLo => self.exlo,
            DriveLevel::Lo => self.lo,
            DriveLevel::Hi => self.hi,
            DriveLevel::ExHi => self.exhi,
        }
    }
}

impl Default for DriveLevels {
    fn default() -> Self {
        Self { exlo: 0.05, lo: 0.15, hi: 0.3, exhi: 0.6 }
    }
}

/// How a drive level's photon number maps to the drive amplitude `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveNormalization {
    /// `ε² = n (κ² + Δcp²)`: `n` is the empty-cavity photon number at the
    /// actual probe detuning.
    Detuned,
    /// `ε = κ √n`: `n` is the photon number of an empty cavity driven on
    /// resonance.
    Resonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Peak atom-cavity coupling.
    pub g0_rad_s: f64,
    /// Cavity field decay rate.
    pub kappa_rad_s: f64,
    /// Atomic dipole decay rate.
    pub gamma_rad_s: f64,
    /// Cavity minus probe frequency.
    pub delta_cp_rad_s: f64,
    /// Atom minus probe frequency.
    pub delta_ap_rad_s: f64,
    pub wavelength_m: f64,
    /// Gaussian mode waist.
    pub waist_m: f64,
    pub mass_kg: f64,
    pub drive_levels: DriveLevels,
    pub drive_normalization: DriveNormalization,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g0_rad_s: 110.0 * TWO_PI_MHZ,
            kappa_rad_s: 14.2 * TWO_PI_MHZ,
            gamma_rad_s: 2.6 * TWO_PI_MHZ,
            delta_cp_rad_s: 78.0 * TWO_PI_MHZ,
            delta_ap_rad_s: 125.0 * TWO_PI_MHZ,
            wavelength_m: 852.35e-9,
            waist_m: 14e-6,
            mass_kg: CESIUM_MASS_KG,
            drive_levels: DriveLevels::default(),
            drive_normalization: DriveNormalization::Detuned,
        }
    }
}

impl SystemParams {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    /// Drive amplitude `ε` (rad/s) for a target photon number.
    pub fn drive_amplitude(&self, photons: f64) -> f64 {
        let n = photons.max(0.0);
        match self.drive_normalization {
            DriveNormalization::Detuned => {
                (n * (self.kappa_rad_s.powi(2) + self.delta_cp_rad_s.powi(2))).sqrt()
            }
            DriveNormalization::Resonant => self.kappa_rad_s * n.sqrt(),
        }
    }

    pub fn level_drive(&self, level: DriveLevel) -> f64 {
        self.drive_amplitude(self.drive_levels.get(level))
    }

    /// Position-dependent coupling `g(x, ρ) = g0 cos(kx) exp(-ρ²/w0²)`.
    pub fn coupling(&self, x: f64, rho: f64) -> f64 {
        self.g0_rad_s * (self.wavenumber() * x).cos() * self.radial_envelope(rho)
    }

    pub fn radial_envelope(&self, rho: f64) -> f64 {
        (-(rho * rho) / (self.waist_m * self.waist_m)).exp()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g0_rad_s", self.g0_rad_s),
            ("kappa_rad_s", self.kappa_rad_s),
            ("gamma_rad_s", self.gamma_rad_s),
            ("wavelength_m", self.wavelength_m),
            ("waist_m", self.waist_m),
            ("mass_kg", self.mass_kg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for level in DriveLevel::ALL {
            let n = self.drive_levels.get(level);
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::Config(format!("drive level {level} must be non-negative, got {n}")));
            }
        }
        Ok(())
    }
}
