// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Versioned run configuration and named presets.
//!
//! A [`RunConfig`] is everything needed to rebuild tables, calibrations and
//! campaigns. Unknown keys are rejected at every level. Any key can be
//! overridden by dotted path (`experiment.controller.trigger_fraction=0.5`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controllers::{ControllerConfig, FeedbackSignal, Policy};
use crate::detection::{NoiseModel, NoiseScaling};
use crate::dynamics::{MeasurementConfig, SimConfig};
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::experiment::{CampaignSpec, MeritWindows};
use crate::field_maps::{HeatingProbe, MapSettings};
use crate::params::{DriveLevel, SystemParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides `experiment.master_seed`.
pub const SEED_ENV: &str = "SIM_SEED";

/// Targets for the two calibrations run after the tables are built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    /// Heating per radial oscillation time as a fraction of the probe
    /// level's well depth.
    pub heating_fraction: f64,
    pub heating_probe: HeatingProbe,
    pub diffusion_projection: f64,
    /// Position sensitivity on the steep side of the mode, m/√Hz.
    pub sensitivity_m_per_rthz: f64,
    pub noise_level: DriveLevel,
    pub noise_floor: f64,
    pub noise_scaling: NoiseScaling,
}

impl CalibrationTargets {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            heating_fraction: 0.02,
            heating_probe: HeatingProbe::new(params),
            diffusion_projection: 1.0,
            sensitivity_m_per_rthz: 20e-9,
            noise_level: DriveLevel::Hi,
            noise_floor: 0.0,
            noise_scaling: NoiseScaling::SignalSqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub n_drops: usize,
    pub master_seed: u64,
    /// Apply the calibrated shot noise to the transmission record.
    pub measurement_noise: bool,
    pub sim: SimConfig,
    pub controller: ControllerConfig,
    pub estimator: EstimatorConfig,
    pub merit_windows: MeritWindows,
    pub extended_windows: MeritWindows,
    pub lifetime_burn_in_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemParams,
    pub maps: MapSettings,
    pub calibration: CalibrationTargets,
    pub experiment: ExperimentConfig,
}

/// Named starting points: the Table I data sets, the axially pinned arms
/// and the two single-policy studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    C1,
    C2,
    O1,
    O2,
    O3,
    O4,
    /// Full 3D, constant hi after the trigger.
    ConstantHi,
    /// Noiseless hysteresis on the box-filtered true `ρ̇`.
    NoiselessHysteresis,
    /// Hysteresis applied directly to the noisy estimate.
    DelayedHysteresis,
    PinnedClosed,
    PinnedOpen,
    PinnedExhi,
    PinnedHi,
}

impl Preset {
    pub const ALL: [Preset; 13] = [
        Preset::C1,
        Preset::C2,
        Preset::O1,
        Preset::O2,
        Preset::O3,
        Preset::O4,
        Preset::ConstantHi,
        Preset::NoiselessHysteresis,
        Preset::DelayedHysteresis,
        Preset::PinnedClosed,
        Preset::PinnedOpen,
        Preset::PinnedExhi,
        Preset::PinnedHi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::C1 => "c1",
            Preset::C2 => "c2",
            Preset::O1 => "o1",
            Preset::O2 => "o2",
            Preset::O3 => "o3",
            Preset::O4 => "o4",
            Preset::ConstantHi => "constant-hi",
            Preset::NoiselessHysteresis => "noiseless-hysteresis",
            Preset::DelayedHysteresis => "delayed-hysteresis",
            Preset::PinnedClosed => "pinned-closed",
            Preset::PinnedOpen => "pinned-open",
            Preset::PinnedExhi => "pinned-exhi",
            Preset::PinnedHi => "pinned-hi",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::C1)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let system = SystemParams::default();
        let w0 = system.waist_m;
        let full = |policy, n_drops, interval: f64| {
            let mut c = ControllerConfig::full3d(policy);
            c.open_loop_interval_s = interval;
            (SimConfig::full3d(w0), c, n_drops)
        };
        let pinned = |policy, on: DriveLevel| {
            let mut c = ControllerConfig::axial_pinned(policy);
            c.trap_on_level = on;
            (SimConfig::axial_pinned(w0), c, 1000)
        };
        let (sim, mut controller, n_drops) = match preset {
            Preset::C1 => full(Policy::CycleDelay, 2000, 45e-6),
            Preset::C2 => full(Policy::CycleDelay, 5000, 45e-6),
            Preset::O1 => full(Policy::OpenLoop, 2000, 45e-6),
            Preset::O2 => full(Policy::OpenLoop, 5000, 45e-6),
            Preset::O3 => full(Policy::OpenLoop, 2000, 35e-6),
            Preset::O4 => full(Policy::OpenLoop, 5000, 35e-6),
            Preset::ConstantHi => full(Policy::Constant, 2000, 45e-6),
            Preset::NoiselessHysteresis | Preset::DelayedHysteresis => full(Policy::HysteresisDirect, 2000, 45e-6),
            Preset::PinnedClosed => pinned(Policy::CycleDelay, DriveLevel::ExHi),
            Preset::PinnedOpen => pinned(Policy::OpenLoop, DriveLevel::ExHi),
            Preset::PinnedExhi => pinned(Policy::Constant, DriveLevel::ExHi),
            Preset::PinnedHi => pinned(Policy::Constant, DriveLevel::Hi),
        };
        let measurement_noise = preset != Preset::NoiselessHysteresis;
        if preset == Preset::NoiselessHysteresis {
            controller.signal = FeedbackSignal::Smoothed;
        }
        Self {
            schema_version: SCHEMA_VERSION,
            calibration: CalibrationTargets::new(&system),
            system,
            maps: MapSettings::default(),
            experiment: ExperimentConfig {
                name: preset.name().to_string(),
                n_drops,
                master_seed: 1,
                measurement_noise,
                sim,
                controller,
                estimator: EstimatorConfig::default(),
                merit_windows: MeritWindows::PRIMARY,
                extended_windows: MeritWindows::EXTENDED,
                lifetime_burn_in_s: 200e-6,
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        match value.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Config(format!("schema_version {v} is not supported (expected {SCHEMA_VERSION})"))),
            None => return Err(Error::Config("missing schema_version".into())),
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        // Plain data with string keys; serialization cannot fail.
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// Overrides one key by dotted path. The value is parsed as JSON when
    /// possible and otherwise taken as a string, so `policy=open_loop` and
    /// `n_drops=10` both work.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<()> {
        let mut root = serde_json::to_value(&*self)?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| Error::Config(format!("unknown config key `{path}`")))?;
        }
        *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        *self = Self::from_value(root)?;
        Ok(())
    }

    /// Applies `SIM_SEED` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.experiment.master_seed =
                s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.experiment.sim.validate()?;
        let c = &self.experiment.controller;
        if !(c.limit_m_s > 0.0) || !(c.delta_m_s >= 0.0) {
            return Err(Error::Config("hysteresis needs lim > 0 and delta >= 0".into()));
        }
        let cal = &self.calibration;
        if !(cal.heating_fraction > 0.0) || !(cal.sensitivity_m_per_rthz >= 0.0) || cal.noise_floor < 0.0 {
            return Err(Error::Config("calibration targets must be non-negative".into()));
        }
        let e = &self.experiment.estimator;
        let dt = self.experiment.sim.dt_info_s;
        for (name, w) in [("fir_window_s", e.fir_window_s), ("box_window_s", e.box_window_s)] {
            let k = w / dt;
            if !(k >= 1.0) || (k - k.round()).abs() > 1e-6 {
                return Err(Error::Config(format!("estimator {name} must be a positive multiple of dt_info")));
            }
        }
        Ok(())
    }

    /// Fingerprint of everything the tables and calibrations depend on.
    pub fn tables_fingerprint(&self) -> String {
        let key = serde_json::json!({
            "schema_version": self.schema_version,
            "system": self.system,
            "maps": self.maps,
            "calibration": self.calibration,
        });
        format!("{:016x}", fnv1a(key.to_string().as_bytes()))
    }

    /// The campaign this configuration describes, with the calibrated noise
    /// model switched in or out.
    pub fn campaign_spec(&self, calibrated_noise: NoiseModel) -> CampaignSpec {
        let e = &self.experiment;
        CampaignSpec {
            name: e.name.clone(),
            n_drops: e.n_drops,
            master_seed: e.master_seed,
            sim: e.sim,
            controller: e.controller,
            measurement: MeasurementConfig {
                noise: if e.measurement_noise { calibrated_noise } else { NoiseModel::noiseless() },
                estimator: e.estimator,
            },
            merit_windows: e.merit_windows,
            extended_windows: e.extended_windows,
            lifetime_burn_in_s: e.lifetime_burn_in_s,
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
