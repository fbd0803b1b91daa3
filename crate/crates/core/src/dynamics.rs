// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Quasiclassical atom trajectories through the cavity mode.
//!
//! Coordinates: the cavity axis is `x`, gravity points along `-z`, and the
//! radial coordinate is `ρ = √(y² + z²)` with `θ = atan2(-z, y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControlEvent, ControlInputs, Controller, ControllerConfig};
use crate::detection::{add_shot_noise, NoiseModel};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorChain, EstimatorConfig};
use crate::field_maps::RadialMaps;
use crate::params::{DriveLevel, HBAR, KB, STANDARD_GRAVITY};

pub type SimRng = ChaCha8Rng;

/// Independent stream `index` of the generator seeded by `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Standing wave times Gaussian, all three coordinates evolve.
    Full3d,
    /// Atom held at an antinode; only `(y, z)` evolve.
    AxialPinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    /// Fall height from the MOT; sets the mean downward speed `√(2 g h)`.
    pub drop_height_m: f64,
    pub temperature_k: f64,
    /// Starting height above the cavity axis.
    pub start_height_m: f64,
    /// Full width of the uniform transverse (`y`) entry window.
    pub entry_width_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: SimMode,
    pub dt_info_s: f64,
    /// Dynamics steps per information step.
    pub substeps: u32,
    pub t_max_s: f64,
    pub seed: u64,
    pub gravity: bool,
    /// Axial momentum diffusion relative to the radial value (full3d only).
    pub axial_diffusion_factor: f64,
    /// Linear friction rate `β`, 1/s.
    pub friction_per_s: f64,
    /// Post-trigger escape radius.
    pub escape_radius_m: f64,
    /// Consecutive information samples with positive energy that count as
    /// escape.
    pub unbound_samples: u32,
    pub initial: InitialConditions,
}

impl SimConfig {
    pub fn full3d(waist_m: f64) -> Self {
        Self {
            mode: SimMode::Full3d,
            dt_info_s: 1e-6,
            substeps: 3000,
            t_max_s: 10e-3,
            seed: 1,
            gravity: true,
            axial_diffusion_factor: 8.0,
            friction_per_s: 0.0,
            escape_radius_m: 2.5 * waist_m,
            unbound_samples: 10,
            initial: InitialConditions {
                drop_height_m: 2e-3,
                temperature_k: 10e-6,
                start_height_m: 2.5 * waist_m,
                entry_width_m: 5.4 * waist_m,
            },
        }
    }

    pub fn axial_pinned(waist_m: f64) -> Self {
        Self { mode: SimMode::AxialPinned, substeps: 30, t_max_s: 60e-3, ..Self::full3d(waist_m) }
    }

    pub fn dt_dynamics(&self) -> f64 {
        self.dt_info_s / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_info_s > 0.0) || self.substeps == 0 || !(self.t_max_s > 0.0) {
            return Err(Error::Config("time steps and t_max must be positive".into()));
        }
        if !(self.escape_radius_m > 0.0) || self.initial.entry_width_m < 0.0 || self.initial.temperature_k < 0.0 {
            return Err(Error::Config("escape radius, entry width and temperature must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState {
    pub t: f64,
    pub position: [f64; 3],
    pub momentum: [f64; 3],
    pub level: DriveLevel,
}

impl AtomState {
    pub fn rho(&self) -> f64 {
        self.position[1].hypot(self.position[2])
    }

    pub fn theta(&self) -> f64 {
        (-self.position[2]).atan2(self.position[1])
    }

    /// `L = y p_z - z p_y`.
    pub fn angular_momentum(&self) -> f64 {
        self.position[1] * self.momentum[2] - self.position[2] * self.momentum[1]
    }

    pub fn rho_dot(&self, mass: f64) -> f64 {
        let r = self.rho();
        if r == 0.0 {
            return self.momentum[1].hypot(self.momentum[2]) / mass;
        }
        (self.position[1] * self.momentum[1] + self.position[2] * self.momentum[2]) / (mass * r)
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        self.momentum.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass)
    }

    /// Reduced radius `ρ / w`, drive parameter `2 U0 / m w²` and reduced
    /// angular momentum `L² / m² w⁴` for a Gaussian well of waist `w`.
    pub fn reduced(&self, mass: f64, depth_j: f64, w: f64) -> (f64, f64, f64) {
        let l = self.angular_momentum();
        (self.rho() / w, 2.0 * depth_j / (mass * w * w), l * l / (mass * mass * w.powi(4)))
    }
}

/// Free-fall speed plus thermal spread; entry `y` uniform over the window,
/// `x` uniform over one wavelength (pinned at the antinode in 2D mode).
pub fn sample_initial<R: Rng + ?Sized>(config: &SimConfig, maps: &RadialMaps, rng: &mut R) -> AtomState {
    let p = &maps.params;
    let ic = &config.initial;
    let sigma_v = (KB * ic.temperature_k / p.mass_kg).sqrt();
    let mut v = [0.0; 3];
    for c in &mut v {
        let xi: f64 = rng.sample(StandardNormal);
        *c = sigma_v * xi;
    }
    v[2] -= (2.0 * STANDARD_GRAVITY * ic.drop_height_m).sqrt();
    let y = (rng.random::<f64>() - 0.5) * ic.entry_width_m;
    let mut x = rng.random::<f64>() * p.wavelength_m;
    if config.mode == SimMode::AxialPinned {
        x = 0.0;
        v[0] = 0.0;
    }
    AtomState {
        t: 0.0,
        position: [x, y, ic.start_height_m],
        momentum: v.map(|c| c * p.mass_kg),
        level: DriveLevel::ExLo,
    }
}

/// Deterministic force and the scattering-dependent diffusion at a point.
#[derive(Debug, Clone, Copy)]
struct LocalField {
    force: [f64; 3],
    diffusion: f64,
}

/// Leapfrog integrator with post-step momentum kicks.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    maps: &'a RadialMaps,
    mode: SimMode,
    dt: f64,
    gravity: bool,
    axial_factor: f64,
    friction: f64,
    cached: Option<LocalField>,
    cached_level: DriveLevel,
    /// `Σ p·δp / m` over all stochastic kicks; zero-mean part of the energy
    /// change, tracked for variance reduction.
    pub kick_work: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(maps: &'a RadialMaps, config: &SimConfig) -> Self {
        Self {
            maps,
            mode: config.mode,
            dt: config.dt_dynamics(),
            gravity: config.gravity,
            axial_factor: config.axial_diffusion_factor,
            friction: config.friction_per_s,
            cached: None,
            cached_level: DriveLevel::ExLo,
            kick_work: 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn field(&self, level: DriveLevel, pos: &[f64; 3]) -> LocalField {
        let maps = self.maps;
        let p = &maps.params;
        let mg = if self.gravity { p.mass_kg * STANDARD_GRAVITY } else { 0.0 };
        let (y, z) = (pos[1], pos[2]);
        match self.mode {
            SimMode::AxialPinned => {
                let r = y.hypot(z);
                let f = maps.force(level, r);
                let (fy, fz) = if r > 0.0 { (f * y / r, f * z / r) } else { (0.0, 0.0) };
                LocalField { force: [0.0, fy, fz - mg], diffusion: maps.diffusion(level, r) }
            }
            SimMode::Full3d => {
                let w2 = p.waist_m * p.waist_m;
                let k = p.wavenumber();
                let (s, c) = (k * pos[0]).sin_cos();
                let env = (-(y * y + z * z) / w2).exp();
                let g_abs = p.g0_rad_s * c.abs() * env;
                let corr = maps.dipole_at_coupling(level, g_abs);
                // F = -ħ C ∇|g|
                let fx = HBAR * corr * k * p.g0_rad_s * env * s * c.signum();
                let radial = HBAR * corr * 2.0 * g_abs / w2;
                LocalField {
                    force: [fx, radial * y, radial * z - mg],
                    diffusion: maps.diffusion_at_coupling(level, g_abs),
                }
            }
        }
    }

    /// Potential energy at the current level (gravity excluded).
    pub fn potential(&self, level: DriveLevel, pos: &[f64; 3]) -> f64 {
        let maps = self.maps;
        match self.mode {
            SimMode::AxialPinned => maps.potential(level, pos[1].hypot(pos[2])),
            SimMode::Full3d => {
                let g = maps.params.coupling(pos[0], pos[1].hypot(pos[2])).abs();
                maps.potential_at_coupling(level, g)
            }
        }
    }

    /// Noiseless transmission `|⟨a⟩|²` at the current position.
    pub fn transmission(&self, level: DriveLevel, pos: &[f64; 3]) -> f64 {
        match self.mode {
            SimMode::AxialPinned => self.maps.transmission_radial(level, pos[1].hypot(pos[2])),
            SimMode::Full3d => self.maps.transmission(level, pos[0], pos[1].hypot(pos[2])),
        }
    }

    pub fn energy(&self, state: &AtomState) -> f64 {
        state.kinetic_energy(self.maps.params.mass_kg) + self.potential(state.level, &state.position)
    }

    /// Advances `state` by one dynamics step.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut AtomState, rng: &mut R) {
        let m = self.maps.params.mass_kg;
        let dt = self.dt;
        let here = match self.cached {
            Some(f) if self.cached_level == state.level => f,
            _ => self.field(state.level, &state.position),
        };
        let tracked = match self.mode {
            SimMode::Full3d => 0..3,
            SimMode::AxialPinned => 1..3,
        };
        for i in tracked.clone() {
            state.momentum[i] += 0.5 * dt * here.force[i];
            state.position[i] += dt * state.momentum[i] / m;
        }
        let there = self.field(state.level, &state.position);
        for i in tracked.clone() {
            state.momentum[i] += 0.5 * dt * there.force[i];
        }
        if there.diffusion > 0.0 {
            let base = (2.0 * there.diffusion * dt).sqrt();
            for i in tracked {
                let scale = if i == 0 { base * self.axial_factor.sqrt() } else { base };
                let xi: f64 = rng.sample(StandardNormal);
                let kick = scale * xi;
                self.kick_work += state.momentum[i] * kick / m;
                state.momentum[i] += kick;
            }
        }
        if self.friction > 0.0 {
            let damp = 1.0 - self.friction * dt;
            for p in &mut state.momentum {
                *p *= damp;
            }
        }
        state.t += dt;
        self.cached = Some(there);
        self.cached_level = state.level;
    }
}

/// One information-rate sample of truth, record and estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_s: f64,
    pub rho_m: f64,
    pub rho_dot_m_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    /// `L`, kg·m²/s.
    pub angular_momentum: f64,
    pub level: DriveLevel,
    pub transmission: f64,
    pub noisy_transmission: f64,
    pub filtered_transmission: f64,
    pub rho_est_m: f64,
    pub rho_dot_est_m_s: f64,
    pub rho_dot_smoothed_m_s: f64,
    pub kinetic_j: f64,
    /// Potential at the current position evaluated on the reference (hi)
    /// map, so switching does not redefine the energy.
    pub reference_potential_j: f64,
    /// Potential at the current level.
    pub potential_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Escaped,
    TMax,
    NeverTriggered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub mode: SimMode,
    pub dt_info_s: f64,
    pub samples: Vec<Sample>,
    pub events: Vec<ControlEvent>,
    pub termination: Termination,
    pub trigger_time_s: Option<f64>,
    /// Escape time, or the end of the run.
    pub end_time_s: f64,
}

impl TrajectoryRecord {
    /// Trigger-to-escape time; `None` if never triggered. Censored at the
    /// end of the run for [`Termination::TMax`].
    pub fn dwell(&self) -> Option<f64> {
        self.trigger_time_s.map(|t| self.end_time_s - t)
    }

    /// Index of the sample at the trigger.
    pub fn trigger_index(&self) -> Option<usize> {
        let t = self.trigger_time_s?;
        Some((t / self.dt_info_s).round() as usize)
    }
}

/// Measurement chain settings used by a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub noise: NoiseModel,
    pub estimator: EstimatorConfig,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self { noise: NoiseModel::noiseless(), estimator: EstimatorConfig::default() }
    }
}

/// Drops one atom and runs the full sense-estimate-control loop.
pub fn run_trajectory<R: Rng + ?Sized>(
    config: &SimConfig,
    maps: &RadialMaps,
    controller: &ControllerConfig,
    measurement: &MeasurementConfig,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let state = sample_initial(config, maps, rng);
    run_from(config, maps, controller, measurement, state, rng)
}

/// Like [`run_trajectory`] but from a given initial state.
pub fn run_from<R: Rng + ?Sized>(
    config: &SimConfig,
    maps: &RadialMaps,
    controller: &ControllerConfig,
    measurement: &MeasurementConfig,
    mut state: AtomState,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    let dt_info = config.dt_info_s;
    let mass = maps.params.mass_kg;
    let mut integrator = Integrator::new(maps, config);
    let mut ctl = Controller::new(*controller, controller.trigger_threshold(maps), dt_info);
    let mut chain = EstimatorChain::new(&measurement.estimator, dt_info);
    state.level = ctl.level();
    let max_samples = (config.t_max_s / dt_info).round() as usize;
    let mut samples = Vec::new();
    let mut events = Vec::new();
    let mut unbound_run = 0u32;
    let mut termination = Termination::TMax;
    let mut end_time = max_samples as f64 * dt_info;

    for k in 0..=max_samples {
        let t = k as f64 * dt_info;
        state.t = t;
        let pos = state.position;
        let rho = state.rho();
        let rho_dot = state.rho_dot(mass);
        let transmission = integrator.transmission(state.level, &pos);
        let noisy = add_shot_noise(&measurement.noise, transmission, rng);
        let est = chain.step(maps, state.level, noisy, rho_dot);
        let kinetic = state.kinetic_energy(mass);
        let potential = integrator.potential(state.level, &pos);
        samples.push(Sample {
            t_s: t,
            rho_m: rho,
            rho_dot_m_s: rho_dot,
            x_m: pos[0],
            y_m: pos[1],
            z_m: pos[2],
            angular_momentum: state.angular_momentum(),
            level: state.level,
            transmission,
            noisy_transmission: noisy,
            filtered_transmission: est.filtered_transmission,
            rho_est_m: est.rho_est,
            rho_dot_est_m_s: est.rho_dot_est,
            rho_dot_smoothed_m_s: est.rho_dot_smoothed,
            kinetic_j: kinetic,
            reference_potential_j: integrator.potential(DriveLevel::Hi, &pos),
            potential_j: potential,
        });

        let was_triggered = ctl.trigger_time().is_some();
        if was_triggered {
            if rho > config.escape_radius_m && rho_dot > 0.0 {
                termination = Termination::Escaped;
                end_time = t;
                break;
            }
            if kinetic + potential > 0.0 {
                unbound_run += 1;
                if unbound_run >= config.unbound_samples {
                    termination = Termination::Escaped;
                    end_time = t - (config.unbound_samples - 1) as f64 * dt_info;
                    break;
                }
            } else {
                unbound_run = 0;
            }
        } else if pos[2] < -config.initial.start_height_m || k == max_samples {
            termination = Termination::NeverTriggered;
            end_time = t;
            break;
        }
        if k == max_samples {
            break;
        }

        let inputs = ControlInputs {
            t_s: t,
            filtered_transmission: est.filtered_transmission,
            rho_dot_est: est.rho_dot_est,
            rho_dot_smoothed: est.rho_dot_smoothed,
        };
        if let Some(ev) = ctl.step(&inputs) {
            state.level = ev.to;
            events.push(ev);
        }
        for _ in 0..config.substeps {
            integrator.step(&mut state, rng);
        }
    }

    Ok(TrajectoryRecord {
        mode: config.mode,
        dt_info_s: dt_info,
        samples,
        events,
        termination,
        trigger_time_s: ctl.trigger_time(),
        end_time_s: end_time,
    })
}

/// Radial orbit at fixed angular momentum with its quadrature period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodPoint {
    pub rho_min_m: f64,
    pub rho_max_m: f64,
    pub energy_j: f64,
    /// Period of `ρ(t)` between successive outer turning points.
    pub period_s: f64,
}

impl PeriodPoint {
    /// Peak-to-peak radial excursion; equals `ρ_max` for `L = 0`.
    pub fn amplitude(&self) -> f64 {
        self.rho_max_m - self.rho_min_m
    }
}

fn effective_potential(maps: &RadialMaps, level: DriveLevel, l: f64, rho: f64) -> f64 {
    let m = maps.params.mass_kg;
    let centrifugal = if l == 0.0 { 0.0 } else { l * l / (2.0 * m * rho * rho) };
    maps.potential(level, rho) + centrifugal
}

/// Period of the `ρ` oscillation with outer turning point `rho_max` at
/// angular momentum `l`, by quadrature of `dt = dρ / √((2/m)(E - V_eff))`.
pub fn radial_period(maps: &RadialMaps, level: DriveLevel, l: f64, rho_max: f64) -> Result<PeriodPoint> {
    let m = maps.params.mass_kg;
    let e = effective_potential(maps, level, l, rho_max);
    if !(e < 0.0) || rho_max >= maps.rho_max() {
        return Err(Error::Unbound { energy_j: e });
    }
    let rho_min = if l == 0.0 {
        0.0
    } else {
        // Inner turning point: bisection on V_eff(ρ) = E below rho_max.
        let (mut a, mut b) = (1e-3 * maps.rho_step_m, rho_max);
        if effective_potential(maps, level, l, a) <= e {
            return Err(Error::Unbound { energy_j: e });
        }
        // Find a point strictly inside the allowed region first.
        let mut inside = None;
        let n = 400;
        for i in 1..n {
            let r = a + (b - a) * i as f64 / n as f64;
            if effective_potential(maps, level, l, r) < e {
                inside = Some(r);
                break;
            }
        }
        let Some(r_in) = inside else {
            return Err(Error::Unbound { energy_j: e });
        };
        b = r_in;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if effective_potential(maps, level, l, mid) > e {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    // ρ = c - h cos φ, φ ∈ [0, π] removes the turning-point singularities
    // (for L = 0, ρ = ρ_max sin φ on [0, π/2] does the same at the outer end).
    let n = 4000;
    let mut total = 0.0;
    if l == 0.0 {
        let dphi = 0.5 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            let phi = (i as f64 + 0.5) * dphi;
            let rho = rho_max * phi.sin();
            let ke = e - effective_potential(maps, level, l, rho);
            if ke > 0.0 {
                total += rho_max * phi.cos() * dphi / (2.0 * ke / m).sqrt();
            }
        }
        // ρ runs 0 → ρ_max → 0 once per period of |y|.
        total *= 2.0;
    } else {
        let c = 0.5 * (rho_max + rho_min);
        let h = 0.5 * (rho_max - rho_min);
        let dphi = std::f64::consts::PI / n as f64;
        for i in 0..n {
            let phi = (i as f64 + 0.5) * dphi;
            let rho = c - h * phi.cos();
            let ke = e - effective_potential(maps, level, l, rho);
            if ke > 0.0 {
                total += h * phi.sin() * dphi / (2.0 * ke / m).sqrt();
            }
        }
        total *= 2.0;
    }
    Ok(PeriodPoint { rho_min_m: rho_min, rho_max_m: rho_max, energy_j: e, period_s: total })
}

/// Period against outer turning point for `n` orbits up to `edge_fraction`
/// of the trap edge (`ρ` where `V_eff` reaches zero).
pub fn period_amplitude_curve(
    maps: &RadialMaps,
    level: DriveLevel,
    l: f64,
    n: usize,
    edge_fraction: f64,
) -> Result<Vec<PeriodPoint>> {
    if !(maps.level(level).depth_j > 0.0) {
        return Err(Error::NotTrapping(level));
    }
    let grid = maps.rho_grid();
    let edge = grid
        .iter()
        .copied()
        .find(|&r| r > 0.0 && effective_potential(maps, level, 0.0, r) > -1e-3 * maps.level(level).depth_j)
        .unwrap_or(maps.rho_max());
    let lo = 0.02 * maps.params.waist_m;
    let hi = edge_fraction * edge;
    (0..n)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
            radial_period(maps, level, l, r)
        })
        .collect()
}

/// Mean interval between successive maxima of `ρ(t)` in a uniformly sampled
/// series, refined by parabolic interpolation.
pub fn measured_radial_period(rho: &[f64], dt: f64) -> Option<f64> {
    let mut peaks = Vec::new();
    for i in 1..rho.len().saturating_sub(1) {
        if rho[i] > rho[i - 1] && rho[i] >= rho[i + 1] {
            let denom = rho[i - 1] - 2.0 * rho[i] + rho[i + 1];
            let shift = if denom != 0.0 { 0.5 * (rho[i - 1] - rho[i + 1]) / denom } else { 0.0 };
            peaks.push((i as f64 + shift) * dt);
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    Some((peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}
