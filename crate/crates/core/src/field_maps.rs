// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Radial and coupling-indexed lookup tables built from steady states.
//!
//! Every steady-state quantity depends on position only through the coupling
//! `g`, so each level is solved once on Chebyshev nodes in `g ∈ [0, g0]` and
//! interpolated onto two uniform grids: radius at the antinode (`x = 0`) and
//! `|g|` itself for the full 3D integrator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DriveLevel, SystemParams, HBAR};
use crate::qjc::{steady_state, HilbertSpace, Observables, SolverMethod};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSettings {
    pub n_fock: usize,
    pub n_rho: usize,
    pub rho_max_over_waist: f64,
    pub n_coupling: usize,
    /// Polynomial degree of the Chebyshev interpolant in `g`.
    pub chebyshev_degree: usize,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self { n_fock: 15, n_rho: 2048, rho_max_over_waist: 3.0, n_coupling: 2048, chebyshev_degree: 64 }
    }
}

/// Momentum diffusion `D = gain · projection · (ħk)² γ ⟨σ†σ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionModel {
    pub gain: f64,
    /// Fraction of the recoil diffusion landing in each Cartesian component.
    pub projection: f64,
}

impl Default for DiffusionModel {
    fn default() -> Self {
        Self { gain: 1.0, projection: 1.0 }
    }
}

impl DiffusionModel {
    pub fn coefficient(&self, params: &SystemParams, excited_population: f64) -> f64 {
        let recoil = HBAR * params.wavenumber();
        self.gain * self.projection * recoil * recoil * params.gamma_rad_s * excited_population.max(0.0)
    }
}

/// Steady-state observables sampled on Chebyshev nodes in `g ∈ [0, g0]`
/// and evaluated by barycentric interpolation.
#[derive(Debug, Clone)]
pub struct CouplingInterpolant {
    g0: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<[f64; 4]>,
}

impl CouplingInterpolant {
    fn nodes(g0: f64, degree: usize) -> Vec<f64> {
        (0..=degree)
            .map(|j| {
                let x = (std::f64::consts::PI * j as f64 / degree as f64).cos();
                0.5 * g0 * (1.0 - x)
            })
            .collect()
    }

    /// Builds the interpolant for one level.
    pub fn build(params: &SystemParams, settings: &MapSettings, level: DriveLevel) -> Result<Self> {
        sample_level(params, settings, level)
    }

    /// `(T, ⟨a†σ + σ†a⟩, ⟨σ†σ⟩, ⟨a†a⟩)` at coupling `g`.
    pub fn eval(&self, g: f64) -> [f64; 4] {
        // Second-kind barycentric formula on x = 1 - 2g/g0.
        let x = 1.0 - 2.0 * g / self.g0;
        let mut num = [0.0; 4];
        let mut den = 0.0;
        for (k, &gk) in self.nodes.iter().enumerate() {
            let xk = 1.0 - 2.0 * gk / self.g0;
            let diff = x - xk;
            if diff == 0.0 {
                return self.values[k];
            }
            let w = self.weights[k] / diff;
            den += w;
            for (n, v) in num.iter_mut().zip(self.values[k]) {
                *n += w * v;
            }
        }
        num.map(|n| n / den)
    }
}

fn pack(o: &Observables) -> [f64; 4] {
    [o.transmission, o.dipole_correlation, o.excited_population, o.photon_number]
}

/// Tables for one drive level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelMap {
    pub level: DriveLevel,
    pub photons: f64,
    pub drive_rad_s: f64,
    pub potential_j: Vec<f64>,
    pub force_n: Vec<f64>,
    pub transmission: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub excited_population: Vec<f64>,
    /// `Φ(|g|)`; potential as a function of coupling, `Φ(0) = 0`.
    pub coupling_potential_j: Vec<f64>,
    pub coupling_dipole: Vec<f64>,
    pub coupling_transmission: Vec<f64>,
    pub coupling_excited_population: Vec<f64>,
    /// Well depth `-min U`.
    pub depth_j: f64,
    /// Waist of the least-squares Gaussian fit to `U(ρ)` on `[0, 1.5 w0]`.
    pub fitted_waist_m: f64,
    /// RMS residual of that fit relative to the depth.
    pub fit_relative_rms: f64,
    /// First radial index of the monotonically decreasing transmission branch.
    pub branch_start: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialMaps {
    pub params: SystemParams,
    pub settings: MapSettings,
    pub diffusion_model: DiffusionModel,
    pub rho_step_m: f64,
    pub coupling_step: f64,
    pub levels: Vec<LevelMap>,
}

/// Point of steepest transmission slope on a level's inversion branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteepestPoint {
    pub rho_m: f64,
    pub transmission: f64,
    /// `|dT/dρ|` in 1/m.
    pub slope_per_m: f64,
}

fn lerp_table(table: &[f64], step: f64, x: f64) -> f64 {
    let last = table.len() - 1;
    let s = (x / step).max(0.0);
    if s >= last as f64 {
        return table[last];
    }
    let i = s as usize;
    let f = s - i as f64;
    table[i] + f * (table[i + 1] - table[i])
}

fn trapezoid_cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 1..f.len() {
        out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    out
}

/// Least-squares Gaussian waist for `U ≈ -U0 exp(-ρ²/w²)` with `U0` fixed
/// at the well depth; golden-section search over `w`.
fn fit_gaussian_waist(rho: &[f64], u: &[f64], depth: f64, w0: f64) -> (f64, f64) {
    let sel: Vec<(f64, f64)> = rho.iter().zip(u).filter(|(r, _)| **r <= 1.5 * w0).map(|(r, u)| (*r, *u)).collect();
    let cost = |w: f64| -> f64 {
        sel.iter().map(|(r, u)| (u + depth * (-(r * r) / (w * w)).exp()).powi(2)).sum::<f64>()
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.2 * w0, 2.0 * w0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
        if (b - a) < 1e-12 * w0 {
            break;
        }
    }
    let w = 0.5 * (a + b);
    let rms = (cost(w) / sel.len() as f64).sqrt();
    (w, if depth > 0.0 { rms / depth } else { f64::INFINITY })
}

/// Solves the steady state on Chebyshev nodes in `g` for one level.
fn sample_level(params: &SystemParams, settings: &MapSettings, level: DriveLevel) -> Result<CouplingInterpolant> {
    let space = HilbertSpace::new(settings.n_fock)?;
    let eps = params.level_drive(level);
    let degree = settings.chebyshev_degree.max(2);
    let nodes = CouplingInterpolant::nodes(params.g0_rad_s, degree);
    let values = nodes
        .par_iter()
        .map(|&g| steady_state(params, &space, g, eps, SolverMethod::Banded).map(|s| pack(&s.rho.observables())))
        .collect::<Result<Vec<_>>>()?;
    let weights = (0..=degree)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == degree {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    Ok(CouplingInterpolant { g0: params.g0_rad_s, nodes, weights, values })
}

fn assemble_level(
    params: &SystemParams,
    settings: &MapSettings,
    model: &DiffusionModel,
    level: DriveLevel,
    samples: &CouplingInterpolant,
) -> Result<LevelMap> {
    let w0 = params.waist_m;
    let n = settings.n_rho;
    let h = settings.rho_max_over_waist * w0 / (n - 1) as f64;
    let rho: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut transmission = Vec::with_capacity(n);
    let mut force_n = Vec::with_capacity(n);
    let mut excited_population = Vec::with_capacity(n);
    for &r in &rho {
        let g = params.coupling(0.0, r);
        let [t, c, pe, _] = samples.eval(g);
        transmission.push(t);
        force_n.push(HBAR * 2.0 * r / (w0 * w0) * g * c);
        excited_population.push(pe);
    }
    // U(ρ_max) = 0; integrate -F inward.
    let mut potential_j = vec![0.0; n];
    for i in (0..n - 1).rev() {
        potential_j[i] = potential_j[i + 1] + 0.5 * h * (force_n[i] + force_n[i + 1]);
    }
    let ng = settings.n_coupling;
    let dg = params.g0_rad_s / (ng - 1) as f64;
    let mut coupling_dipole = Vec::with_capacity(ng);
    let mut coupling_transmission = Vec::with_capacity(ng);
    let mut coupling_excited_population = Vec::with_capacity(ng);
    for k in 0..ng {
        let [t, c, pe, _] = samples.eval(k as f64 * dg);
        coupling_transmission.push(t);
        coupling_dipole.push(c);
        coupling_excited_population.push(pe);
    }
    let coupling_potential_j = trapezoid_cumulative(&coupling_dipole, dg).into_iter().map(|v| HBAR * v).collect();

    LevelTables {
        potential_j,
        force_n,
        transmission,
        excited_population,
        coupling_potential_j,
        coupling_dipole,
        coupling_transmission,
        coupling_excited_population,
    }
    .finish(params, settings, model, level)
}

/// Raw per-level arrays, as persisted in table files.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTables {
    pub potential_j: Vec<f64>,
    pub force_n: Vec<f64>,
    pub transmission: Vec<f64>,
    pub excited_population: Vec<f64>,
    pub coupling_potential_j: Vec<f64>,
    pub coupling_dipole: Vec<f64>,
    pub coupling_transmission: Vec<f64>,
    pub coupling_excited_population: Vec<f64>,
}

impl LevelTables {
    /// Derives diffusion, depth, waist fit and inversion branch.
    pub fn finish(self, params: &SystemParams, settings: &MapSettings, model: &DiffusionModel, level: DriveLevel) -> Result<LevelMap> {
        let n = settings.n_rho;
        if self.potential_j.len() != n
            || self.force_n.len() != n
            || self.transmission.len() != n
            || self.excited_population.len() != n
        {
            return Err(Error::BadData { context: format!("{level} radial table"), message: format!("expected {n} rows") });
        }
        let ng = settings.n_coupling;
        if self.coupling_potential_j.len() != ng
            || self.coupling_dipole.len() != ng
            || self.coupling_transmission.len() != ng
            || self.coupling_excited_population.len() != ng
        {
            return Err(Error::BadData { context: format!("{level} coupling table"), message: format!("expected {ng} rows") });
        }
        let w0 = params.waist_m;
        let h = settings.rho_max_over_waist * w0 / (n - 1) as f64;
        let rho: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let diffusion = self.excited_population.iter().map(|&pe| model.coefficient(params, pe)).collect();
        let depth_j = -self.potential_j.iter().copied().fold(f64::INFINITY, f64::min);
        let (fitted_waist_m, fit_relative_rms) = fit_gaussian_waist(&rho, &self.potential_j, depth_j.max(0.0), w0);

        let t = &self.transmission;
        let mut branch_start = 0;
        for i in 1..n {
            if t[i] > t[branch_start] {
                branch_start = i;
            }
        }
        let tol = 1e-12 * t[branch_start].abs().max(1.0);
        for i in branch_start..n - 1 {
            if t[i + 1] > t[i] + tol {
                return Err(Error::NonMonotonic { level, rho_m: rho[i] });
            }
        }

        Ok(LevelMap {
            level,
            photons: params.drive_levels.get(level),
            drive_rad_s: params.level_drive(level),
            potential_j: self.potential_j,
            force_n: self.force_n,
            transmission: self.transmission,
            diffusion,
            excited_population: self.excited_population,
            coupling_potential_j: self.coupling_potential_j,
            coupling_dipole: self.coupling_dipole,
            coupling_transmission: self.coupling_transmission,
            coupling_excited_population: self.coupling_excited_population,
            depth_j,
            fitted_waist_m,
            fit_relative_rms,
            branch_start,
        })
    }
}

/// Builds tables for all four drive levels.
pub fn build_maps(params: &SystemParams, settings: &MapSettings, model: DiffusionModel) -> Result<RadialMaps> {
    params.validate()?;
    if settings.n_rho < 4 || settings.n_coupling < 4 || settings.rho_max_over_waist <= 0.0 {
        return Err(Error::Config("map grids need at least 4 points and a positive extent".into()));
    }
    let levels = DriveLevel::ALL
        .iter()
        .map(|&level| {
            let samples = sample_level(params, settings, level)?;
            assemble_level(params, settings, &model, level, &samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialMaps::from_levels(params, settings, model, levels))
}

impl RadialMaps {
    /// Wraps finished level maps, ordered as [`DriveLevel::ALL`].
    pub fn from_levels(params: &SystemParams, settings: &MapSettings, model: DiffusionModel, levels: Vec<LevelMap>) -> Self {
        RadialMaps {
            params: params.clone(),
            settings: *settings,
            diffusion_model: model,
            rho_step_m: settings.rho_max_over_waist * params.waist_m / (settings.n_rho - 1) as f64,
            coupling_step: params.g0_rad_s / (settings.n_coupling - 1) as f64,
            levels,
        }
    }
}

impl RadialMaps {
    pub fn level(&self, level: DriveLevel) -> &LevelMap {
        &self.levels[level.index()]
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_step_m * (self.settings.n_rho - 1) as f64
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        (0..self.settings.n_rho).map(|i| i as f64 * self.rho_step_m).collect()
    }

    pub fn coupling_grid(&self) -> Vec<f64> {
        (0..self.settings.n_coupling).map(|i| i as f64 * self.coupling_step).collect()
    }

    /// Replaces the diffusion model and recomputes every `D(ρ)` table.
    pub fn set_diffusion_model(&mut self, model: DiffusionModel) {
        self.diffusion_model = model;
        for lm in &mut self.levels {
            lm.diffusion = lm.excited_population.iter().map(|&pe| model.coefficient(&self.params, pe)).collect();
        }
    }

    pub fn potential(&self, level: DriveLevel, rho: f64) -> f64 {
        lerp_table(&self.level(level).potential_j, self.rho_step_m, rho)
    }

    pub fn force(&self, level: DriveLevel, rho: f64) -> f64 {
        lerp_table(&self.level(level).force_n, self.rho_step_m, rho)
    }

    pub fn diffusion(&self, level: DriveLevel, rho: f64) -> f64 {
        lerp_table(&self.level(level).diffusion, self.rho_step_m, rho)
    }

    pub fn excited_population(&self, level: DriveLevel, rho: f64) -> f64 {
        lerp_table(&self.level(level).excited_population, self.rho_step_m, rho)
    }

    /// Transmission at the antinode plane.
    pub fn transmission_radial(&self, level: DriveLevel, rho: f64) -> f64 {
        lerp_table(&self.level(level).transmission, self.rho_step_m, rho)
    }

    /// Transmission at an arbitrary point, via the coupling table.
    pub fn transmission(&self, level: DriveLevel, x: f64, rho: f64) -> f64 {
        self.transmission_at_coupling(level, self.params.coupling(x, rho).abs())
    }

    pub fn transmission_at_coupling(&self, level: DriveLevel, g_abs: f64) -> f64 {
        lerp_table(&self.level(level).coupling_transmission, self.coupling_step, g_abs)
    }

    pub fn potential_at_coupling(&self, level: DriveLevel, g_abs: f64) -> f64 {
        lerp_table(&self.level(level).coupling_potential_j, self.coupling_step, g_abs)
    }

    pub fn dipole_at_coupling(&self, level: DriveLevel, g_abs: f64) -> f64 {
        lerp_table(&self.level(level).coupling_dipole, self.coupling_step, g_abs)
    }

    pub fn excited_population_at_coupling(&self, level: DriveLevel, g_abs: f64) -> f64 {
        lerp_table(&self.level(level).coupling_excited_population, self.coupling_step, g_abs)
    }

    pub fn diffusion_at_coupling(&self, level: DriveLevel, g_abs: f64) -> f64 {
        self.diffusion_model.coefficient(&self.params, self.excited_population_at_coupling(level, g_abs))
    }

    /// Radius on the inversion branch whose transmission equals `t`.
    /// Values above the branch maximum map to its start; values below the
    /// far-field level map to `ρ_max`.
    pub fn invert_transmission(&self, level: DriveLevel, t: f64) -> f64 {
        let lm = self.level(level);
        let tab = &lm.transmission;
        let (lo, hi) = (lm.branch_start, tab.len() - 1);
        if !(t < tab[lo]) {
            return lo as f64 * self.rho_step_m;
        }
        if t <= tab[hi] {
            return hi as f64 * self.rho_step_m;
        }
        // tab[a] > t >= tab[b]
        let (mut a, mut b) = (lo, hi);
        while b - a > 1 {
            let mid = (a + b) / 2;
            if tab[mid] > t {
                a = mid;
            } else {
                b = mid;
            }
        }
        let span = tab[a] - tab[b];
        let f = if span > 0.0 { (tab[a] - t) / span } else { 0.0 };
        (a as f64 + f) * self.rho_step_m
    }

    pub fn steepest_point(&self, level: DriveLevel) -> SteepestPoint {
        let lm = self.level(level);
        let tab = &lm.transmission;
        let h = self.rho_step_m;
        let mut best = SteepestPoint { rho_m: 0.0, transmission: tab[lm.branch_start], slope_per_m: 0.0 };
        for i in (lm.branch_start + 1)..tab.len() - 1 {
            let slope = ((tab[i + 1] - tab[i - 1]) / (2.0 * h)).abs();
            if slope > best.slope_per_m {
                best = SteepestPoint { rho_m: i as f64 * h, transmission: tab[i], slope_per_m: slope };
            }
        }
        best
    }

    /// Harmonic angular frequency of small radial oscillations.
    pub fn harmonic_frequency(&self, level: DriveLevel) -> f64 {
        let r = 4.0 * self.rho_step_m;
        let k = -self.force(level, r) / r;
        (k.max(0.0) / self.params.mass_kg).sqrt()
    }
}


/// Reference orbit and ensemble used to measure heating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatingProbe {
    pub level: DriveLevel,
    /// Starting radius of the `L = 0` reference orbit.
    pub amplitude_m: f64,
    pub ensemble: usize,
    pub seed: u64,
    /// Dynamics step for the axially pinned reference runs.
    pub dt_s: f64,
    /// Duration of each run in orbital periods.
    pub periods: f64,
}

impl HeatingProbe {
    pub fn new(params: &SystemParams) -> Self {
        Self { level: DriveLevel::Hi, amplitude_m: 0.5 * params.waist_m, ensemble: 200, seed: 0x4EA7, dt_s: 1e-6 / 30.0, periods: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingMeasurement {
    /// Small-oscillation orbital period `τ_r = 2π/ω` at the probe level.
    pub orbital_period_s: f64,
    pub depth_j: f64,
    /// Mean energy gain per orbital period with the zero-mean kick work
    /// removed (control variate).
    pub gain_per_period_j: f64,
    /// Plain ensemble mean of the energy change per orbital period.
    pub raw_gain_per_period_j: f64,
    pub raw_standard_error_j: f64,
}

/// Radial oscillation time `τ_r`: the small-amplitude orbital period
/// `2π/ω` in the probe level's well.
pub fn orbital_period(maps: &RadialMaps, probe: &HeatingProbe) -> Result<f64> {
    let w = maps.harmonic_frequency(probe.level);
    if !(w > 0.0) {
        return Err(Error::NotTrapping(probe.level));
    }
    Ok(2.0 * std::f64::consts::PI / w)
}

/// Runs the heating ensemble on the reference orbit with the maps' current
/// diffusion model.
pub fn measure_heating(maps: &RadialMaps, probe: &HeatingProbe) -> Result<HeatingMeasurement> {
    use crate::dynamics::{trajectory_rng, AtomState, Integrator, SimConfig};
    let tau = orbital_period(maps, probe)?;
    let mut config = SimConfig::axial_pinned(maps.params.waist_m);
    config.substeps = 1;
    config.dt_info_s = probe.dt_s;
    config.gravity = false;
    let steps = (probe.periods * tau / probe.dt_s).round() as usize;
    let duration = steps as f64 * probe.dt_s;
    let per = |x: f64| x * tau / duration;
    let results: Vec<(f64, f64)> = (0..probe.ensemble)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(probe.seed, i as u64);
            let mut integ = Integrator::new(maps, &config);
            let mut s = AtomState {
                t: 0.0,
                position: [0.0, probe.amplitude_m, 0.0],
                momentum: [0.0; 3],
                level: probe.level,
            };
            let e0 = integ.energy(&s);
            for _ in 0..steps {
                integ.step(&mut s, &mut rng);
            }
            let de = integ.energy(&s) - e0;
            (de, de - integ.kick_work)
        })
        .collect();
    let n = results.len() as f64;
    let raw_mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let raw_var = results.iter().map(|r| (r.0 - raw_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let cv_mean = results.iter().map(|r| r.1).sum::<f64>() / n;
    Ok(HeatingMeasurement {
        orbital_period_s: tau,
        depth_j: maps.level(probe.level).depth_j,
        gain_per_period_j: per(cv_mean),
        raw_gain_per_period_j: per(raw_mean),
        raw_standard_error_j: per((raw_var / n).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionCalibration {
    pub model: DiffusionModel,
    pub target_j: f64,
    pub measurement: HeatingMeasurement,
    pub iterations: usize,
}

/// Secant search on the diffusion gain so that the heating per orbital
/// period on the reference orbit equals `fraction · U0`. Common random
/// numbers across iterations make the search deterministic.
pub fn calibrate_diffusion(maps: &RadialMaps, fraction: f64, probe: &HeatingProbe) -> Result<DiffusionCalibration> {
    let target = fraction * maps.level(probe.level).depth_j;
    let mut work = maps.clone();
    let projection = maps.diffusion_model.projection;
    let mut eval = |gain: f64| -> Result<HeatingMeasurement> {
        work.set_diffusion_model(DiffusionModel { gain, projection });
        measure_heating(&work, probe)
    };
    let mut x0 = 100.0;
    let m0 = eval(x0)?;
    let mut f0 = m0.gain_per_period_j - target;
    // Heating is close to linear in the gain; start the secant from there.
    let mut x1 = x0 * target / m0.gain_per_period_j.max(f64::MIN_POSITIVE);
    let max_iter = 30;
    for it in 1..=max_iter {
        let m1 = eval(x1)?;
        let f1 = m1.gain_per_period_j - target;
        if (f1 / target).abs() < 1e-4 {
            return Ok(DiffusionCalibration { model: DiffusionModel { gain: x1, projection }, target_j: target, measurement: m1, iterations: it });
        }
        let slope = (f1 - f0) / (x1 - x0);
        if !(slope.is_finite() && slope > 0.0) {
            break;
        }
        let next = x1 - f1 / slope;
        x0 = x1;
        f0 = f1;
        x1 = next.max(0.0);
    }
    Err(Error::CalibrationDiverged { what: "diffusion gain", iterations: max_iter })
}
