// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Causal estimators for `ρ` and `ρ̇` from the sampled transmission record.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::field_maps::RadialMaps;
use crate::params::DriveLevel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub rc_cutoff_hz: f64,
    /// Least-squares slope window.
    pub fir_window_s: f64,
    /// Box filter applied to the true `ρ̇` in noiseless studies.
    pub box_window_s: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { rc_cutoff_hz: 100e3, fir_window_s: 40e-6, box_window_s: 10e-6 }
    }
}

/// Discrete first-order low-pass, `y += α (x - y)` with `α = dt / (RC + dt)`.
/// Starts from zero.
#[derive(Debug, Clone)]
pub struct RcLowpass {
    alpha: f64,
    state: f64,
}

impl RcLowpass {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        let rc = 1.0 / (2.0 * PI * cutoff_hz);
        Self { alpha: dt / (rc + dt), state: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self) -> f64 {
        self.state
    }

    pub fn step(&mut self, x: f64) -> f64 {
        self.state += self.alpha * (x - self.state);
        self.state
    }

    /// Exact magnitude response of the discrete filter at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, dt: f64) -> f64 {
        let w = 2.0 * PI * freq_hz * dt;
        let a = self.alpha;
        let re = 1.0 - (1.0 - a) * w.cos();
        let im = (1.0 - a) * w.sin();
        a / (re * re + im * im).sqrt()
    }
}

/// Slope of a least-squares line through the last `n` samples.
#[derive(Debug, Clone)]
pub struct FirSlope {
    weights: Vec<f64>,
    buffer: VecDeque<f64>,
}

impl FirSlope {
    pub fn new(n: usize, dt: f64) -> Self {
        let n = n.max(2);
        let mean = (n - 1) as f64 / 2.0;
        let ss: f64 = (0..n).map(|k| (k as f64 - mean).powi(2)).sum();
        let weights = (0..n).map(|k| (k as f64 - mean) / (ss * dt)).collect();
        Self { weights, buffer: VecDeque::with_capacity(n) }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Kernel, oldest sample first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() == self.weights.len()
    }

    /// Group delay of the estimate: the window midpoint.
    pub fn delay(&self, dt: f64) -> f64 {
        (self.weights.len() - 1) as f64 * dt / 2.0
    }

    /// Pushes a sample; returns 0 until the window has filled.
    pub fn step(&mut self, x: f64) -> f64 {
        if self.buffer.len() == self.weights.len() {
            self.buffer.pop_front();
        }
        self.buffer.push_back(x);
        if !self.ready() {
            return 0.0;
        }
        self.buffer.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }
}

/// Moving average over the last `n` samples (fewer during warm-up).
#[derive(Debug, Clone)]
pub struct BoxFilter {
    n: usize,
    buffer: VecDeque<f64>,
    sum: f64,
}

impl BoxFilter {
    pub fn new(n: usize) -> Self {
        let n = n.max(1);
        Self { n, buffer: VecDeque::with_capacity(n), sum: 0.0 }
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.n
    }

    pub fn step(&mut self, x: f64) -> f64 {
        if self.buffer.len() == self.n {
            self.sum -= self.buffer.pop_front().unwrap_or(0.0);
        }
        self.buffer.push_back(x);
        self.sum += x;
        self.sum / self.buffer.len() as f64
    }
}

fn samples_in(window: f64, dt: f64) -> usize {
    ((window / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOutput {
    pub filtered_transmission: f64,
    pub rho_est: f64,
    pub rho_dot_est: f64,
    /// Box-filtered true `ρ̇`.
    pub rho_dot_smoothed: f64,
}

/// RC filter, table inversion at the current drive level, and FIR slope.
/// Runs continuously from `t = 0`; the RC state carries across level
/// switches while the inversion table follows the level.
#[derive(Debug, Clone)]
pub struct EstimatorChain {
    rc: RcLowpass,
    fir: FirSlope,
    smoother: BoxFilter,
}

impl EstimatorChain {
    pub fn new(config: &EstimatorConfig, dt_info: f64) -> Self {
        Self {
            rc: RcLowpass::new(config.rc_cutoff_hz, dt_info),
            fir: FirSlope::new(samples_in(config.fir_window_s, dt_info), dt_info),
            smoother: BoxFilter::new(samples_in(config.box_window_s, dt_info)),
        }
    }

    pub fn fir(&self) -> &FirSlope {
        &self.fir
    }

    pub fn step(&mut self, maps: &RadialMaps, level: DriveLevel, noisy_t: f64, true_rho_dot: f64) -> EstimatorOutput {
        let filtered_transmission = self.rc.step(noisy_t);
        let rho_est = maps.invert_transmission(level, filtered_transmission);
        let rho_dot_est = self.fir.step(rho_est);
        let rho_dot_smoothed = self.smoother.step(true_rho_dot);
        EstimatorOutput { filtered_transmission, rho_est, rho_dot_est, rho_dot_smoothed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rc_impulse_response_is_geometric() {
        let mut rc = RcLowpass::new(100e3, 1e-6);
        let a = rc.alpha();
        let out: Vec<f64> = (0..6).map(|k| rc.step(if k == 0 { 1.0 } else { 0.0 })).collect();
        for (k, y) in out.iter().enumerate() {
            assert!((y - a * (1.0 - a).powi(k as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn fir_recovers_exact_slope_of_a_line() {
        let mut fir = FirSlope::new(40, 1e-6);
        let mut last = 0.0;
        for k in 0..60 {
            last = fir.step(3.0 + 2.5 * (k as f64 * 1e-6));
            if k < 39 {
                assert_eq!(last, 0.0);
            }
        }
        assert!((last - 2.5).abs() < 1e-9);
    }

    #[test]
    fn box_filter_averages_window() {
        let mut b = BoxFilter::new(3);
        assert_eq!(b.step(3.0), 3.0);
        assert_eq!(b.step(6.0), 4.5);
        assert_eq!(b.step(9.0), 6.0);
        assert_eq!(b.step(12.0), 9.0);
    }
}
