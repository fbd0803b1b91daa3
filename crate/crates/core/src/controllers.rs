// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Drive-level switching policies.
//!
//! A [`Controller`] sees one information-rate sample at a time and may
//! return a [`ControlEvent`]; the integrator applies the new level from the
//! next dynamics step on.

use serde::{Deserialize, Serialize};

use crate::estimators::BoxFilter;
use crate::field_maps::RadialMaps;
use crate::params::DriveLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Switch on hysteresis crossings of `ρ̇` as they happen.
    HysteresisDirect,
    /// Forced first switch, then switch one measured period after each
    /// crossing of the estimated `ρ̇`, minus a fixed correction.
    CycleDelay,
    /// Alternate levels on a fixed clock.
    OpenLoop,
    /// Stay at the trapping level.
    Constant,
}

/// Which `ρ̇` the feedback policies act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSignal {
    /// `ρ̇_est` from the noisy estimator chain.
    Estimated,
    /// True `ρ̇` through the short box filter.
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCause {
    Trigger,
    HysteresisUp,
    HysteresisDown,
    ScheduledWait,
    OpenLoopTick,
    ForcedFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlEvent {
    pub t_s: f64,
    pub from: DriveLevel,
    pub to: DriveLevel,
    pub cause: EventCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub policy: Policy,
    pub signal: FeedbackSignal,
    pub detect_level: DriveLevel,
    pub trap_on_level: DriveLevel,
    pub fb_high: DriveLevel,
    pub fb_low: DriveLevel,
    /// Trigger threshold as a fraction of the largest atom-induced rise in
    /// detect-level transmission above its empty-cavity value.
    pub trigger_fraction: f64,
    /// Extra moving average applied to the RC-filtered transmission before
    /// the trigger comparison; zero disables it.
    pub trigger_window_s: f64,
    /// Hysteresis limit `lim`, m/s.
    pub limit_m_s: f64,
    /// Extra margin `δ` on the downward limit, m/s.
    pub delta_m_s: f64,
    pub first_switch_delay_s: f64,
    /// Subtracted from the measured period when scheduling a switch.
    pub wait_correction_s: f64,
    /// Period assumed before any has been measured.
    pub nominal_period_s: f64,
    pub open_loop_interval_s: f64,
}

impl ControllerConfig {
    /// Levels and timings for the full 3D simulations.
    pub fn full3d(policy: Policy) -> Self {
        Self {
            policy,
            signal: FeedbackSignal::Estimated,
            detect_level: DriveLevel::ExLo,
            trap_on_level: DriveLevel::Hi,
            fb_high: DriveLevel::Hi,
            fb_low: DriveLevel::Lo,
            trigger_fraction: 0.6,
            trigger_window_s: 40e-6,
            limit_m_s: 0.05,
            delta_m_s: 0.03,
            first_switch_delay_s: 45e-6,
            wait_correction_s: 20e-6,
            nominal_period_s: 50e-6,
            open_loop_interval_s: 45e-6,
        }
    }

    /// Deeper levels for the axially pinned simulations.
    pub fn axial_pinned(policy: Policy) -> Self {
        Self {
            trap_on_level: DriveLevel::ExHi,
            fb_high: DriveLevel::ExHi,
            fb_low: DriveLevel::Hi,
            open_loop_interval_s: 40e-6,
            ..Self::full3d(policy)
        }
    }

    /// Absolute trigger threshold on filtered transmission.
    pub fn trigger_threshold(&self, maps: &RadialMaps) -> f64 {
        let t = &maps.level(self.detect_level).transmission;
        let empty = t[t.len() - 1];
        let peak = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        empty + self.trigger_fraction * (peak - empty)
    }
}

/// Inputs available to the controller at one information sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInputs {
    pub t_s: f64,
    pub filtered_transmission: f64,
    pub rho_dot_est: f64,
    pub rho_dot_smoothed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Crossing {
    Up,
    Down,
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    threshold: f64,
    dt_info: f64,
    trigger_filter: Option<BoxFilter>,
    level: DriveLevel,
    trigger_time: Option<f64>,
    // cycle-delay state
    phase: Option<Crossing>,
    last_up: Option<f64>,
    last_down: Option<f64>,
    last_period: Option<f64>,
    forced_done: bool,
    /// Scheduled switch times to `fb_high` and `fb_low`.
    pending_high: Option<f64>,
    pending_low: Option<f64>,
    // open-loop state
    next_tick: Option<f64>,
}

impl Controller {
    pub fn new(config: ControllerConfig, threshold: f64, dt_info: f64) -> Self {
        let window = (config.trigger_window_s / dt_info).round() as usize;
        Self {
            config,
            threshold,
            dt_info,
            trigger_filter: (window > 1).then(|| BoxFilter::new(window)),
            level: config.detect_level,
            trigger_time: None,
            phase: None,
            last_up: None,
            last_down: None,
            last_period: None,
            forced_done: false,
            pending_high: None,
            pending_low: None,
            next_tick: None,
        }
    }

    pub fn level(&self) -> DriveLevel {
        self.level
    }

    pub fn trigger_time(&self) -> Option<f64> {
        self.trigger_time
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn switch(&mut self, t: f64, to: DriveLevel, cause: EventCause) -> Option<ControlEvent> {
        if to == self.level {
            return None;
        }
        let ev = ControlEvent { t_s: t, from: self.level, to, cause };
        self.level = to;
        Some(ev)
    }

    pub fn step(&mut self, inputs: &ControlInputs) -> Option<ControlEvent> {
        let t = inputs.t_s;
        let Some(t_trig) = self.trigger_time else {
            // The trigger arms once its averaging window has filled.
            let (f, armed) = match &mut self.trigger_filter {
                Some(b) => (b.step(inputs.filtered_transmission), b.is_full()),
                None => (inputs.filtered_transmission, true),
            };
            if armed && f > self.threshold {
                self.trigger_time = Some(t);
                self.next_tick = Some(t + self.config.open_loop_interval_s);
                return self.switch(t, self.config.trap_on_level, EventCause::Trigger);
            }
            return None;
        };
        let signal = match self.config.signal {
            FeedbackSignal::Estimated => inputs.rho_dot_est,
            FeedbackSignal::Smoothed => inputs.rho_dot_smoothed,
        };
        match self.config.policy {
            Policy::Constant => None,
            Policy::OpenLoop => self.open_loop_step(t),
            Policy::HysteresisDirect => self.hysteresis_step(t, signal),
            Policy::CycleDelay => self.cycle_delay_step(t, t_trig, signal),
        }
    }

    fn open_loop_step(&mut self, t: f64) -> Option<ControlEvent> {
        let tick = self.next_tick?;
        // Half-sample tolerance keeps ticks on the sample grid.
        if t + 0.5 * self.dt_info < tick {
            return None;
        }
        self.next_tick = Some(tick + self.config.open_loop_interval_s);
        let to = if self.level == self.config.fb_high { self.config.fb_low } else { self.config.fb_high };
        self.switch(t, to, EventCause::OpenLoopTick)
    }

    fn hysteresis_step(&mut self, t: f64, signal: f64) -> Option<ControlEvent> {
        let c = &self.config;
        if self.level == c.fb_high && signal < -(c.limit_m_s + c.delta_m_s) {
            let to = c.fb_low;
            return self.switch(t, to, EventCause::HysteresisDown);
        }
        if self.level == c.fb_low && signal > c.limit_m_s {
            let to = c.fb_high;
            return self.switch(t, to, EventCause::HysteresisUp);
        }
        None
    }

    fn detect_crossing(&mut self, signal: f64) -> Option<Crossing> {
        let c = &self.config;
        let down = signal < -(c.limit_m_s + c.delta_m_s);
        let up = signal > c.limit_m_s;
        let crossing = match self.phase {
            None if up => Some(Crossing::Up),
            None if down => Some(Crossing::Down),
            Some(Crossing::Up) if down => Some(Crossing::Down),
            Some(Crossing::Down) if up => Some(Crossing::Up),
            _ => None,
        };
        if crossing.is_some() {
            self.phase = crossing;
        }
        crossing
    }

    fn predicted_period(&self) -> f64 {
        let nominal = self.config.nominal_period_s;
        self.last_period.unwrap_or(nominal).clamp(self.dt_info, 4.0 * nominal)
    }

    fn cycle_delay_step(&mut self, t: f64, t_trig: f64, signal: f64) -> Option<ControlEvent> {
        if let Some(crossing) = self.detect_crossing(signal) {
            let previous = match crossing {
                Crossing::Up => self.last_up.replace(t),
                Crossing::Down => self.last_down.replace(t),
            };
            if let Some(p) = previous {
                self.last_period = Some(t - p);
            }
            if self.forced_done {
                // A newer crossing in the same direction replaces that
                // direction's pending switch.
                let at = t + self.predicted_period() - self.config.wait_correction_s;
                match crossing {
                    Crossing::Up => self.pending_high = Some(at),
                    Crossing::Down => self.pending_low = Some(at),
                }
            }
        }
        if !self.forced_done {
            if t + 0.5 * self.dt_info >= t_trig + self.config.first_switch_delay_s {
                self.forced_done = true;
                let to = self.config.fb_low;
                return self.switch(t, to, EventCause::ForcedFirst);
            }
            return None;
        }
        let due = |p: Option<f64>| p.is_some_and(|at| t + 0.5 * self.dt_info >= at);
        let (high_due, low_due) = (due(self.pending_high), due(self.pending_low));
        if !(high_due || low_due) {
            return None;
        }
        // If both are due on the same sample the later-scheduled one wins.
        let to = match (high_due, low_due) {
            (true, true) if self.pending_high >= self.pending_low => self.config.fb_high,
            (true, true) => self.config.fb_low,
            (true, false) => self.config.fb_high,
            _ => self.config.fb_low,
        };
        if high_due {
            self.pending_high = None;
        }
        if low_due {
            self.pending_low = None;
        }
        self.switch(t, to, EventCause::ScheduledWait)
    }
}
