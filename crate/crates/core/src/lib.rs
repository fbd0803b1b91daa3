// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Quasiclassical cavity-QED simulator for single-atom trapping, position
//! sensing and real-time radial feedback cooling.
//!
//! The pipeline, bottom-up:
//!
//! * [`qjc`] builds the driven, damped Jaynes-Cummings system and solves for
//!   its steady state at any coupling strength.
//! * [`field_maps`] turns those steady states into radial lookup tables
//!   (potential, force, transmission, diffusion) for each drive level.
//! * [`dynamics`] integrates noisy atom trajectories through the cavity mode.
//! * [`detection`] and [`estimators`] synthesize the noisy transmission record
//!   and recover `ρ_est` and `ρ̇_est` from it.
//! * [`controllers`] implements the drive-switching policies.
//! * [`experiment`] runs seeded Monte Carlo campaigns and scores them.

pub mod config;
pub mod controllers;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod field_maps;
pub mod io;
pub mod params;
pub mod qjc;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
pub use params::{DriveLevel, DriveNormalization, SystemParams};
