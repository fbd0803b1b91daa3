// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use crate::params::DriveLevel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("photon-number truncation {0} is too small (need at least 1)")]
    TruncationTooSmall(usize),

    #[error("steady-state solve is singular or ill-conditioned (pivot ratio {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("truncation not converged: <a†a> changed by {relative_change:.3e} going to n_fock={n_fock}")]
    NotConverged { n_fock: usize, relative_change: f64 },

    #[error("unknown drive level `{0}`")]
    UnknownLevel(String),

    #[error("drive level {0} is not tabulated in these maps")]
    MissingLevel(DriveLevel),

    #[error("transmission is not monotonic on the inversion branch of level {level} near rho = {rho_m:.3e} m")]
    NonMonotonic { level: DriveLevel, rho_m: f64 },

    #[error("level {0} does not trap (no potential minimum below zero)")]
    NotTrapping(DriveLevel),

    #[error("orbit energy {energy_j:.3e} J is not bound by the potential")]
    Unbound { energy_j: f64 },

    #[error("no radial turning points found in the record")]
    NoTurningPoints,

    #[error("degenerate transmission slope; cannot calibrate noise")]
    DegenerateSlope,

    #[error("secant search for {what} did not converge after {iterations} iterations")]
    CalibrationDiverged { what: &'static str, iterations: usize },

    #[error("trajectory too short: needs {needed_s:.3e} s of dwell, has {have_s:.3e} s")]
    InsufficientDwell { needed_s: f64, have_s: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("artifact {} was built from a different configuration (fingerprint {found}, expected {expected})", .path.display())]
    StaleArtifact { path: PathBuf, expected: String, found: String },

    #[error("malformed data in {context}: {message}")]
    BadData { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for this error: 1 usage or configuration,
    /// 2 solver or numerical failure, 3 missing or stale artifacts,
    /// 4 malformed data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownLevel(_) => 1,
            Error::TruncationTooSmall(_)
            | Error::IllConditioned { .. }
            | Error::Residual { .. }
            | Error::NotConverged { .. }
            | Error::NonMonotonic { .. }
            | Error::NotTrapping(_)
            | Error::Unbound { .. }
            | Error::NoTurningPoints
            | Error::DegenerateSlope
            | Error::CalibrationDiverged { .. }
            | Error::InsufficientDwell { .. } => 2,
            Error::MissingArtifact(_) | Error::StaleArtifact { .. } | Error::MissingLevel(_) => 3,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 3,
            Error::BadData { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 4,
        }
    }
}
