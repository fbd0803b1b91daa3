// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::sync::OnceLock;

use cavfb::config::RunConfig;
use cavfb::field_maps::RadialMaps;
use cavfb::io::{build_tables, Tables};

/// Default tables with calibrated diffusion and noise, built once per
/// test binary.
pub fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| build_tables(&RunConfig::default()).expect("default tables build"))
}

pub fn maps() -> &'static RadialMaps {
    &tables().maps
}

/// Maps with diffusion switched off.
pub fn clean_maps() -> &'static RadialMaps {
    static MAPS: OnceLock<RadialMaps> = OnceLock::new();
    MAPS.get_or_init(|| {
        let mut m = maps().clone();
        m.set_diffusion_model(cavfb::field_maps::DiffusionModel { gain: 0.0, projection: 1.0 });
        m
    })
}
