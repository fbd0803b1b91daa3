// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Small statistics helpers for campaign summaries.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Welch's t statistic for `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let se2 = variance(a) / a.len() as f64 + variance(b) / b.len() as f64;
    (mean(a) - mean(b)) / se2.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn with_edges(edges: Vec<f64>, data: &[f64]) -> Self {
        let mut counts = vec![0; edges.len() - 1];
        let (mut below, mut above) = (0, 0);
        for &x in data {
            if x < edges[0] {
                below += 1;
            } else if x >= edges[edges.len() - 1] {
                above += 1;
            } else {
                let i = edges.partition_point(|&e| e <= x) - 1;
                counts[i] += 1;
            }
        }
        Self { edges, counts, below, above }
    }

    pub fn log_spaced(lo: f64, hi: f64, bins: usize, data: &[f64]) -> Self {
        let (a, b) = (lo.ln(), hi.ln());
        let mut edges: Vec<f64> = (0..=bins).map(|i| (a + (b - a) * i as f64 / bins as f64).exp()).collect();
        // exp(ln x) need not round-trip; keep the end edges exact.
        edges[0] = lo;
        edges[bins] = hi;
        Self::with_edges(edges, data)
    }

    pub fn linear(lo: f64, hi: f64, bins: usize, data: &[f64]) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self::with_edges(edges, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    pub lifetime_s: f64,
    pub standard_error_s: f64,
    pub events: usize,
    pub censored: usize,
}

/// Maximum-likelihood exponential lifetime of dwell times beyond `burn_in`.
/// Each entry is `(dwell, censored)`; censored runs add exposure only.
pub fn exponential_lifetime(dwells: &[(f64, bool)], burn_in: f64) -> LifetimeFit {
    let mut exposure = 0.0;
    let mut events = 0;
    let mut censored = 0;
    for &(d, cens) in dwells {
        if d <= burn_in {
            continue;
        }
        exposure += d - burn_in;
        if cens {
            censored += 1;
        } else {
            events += 1;
        }
    }
    let tau = if events > 0 { exposure / events as f64 } else { f64::INFINITY };
    LifetimeFit { lifetime_s: tau, standard_error_s: tau / (events.max(1) as f64).sqrt(), events, censored }
}
