// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! Bookkeeping for the acceptance run: one [`Report`] per criterion, each a
//! list of named checks, printed as a single pass/fail line plus details.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// How hard the campaign criteria are pushed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// Reduced integration step where the acceptance text allows one.
    Reduced,
    Full,
}

impl Fidelity {
    /// `ACCEPTANCE_FULL=1` selects [`Fidelity::Full`].
    pub fn from_env() -> Self {
        match std::env::var("ACCEPTANCE_FULL").as_deref() {
            Ok("1") | Ok("true") | Ok("yes") => Fidelity::Full,
            _ => Fidelity::Reduced,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    /// Informational lines that do not affect the outcome.
    pub notes: Vec<String>,
    pub elapsed: Duration,
}

impl Report {
    pub fn new(id: u8, title: &str) -> Self {
        Self { id, title: title.to_string(), checks: Vec::new(), notes: Vec::new(), elapsed: Duration::ZERO }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check { name: name.to_string(), pass, detail: detail.into() });
        pass
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Passes only with at least one check and no failing check.
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "criterion {}: {} {} ({:.1} s)\n",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed.as_secs_f64()
        );
        for c in &self.checks {
            let _ = writeln!(out, "    [{}] {}: {}", if c.pass { "ok" } else { "xx" }, c.name, c.detail);
        }
        for n in &self.notes {
            let _ = writeln!(out, "    note: {n}");
        }
        out
    }
}

/// Runs one criterion, timing it and turning a panic into a failed check.
/// With a `budget`, exceeding it is a failed check too.
pub fn evaluate(id: u8, title: &str, budget: Option<Duration>, body: impl FnOnce(&mut Report)) -> Report {
    let mut report = Report::new(id, title);
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| body(&mut report)));
    report.elapsed = start.elapsed();
    if let Err(e) = outcome {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".to_string());
        report.check("completed", false, msg);
    }
    if let Some(limit) = budget {
        let secs = report.elapsed.as_secs_f64();
        report.check("runtime", report.elapsed <= limit, format!("{secs:.1} s, limit {:.0} s", limit.as_secs_f64()));
    }
    report
}

/// `|value / target - 1| <= tol`.
pub fn within(value: f64, target: f64, tol: f64) -> bool {
    (value / target - 1.0).abs() <= tol
}

/// Length of the longest contiguous stretch of `xs` inside `[lo, hi]`.
pub fn longest_run(xs: &[f64], lo: f64, hi: f64) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &x in xs {
        if (lo..=hi).contains(&x) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Lag in samples maximizing `Σ a[i] b[i + lag]`, refined by a parabola
/// through the peak. The first `skip` samples are left out.
pub fn correlation_lag(a: &[f64], b: &[f64], max_lag: usize, skip: usize) -> f64 {
    let n = a.len().min(b.len());
    let corr = |lag: usize| (skip..n.saturating_sub(lag)).map(|i| a[i] * b[i + lag]).sum::<f64>();
    let c: Vec<f64> = (0..=max_lag).map(corr).collect();
    let k = (1..max_lag).max_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap_or(0);
    if k == 0 {
        return 0.0;
    }
    let denom = c[k - 1] - 2.0 * c[k] + c[k + 1];
    let shift = if denom != 0.0 { 0.5 * (c[k - 1] - c[k + 1]) / denom } else { 0.0 };
    k as f64 + shift
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_needs_checks_and_all_of_them() {
        let mut r = Report::new(1, "x");
        assert!(!r.passed());
        r.check("a", true, "");
        assert!(r.passed());
        r.check("b", false, "1 > 0");
        assert!(!r.passed());
        let text = r.render();
        assert!(text.starts_with("criterion 1: FAIL x"));
        assert!(text.contains("[xx] b: 1 > 0"));
    }

    #[test]
    fn panics_and_overruns_fail() {
        let r = evaluate(2, "boom", None, |r| {
            r.check("first", true, "");
            panic!("kaput");
        });
        assert!(!r.passed());
        assert!(r.checks.iter().any(|c| c.detail.contains("kaput")));
        let r = evaluate(3, "slow", Some(Duration::ZERO), |r| {
            r.check("only", true, "");
            std::thread::sleep(Duration::from_millis(2));
        });
        assert!(!r.passed());
    }

    #[test]
    fn runs_and_tolerances() {
        assert_eq!(longest_run(&[0.0, 1.0, 1.0, 5.0, 1.0, 1.0, 1.0], 0.5, 2.0), 3);
        assert_eq!(longest_run(&[], 0.0, 1.0), 0);
        assert!(within(1.09, 1.0, 0.1));
        assert!(!within(0.89, 1.0, 0.1));
    }

    #[test]
    fn lag_of_a_shifted_pulse() {
        let a: Vec<f64> = (0..400).map(|i| (-((i as f64 - 150.0) / 10.0).powi(2)).exp()).collect();
        let b: Vec<f64> = (0..400).map(|i| (-((i as f64 - 167.0) / 10.0).powi(2)).exp()).collect();
        assert!((correlation_lag(&a, &b, 40, 0) - 17.0).abs() < 0.05);
    }
}
