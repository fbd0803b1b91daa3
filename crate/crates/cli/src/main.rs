// Copyright 2026 cavfb contributors
// SPDX-License-Identifier: Apache-2.0

//! `cavfb`: build tables, run single trajectories and campaigns, analyze
//! campaign outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavfb::config::{Preset, RunConfig};
use cavfb::dynamics::{run_trajectory, trajectory_rng};
use cavfb::experiment::{run_campaign, summarize, TrajectorySummary};
use cavfb::io::{self, CampaignFile, Tables, TrajectorySidecar, CAMPAIGN_JSONL, CAMPAIGN_SUMMARY};
use cavfb::stats::welch_t;
use cavfb::{svg, Error, Result};
use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

const OVERRIDES: &str = "Config overrides (one flag per config key)";

#[derive(Debug, Parser)]
#[command(name = "cavfb", version, about = "Cavity-QED atom trapping and radial feedback-cooling simulator")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration; defaults to the selected preset.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Named starting configuration: c1 c2 o1 o2 o3 o4 constant-hi
    /// noiseless-hysteresis delayed-hysteresis pinned-closed pinned-open
    /// pinned-exhi pinned-hi. Ignored when --config is given.
    #[arg(long, global = true, default_value = "c1")]
    preset: String,
    /// Extra override by dotted key, e.g. experiment.n_drops=500.
    /// Applied after the per-key flags. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory holding the tables and calibration report.
    #[arg(long, global = true, default_value = "tables")]
    tables: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build the lookup tables, calibrate diffusion and noise, write the report.
    Tables,
    /// Simulate one drop and write its trajectory CSV and JSON sidecar.
    Run {
        /// Drop index within the campaign seeded by the master seed.
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Also write a static SVG figure.
        #[arg(long)]
        svg: bool,
    },
    /// Run a campaign and write per-drop JSONL plus a summary.
    Batch {
        /// Output directory; defaults to campaigns/<experiment.name>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// Summarize campaigns, fit lifetimes and compare figures of merit.
    Analyze {
        /// Campaign directories or JSONL files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Print the resolved configuration as JSON.
    Config,
}

/// Dotted paths of every leaf in the default configuration.
fn config_keys() -> Vec<String> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, child, out);
                }
            }
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    let value = serde_json::to_value(RunConfig::default()).unwrap_or(Value::Null);
    walk("", &value, &mut out);
    out.retain(|k| k != "schema_version");
    out
}

fn command(keys: &[String]) -> Command {
    let overrides = keys.iter().map(|k| {
        Arg::new(k.clone())
            .long(k.clone())
            .value_name("VALUE")
            .global(true)
            .action(ArgAction::Set)
            .help_heading(OVERRIDES)
            .hide_short_help(true)
    });
    <Cli as clap::CommandFactory>::command().args(overrides)
}

fn override_value<'a>(matches: &'a ArgMatches, key: &str) -> Option<&'a String> {
    if let Some((_, sub)) = matches.subcommand() {
        if let Some(v) = sub.get_one::<String>(key) {
            return Some(v);
        }
    }
    matches.get_one::<String>(key)
}

fn resolve_config(global: &GlobalArgs, matches: &ArgMatches, keys: &[String]) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(Preset::from_name(&global.preset)?),
    };
    config.apply_env()?;
    for key in keys {
        if let Some(v) = override_value(matches, key) {
            config.set(key, v)?;
        }
    }
    for item in &global.set {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_tables(config: &RunConfig, dir: &Path) -> Result<()> {
    let tables = io::build_tables(config)?;
    let report = io::write_tables(dir, config, &tables)?;
    for l in &report.levels {
        println!(
            "{:>5}: U0 = {:.3} mK, fitted w = {:.2} µm (rms {:.1e}), branch from {:.2} µm",
            l.level.to_string(),
            l.depth_k * 1e3,
            l.fitted_waist_m * 1e6,
            l.fit_relative_rms,
            l.branch_start_m * 1e6
        );
    }
    println!(
        "diffusion gain {:.4}, noise gain {:.4}, resolvable amplitude {:.3} µm over τ_r = {:.1} µs",
        report.calibration_gain,
        report.noise_gain,
        report.resolvable_amplitude_m * 1e6,
        report.orbital_period_s * 1e6
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn load(config: &RunConfig, dir: &Path) -> Result<Tables> {
    Ok(io::load_tables(dir, config)?.0)
}

fn cmd_run(config: &RunConfig, tables_dir: &Path, index: usize, out: &Path, with_svg: bool) -> Result<()> {
    let tables = load(config, tables_dir)?;
    let spec = config.campaign_spec(tables.noise.model);
    let mut rng = trajectory_rng(spec.master_seed, index as u64);
    let record = run_trajectory(&spec.sim, &tables.maps, &spec.controller, &spec.measurement, &mut rng)?;
    let sidecar = TrajectorySidecar {
        config: config.clone(),
        tables_fingerprint: config.tables_fingerprint(),
        index,
        termination: record.termination,
        trigger_time_s: record.trigger_time_s,
        end_time_s: record.end_time_s,
        trigger_threshold: spec.controller.trigger_threshold(&tables.maps),
        events: record.events.clone(),
        report: TrajectorySummary::from_record(index, &record, &tables.maps, &spec),
    };
    let stem = format!("trajectory_{index}");
    let (csv, json) = io::write_trajectory(out, &stem, &record, &sidecar)?;
    if with_svg {
        std::fs::write(out.join(format!("{stem}.svg")), svg::trajectory_figure(&record))?;
    }
    let r = &sidecar.report;
    println!(
        "drop {index}: {:?}, trigger {}, dwell {}, {} switches, M {}",
        r.termination,
        fmt_opt(r.trigger_time_s, 1e6, "µs"),
        fmt_opt(r.dwell_s, 1e6, "µs"),
        r.switch_count,
        fmt_opt(r.merit, 1.0, "")
    );
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>, scale: f64, unit: &str) -> String {
    match v {
        Some(x) => format!("{:.3}{}{unit}", x * scale, if unit.is_empty() { "" } else { " " }),
        None => "-".to_string(),
    }
}

fn campaign_svg(dir: &Path, s: &cavfb::experiment::CampaignSummary) -> Result<()> {
    let doc = svg::histograms(&[
        ("M", "M", &s.merit_histogram, true),
        ("M′", "M′", &s.merit_extended_histogram, true),
        ("Dwell time", "dwell (s)", &s.dwell_histogram, false),
    ]);
    std::fs::write(dir.join(format!("{}_histograms.svg", s.name)), doc)?;
    Ok(())
}

fn cmd_batch(config: &RunConfig, tables_dir: &Path, jobs: usize, out: Option<&Path>, with_svg: bool) -> Result<()> {
    let tables = load(config, tables_dir)?;
    let spec = config.campaign_spec(tables.noise.model);
    let result = run_campaign(&spec, &tables.maps, jobs)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| Path::new("campaigns").join(&spec.name));
    let file = CampaignFile {
        config: config.clone(),
        tables_fingerprint: config.tables_fingerprint(),
        noise_gain: spec.measurement.noise.gain,
        summary: result.summary,
    };
    io::write_campaign(&dir, &result.trajectories, &file)?;
    if with_svg {
        campaign_svg(&dir, &file.summary)?;
    }
    print_summary(&file.summary);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_summary(s: &cavfb::experiment::CampaignSummary) {
    println!(
        "{}: {} drops, {} triggered, {} with M, {} with M′",
        s.name, s.n_drops, s.n_triggered, s.merit.n, s.merit_extended.n
    );
    println!(
        "  mean M {:.3} ± {:.3}, mean M′ {:.3} ± {:.3}, dwell {:.1} ± {:.1} µs, ΔE/E {:+.3} ± {:.3}",
        s.merit.mean,
        s.merit.standard_error,
        s.merit_extended.mean,
        s.merit_extended.standard_error,
        s.dwell_s.mean * 1e6,
        s.dwell_s.standard_error * 1e6,
        s.fractional_energy_change.mean,
        s.fractional_energy_change.standard_error
    );
    println!(
        "  lifetime {:.3} ± {:.3} ms ({} escapes, {} censored)",
        s.lifetime.lifetime_s * 1e3,
        s.lifetime.standard_error_s * 1e3,
        s.lifetime.events,
        s.lifetime.censored
    );
}

#[derive(Debug, Serialize)]
struct Comparison {
    a: String,
    b: String,
    /// Welch t of mean(M_a) - mean(M_b).
    merit_t: f64,
    merit_extended_t: f64,
}

#[derive(Debug, Serialize)]
struct Analysis {
    campaigns: Vec<cavfb::experiment::CampaignSummary>,
    comparisons: Vec<Comparison>,
}

fn cmd_analyze(config: &RunConfig, paths: &[PathBuf], out: &Path, with_svg: bool) -> Result<()> {
    let mut campaigns = Vec::new();
    let mut merits = Vec::new();
    for path in paths {
        let (jsonl, summary_path) = if path.is_dir() {
            (path.join(CAMPAIGN_JSONL), path.join(CAMPAIGN_SUMMARY))
        } else {
            (path.clone(), path.with_file_name(CAMPAIGN_SUMMARY))
        };
        let trajectories = io::read_campaign_jsonl(&jsonl)?;
        let mut spec = if summary_path.exists() {
            io::read_campaign_config(&summary_path)?.campaign_spec(cavfb::detection::NoiseModel::noiseless())
        } else {
            let mut s = config.campaign_spec(cavfb::detection::NoiseModel::noiseless());
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            s
        };
        spec.n_drops = trajectories.len();
        let summary = summarize(&spec, &trajectories);
        let m: Vec<f64> = trajectories.iter().filter_map(|t| t.merit).collect();
        let me: Vec<f64> = trajectories.iter().filter_map(|t| t.merit_extended).collect();
        merits.push((summary.name.clone(), m, me));
        campaigns.push(summary);
    }
    let mut comparisons = Vec::new();
    for i in 0..merits.len() {
        for j in i + 1..merits.len() {
            comparisons.push(Comparison {
                a: merits[i].0.clone(),
                b: merits[j].0.clone(),
                merit_t: welch_t(&merits[i].1, &merits[j].1),
                merit_extended_t: welch_t(&merits[i].2, &merits[j].2),
            });
        }
    }
    std::fs::create_dir_all(out)?;
    for s in &campaigns {
        print_summary(s);
        if with_svg {
            campaign_svg(out, s)?;
        }
    }
    for c in &comparisons {
        println!("{} vs {}: Welch t(M) = {:.2}, t(M′) = {:.2}", c.a, c.b, c.merit_t, c.merit_extended_t);
    }
    write_json(&out.join("analysis.json"), &Analysis { campaigns, comparisons })?;
    println!("wrote {}", out.join("analysis.json").display());
    Ok(())
}

fn dispatch(cli: &Cli, matches: &ArgMatches, keys: &[String]) -> Result<()> {
    let config = resolve_config(&cli.global, matches, keys)?;
    let jobs = cli
        .global
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Cmd::Tables => cmd_tables(&config, &cli.global.tables),
        Cmd::Run { index, out, svg } => cmd_run(&config, &cli.global.tables, *index, out, *svg),
        Cmd::Batch { out, svg } => cmd_batch(&config, &cli.global.tables, jobs, out.as_deref(), *svg),
        Cmd::Analyze { paths, out, svg } => cmd_analyze(&config, paths, out, *svg),
        Cmd::Config => {
            println!("{}", config.to_json());
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let keys = config_keys();
    let matches = match command(&keys).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli, &matches, &keys) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
