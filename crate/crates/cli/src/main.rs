//! `cebap`: scenario generation, antenna position optimization and Monte-Carlo evaluation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Parser)]
#[command(name = "cebap", version, about = "Movable-antenna placement by covariance eigenvalue balancing")]
#[command(after_help = "Set CEBAP_THREADS to limit the number of Monte-Carlo worker threads.\n\
Exit codes: 0 success, 1 usage or input error, 2 numeric or degenerate failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Write a scenario whose angular power spectrum follows one or more vMF clusters.
    GenVmfScenario(GenVmfArgs),
    /// Optimize antenna positions for a scenario.
    Optimize(OptimizeArgs),
    /// Estimate ergodic utilities of one or more layouts.
    Evaluate(EvaluateArgs),
    /// Tabulate the asymptotic decorrelated gain for every user count.
    RhoReport(RhoReportArgs),
    /// Write the covariance eigenvalue spectrum and the angular power density.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct OutDir {
    /// Run directory; created if missing. A manifest.json with the full invocation is written here.
    #[arg(long, short = 'o')]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GeometryArgs {
    /// Antenna lattice rows (along y).
    #[arg(long, default_value_t = 4)]
    rows: usize,
    /// Antenna lattice columns (along x).
    #[arg(long, default_value_t = 4)]
    cols: usize,
    /// Side of the square moving region in wavelengths.
    #[arg(long, default_value_t = 4.0)]
    region_wavelengths: f64,
    /// Minimum antenna spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    min_spacing_wavelengths: f64,
}

#[derive(Debug, Args, Serialize)]
struct GenVmfArgs {
    #[command(flatten)]
    out: OutDir,
    /// Concentration in meters.
    #[arg(long, default_value_t = 0.1)]
    concentration: f64,
    /// Mean direction as x,y,z; normalized before use.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0.5,0.8660254037844386")]
    direction: [f64; 3],
    /// Average channel power gain per antenna (linear).
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Extra clusters `concentration:x,y,z:beta`; each becomes a subregion with equal user probability.
    /// When given, the single-cluster flags are ignored.
    #[arg(long = "cluster", value_parser = parse_cluster)]
    clusters: Vec<ClusterSpec>,
    #[arg(long, default_value_t = 50)]
    n_elevation: usize,
    #[arg(long, default_value_t = 80)]
    n_azimuth: usize,
    /// Carrier wavelength in meters.
    #[arg(long, default_value_t = 0.06)]
    wavelength: f64,
    /// Mean parameter of the truncated-Poisson user count.
    #[arg(long, default_value_t = 12.0)]
    k0: f64,
    /// Largest user count.
    #[arg(long, default_value_t = 16)]
    max_users: usize,
    #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
    tx_power_dbm: f64,
    #[arg(long, default_value_t = -90.0, allow_hyphen_values = true)]
    noise_power_dbm: f64,
}

#[derive(Clone, Debug, Serialize)]
struct ClusterSpec {
    concentration: f64,
    direction: [f64; 3],
    beta: f64,
}

#[derive(Debug, Args, Serialize)]
struct OptimizeArgs {
    #[command(flatten)]
    out: OutDir,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Initial layout CSV; defaults to the region-filling lattice.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    initial_penalty: f64,
    #[arg(long, default_value_t = 0.2)]
    penalty_decay: f64,
    /// Outer-loop stopping displacement in wavelengths.
    #[arg(long, default_value_t = 0.01)]
    displacement_tol_wavelengths: f64,
    /// Initial inner step in wavelengths.
    #[arg(long, default_value_t = 0.2)]
    initial_step_wavelengths: f64,
    #[arg(long, default_value_t = 1e-4)]
    armijo_control: f64,
    #[arg(long, default_value_t = 25)]
    inner_iters: usize,
    #[arg(long, default_value_t = 20)]
    newton_iters: usize,
    #[arg(long, default_value_t = 50)]
    max_outer_iters: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Utility {
    SumRate,
    MinSinr,
}

#[derive(Debug, Args, Serialize)]
struct LayoutSelection {
    /// Layouts as `upa-dense`, `upa-sparse`, `NAME=PATH` or `PATH`.
    #[arg(long = "layout", required = true)]
    layouts: Vec<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    out: OutDir,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    selection: LayoutSelection,
    /// Utilities to evaluate; repeat for several.
    #[arg(long = "utility", value_enum, default_values_t = [Utility::SumRate])]
    utilities: Vec<Utility>,
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// `unit`, `random` (seeded from --seed) or a comma-separated list of per-user weights.
    #[arg(long, default_value = "unit")]
    weights: String,
}

#[derive(Debug, Args, Serialize)]
struct RhoReportArgs {
    #[command(flatten)]
    out: OutDir,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    selection: LayoutSelection,
    #[arg(long, default_value_t = 100)]
    newton_iters: usize,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[command(flatten)]
    out: OutDir,
    #[arg(long)]
    scenario: PathBuf,
    /// A single layout as `upa-dense`, `upa-sparse`, `NAME=PATH` or `PATH`.
    #[arg(long)]
    layout: String,
    #[command(flatten)]
    geometry: GeometryArgs,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.trim().parse().map_err(|e| format!("bad component {p:?}: {e}"))?;
    }
    Ok(v)
}

fn parse_cluster(s: &str) -> Result<ClusterSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected concentration:x,y,z:beta, got {s:?}"));
    }
    Ok(ClusterSpec {
        concentration: parts[0].parse().map_err(|e| format!("bad concentration {:?}: {e}", parts[0]))?,
        direction: parse_vec3(parts[1])?,
        beta: parts[2].parse().map_err(|e| format!("bad beta {:?}: {e}", parts[2]))?,
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("CEBAP_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| format!("CEBAP_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err("CEBAP_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match commands::run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
