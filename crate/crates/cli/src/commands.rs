use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use cebap_core::angular::{check_feasible, upa_dense, upa_sparse, AngularGrid, ArrayLayout, Region};
use cebap_core::asymptotic::{solve_rho, DEFAULT_TOL};
use cebap_core::cebap::{lobpo, LobpoConfig};
use cebap_core::channel::{covariance, dbm_to_watts, Aps, Scenario, UserCount};
use cebap_core::montecarlo::{ergodic_utility, write_results_csv, ResultRow, WeightsPolicy};
use cebap_core::precoding::UtilityKind;
use cebap_core::vmf::{vmf_aps, VmfParams};
use cebap_core::{Error, Result};
use serde::Serialize;

use crate::{
    Command, EvaluateArgs, GenVmfArgs, GeometryArgs, OptimizeArgs, ReportArgs, RhoReportArgs, Utility,
};

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
}

fn prepare_run_dir(dir: &Path, command: &Command) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest { tool: "cebap", version: env!("CARGO_PKG_VERSION"), command };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

pub fn run(command: &Command) -> Result<ExitCode> {
    match command {
        Command::GenVmfScenario(a) => {
            prepare_run_dir(&a.out.out_dir, command)?;
            gen_vmf(a)
        }
        Command::Optimize(a) => {
            prepare_run_dir(&a.out.out_dir, command)?;
            optimize(a)
        }
        Command::Evaluate(a) => {
            prepare_run_dir(&a.out.out_dir, command)?;
            evaluate(a)
        }
        Command::RhoReport(a) => {
            prepare_run_dir(&a.out.out_dir, command)?;
            rho_report(a)
        }
        Command::Report(a) => {
            prepare_run_dir(&a.out.out_dir, command)?;
            report(a)
        }
    }
}

fn gen_vmf(a: &GenVmfArgs) -> Result<ExitCode> {
    let grid = AngularGrid::new(a.n_elevation, a.n_azimuth, a.wavelength)?;
    let clusters: Vec<(f64, [f64; 3], f64)> = if a.clusters.is_empty() {
        vec![(a.concentration, a.direction, a.beta)]
    } else {
        a.clusters.iter().map(|c| (c.concentration, c.direction, c.beta)).collect()
    };
    let m = clusters.len();
    let mut columns = Vec::with_capacity(m);
    for (nu0, dir, beta) in clusters {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("cluster power must be positive, got {beta}")));
        }
        // Scaled by M so the cell spectrum (equal user probabilities) sums the cluster powers.
        let params = VmfParams::new(dir, nu0, beta * m as f64, grid.wavenumber())?;
        columns.push(vmf_aps(&grid, &params)?.values().to_vec());
    }
    let scenario = Scenario::new(
        grid,
        columns,
        vec![1.0 / m as f64; m],
        UserCount { k0: a.k0, max: a.max_users },
        dbm_to_watts(a.noise_power_dbm),
        dbm_to_watts(a.tx_power_dbm),
    )?;
    let path = a.out.out_dir.join("scenario.json");
    scenario.save(&path)?;
    println!("wrote {} (beta = {:.6e})", path.display(), scenario.aps().total_power());
    Ok(ExitCode::SUCCESS)
}

fn region(g: &GeometryArgs, wavelength: f64) -> Result<Region> {
    Region::square(g.region_wavelengths * wavelength, g.min_spacing_wavelengths * wavelength)
}

fn resolve_layout(spec: &str, g: &GeometryArgs, wavelength: f64) -> Result<(String, ArrayLayout)> {
    let region = region(g, wavelength)?;
    let (name, layout) = match spec {
        "upa-dense" => (spec.to_owned(), upa_dense(g.rows, g.cols, region.min_spacing, region)?),
        "upa-sparse" => (spec.to_owned(), upa_sparse(g.rows, g.cols, region)?),
        _ => {
            let (name, path) = match spec.split_once('=') {
                Some((n, p)) => (n.to_owned(), Path::new(p)),
                None => {
                    let p = Path::new(spec);
                    (p.file_stem().map_or_else(|| spec.to_owned(), |s| s.to_string_lossy().into_owned()), p)
                }
            };
            let file = File::open(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            (name, ArrayLayout::read_csv(std::io::BufReader::new(file), region)?)
        }
    };
    if name.is_empty() || name.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!("layout name {name:?} must be nonempty without commas or quotes")));
    }
    let feasibility = check_feasible(&layout);
    if !feasibility.is_feasible() {
        return Err(Error::Infeasible(format!("layout {name}: {:?}", feasibility.violations[0])));
    }
    Ok((name, layout))
}

fn db_relative(value: f64, reference: f64) -> f64 {
    10.0 * (value / reference).log10()
}

fn optimize(a: &OptimizeArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&a.scenario)?;
    let grid = scenario.grid();
    let lambda = grid.wavelength();
    let aps = scenario.aps();
    let init = match &a.init {
        Some(p) => resolve_layout(&p.to_string_lossy(), &a.geometry, lambda)?.1,
        None => upa_sparse(a.geometry.rows, a.geometry.cols, region(&a.geometry, lambda)?)?,
    };
    let config = LobpoConfig {
        initial_penalty: a.initial_penalty,
        penalty_decay: a.penalty_decay,
        displacement_tol: a.displacement_tol_wavelengths * lambda,
        initial_step: a.initial_step_wavelengths * lambda,
        armijo_control: a.armijo_control,
        inner_iters: a.inner_iters,
        newton_iters: a.newton_iters,
        max_outer_iters: a.max_outer_iters,
        ..LobpoConfig::for_wavelength(lambda)
    };
    let outcome = lobpo(grid, &aps, &config, &init)?;
    let dir = &a.out.out_dir;
    outcome.layout.write_csv(BufWriter::new(File::create(dir.join("layout.csv"))?))?;
    outcome.trace.write_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
    outcome.trace.write_layouts(&dir.join("layouts"))?;
    let beta = aps.total_power();
    if outcome.degenerate {
        eprintln!(
            "warning: the covariance has at most N-1 nonzero eigenvalues, so rho_N = 0 for every layout; \
             wrote the initial layout"
        );
        return Ok(ExitCode::from(2));
    }
    println!("rho_N initial: {:.4} dB re beta", db_relative(outcome.initial_rho(), beta));
    println!("rho_N final:   {:.4} dB re beta", db_relative(outcome.final_rho(), beta));
    println!(
        "outer rounds: {}{}",
        outcome.trace.rounds.len() - 1,
        if outcome.converged { "" } else { " (round cap reached)" }
    );
    Ok(ExitCode::SUCCESS)
}

fn weights_policy(spec: &str, seed: u64) -> Result<WeightsPolicy> {
    match spec {
        "unit" => Ok(WeightsPolicy::Unit),
        "random" => Ok(WeightsPolicy::Random { seed }),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad weight {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()
            .map(WeightsPolicy::Fixed),
    }
}

fn utility_kind(u: Utility) -> UtilityKind {
    match u {
        Utility::SumRate => UtilityKind::WeightedSumRate,
        Utility::MinSinr => UtilityKind::MinWeightedSinr,
    }
}

fn evaluate(a: &EvaluateArgs) -> Result<ExitCode> {
    if a.samples == 0 {
        return Err(Error::InvalidArgument("--samples must be positive".into()));
    }
    let scenario = Scenario::load(&a.scenario)?;
    let lambda = scenario.grid().wavelength();
    let policy = weights_policy(&a.weights, a.seed)?;
    let mut rows = Vec::new();
    for spec in &a.selection.layouts {
        let (name, layout) = resolve_layout(spec, &a.selection.geometry, lambda)?;
        for &u in &a.utilities {
            let kind = utility_kind(u);
            let estimate = ergodic_utility(&scenario, &layout, kind, &policy, a.samples, a.seed)?;
            println!(
                "{name:>16} {:>9}: {:.6e} ± {:.2e} ({} redraws)",
                kind.name(),
                estimate.mean,
                estimate.std_error,
                estimate.n_redraws
            );
            rows.push(ResultRow { layout_name: name.clone(), utility: kind, estimate });
        }
    }
    write_results_csv(&rows, BufWriter::new(File::create(a.out.out_dir.join("results.csv"))?))?;
    Ok(ExitCode::SUCCESS)
}

fn eigenvalues_of(grid: &AngularGrid, layout: &ArrayLayout, aps: &Aps) -> Result<Vec<f64>> {
    Ok(covariance(grid, layout, aps)?.eigenvalues().to_vec())
}

fn rho_report(a: &RhoReportArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&a.scenario)?;
    let grid = scenario.grid();
    let aps = scenario.aps();
    let beta = aps.total_power();
    let mut out = String::from("layout_name,k,rho,rho_db,degenerate,iterations\n");
    for spec in &a.selection.layouts {
        let (name, layout) = resolve_layout(spec, &a.selection.geometry, grid.wavelength())?;
        let eigs = eigenvalues_of(grid, &layout, &aps)?;
        for k in 1..=layout.len() {
            let r = solve_rho(&eigs, k, a.newton_iters, DEFAULT_TOL)?;
            let _ = writeln!(
                out,
                "{name},{k},{:.12e},{:.6},{},{}",
                r.rho,
                db_relative(r.rho, beta),
                r.degenerate,
                r.iterations
            );
            if k == layout.len() {
                println!("{name:>16}: rho_N = {:.4} dB re beta", db_relative(r.rho, beta));
            }
        }
    }
    std::fs::write(a.out.out_dir.join("rho.csv"), out)?;
    Ok(ExitCode::SUCCESS)
}

fn report(a: &ReportArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&a.scenario)?;
    let grid = scenario.grid();
    let aps = scenario.aps();
    let beta = aps.total_power();
    let (name, layout) = resolve_layout(&a.layout, &a.geometry, grid.wavelength())?;
    let eigs = eigenvalues_of(grid, &layout, &aps)?;
    let mut out = String::from("index,eigenvalue,normalized\n");
    for (i, l) in eigs.iter().enumerate() {
        let normalized = if beta > 0.0 { l / beta } else { 0.0 };
        let _ = writeln!(out, "{},{:.12e},{:.12e}", i + 1, l, normalized);
    }
    std::fs::write(a.out.out_dir.join("eigenvalues.csv"), out)?;

    let k0 = grid.wavenumber();
    let density = grid.density(aps.values())?;
    let mut out = String::from("kx_norm,ky_norm,apsd\n");
    for (k, d) in grid.wavevectors().iter().zip(&density) {
        let _ = writeln!(out, "{:.12e},{:.12e},{:.12e}", k[0] / k0, k[1] / k0, d);
    }
    std::fs::write(a.out.out_dir.join("apsd.csv"), out)?;
    println!(
        "{name}: {} eigenvalues, sum {:.6e} (N beta = {:.6e}), spread {:.4e}",
        eigs.len(),
        eigs.iter().sum::<f64>(),
        layout.len() as f64 * beta,
        eigs[0] / eigs[eigs.len() - 1]
    );
    Ok(ExitCode::SUCCESS)
}
