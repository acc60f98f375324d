//! Antenna position optimization: log-barrier penalty, projected-free gradient
//! ascent with backtracking, and the penalty-continuation outer loop.

mod barrier;
mod generic;
mod gradient;

pub use barrier::{barrier_gradient, log_barrier};
pub use generic::{lobpo_generic, FiniteDifference};
pub use gradient::{rho_gradient, rho_gradient_with, rho_n, s_matrices, RhoGradient};

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angular::{upa_sparse, AngularGrid, ArrayLayout, Region};
use crate::channel::Aps;
use crate::{Error, Result};

/// Inner loop stops once the stacked gradient norm falls below this.
const STATIONARY_NORM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobpoConfig {
    /// `α0`.
    pub initial_penalty: f64,
    /// `τ`.
    pub penalty_decay: f64,
    /// Outer loop stops when consecutive layouts differ by less than this (meters).
    pub displacement_tol: f64,
    /// Largest trial displacement per inner step (meters).
    pub initial_step: f64,
    /// `η` in the sufficient-increase test.
    pub armijo_control: f64,
    /// `I`.
    pub inner_iters: usize,
    /// `I_c`.
    pub newton_iters: usize,
    pub newton_tol: f64,
    pub max_backtracks: usize,
    pub max_outer_iters: usize,
}

impl LobpoConfig {
    /// Published settings scaled to the wavelength: `α0 = 1`, `τ = 0.2`, steps `0.2λ`,
    /// tolerance `0.01λ`, `η = 1e-4`, `I = 25`, `I_c = 20`.
    pub fn for_wavelength(wavelength: f64) -> Self {
        LobpoConfig {
            initial_penalty: 1.0,
            penalty_decay: 0.2,
            displacement_tol: 0.01 * wavelength,
            initial_step: 0.2 * wavelength,
            armijo_control: 1e-4,
            inner_iters: 25,
            newton_iters: 20,
            newton_tol: 1e-12,
            max_backtracks: 30,
            max_outer_iters: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.initial_penalty, self.displacement_tol, self.initial_step];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "penalty, displacement tolerance and step must be positive".into(),
            ));
        }
        if !(self.penalty_decay > 0.0 && self.penalty_decay < 1.0) {
            return Err(Error::InvalidArgument(format!("penalty decay must lie in (0, 1), got {}", self.penalty_decay)));
        }
        if !(self.armijo_control > 0.0 && self.armijo_control < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Armijo control must lie in (0, 1), got {}",
                self.armijo_control
            )));
        }
        if self.inner_iters == 0 || self.newton_iters == 0 || self.max_outer_iters == 0 {
            return Err(Error::InvalidArgument("iteration counts must be positive".into()));
        }
        if !(self.newton_tol >= 0.0) {
            return Err(Error::InvalidArgument("Newton tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Smooth objective maximized under the log-barrier.
pub trait Objective {
    fn value(&self, layout: &ArrayLayout) -> Result<f64>;

    /// Value and gradient stacked as all x coordinates then all y coordinates.
    fn value_and_gradient(&self, layout: &ArrayLayout) -> Result<(f64, Vec<f64>)>;
}

/// `ρ_N` with its analytic gradient; degenerate layouts score zero with zero gradient.
pub struct RhoObjective<'a> {
    pub grid: &'a AngularGrid,
    pub aps: &'a Aps,
    pub newton_iters: usize,
    pub newton_tol: f64,
}

impl Objective for RhoObjective<'_> {
    fn value(&self, layout: &ArrayLayout) -> Result<f64> {
        rho_n(self.grid, layout, self.aps, self.newton_iters, self.newton_tol)
    }

    fn value_and_gradient(&self, layout: &ArrayLayout) -> Result<(f64, Vec<f64>)> {
        let eval = gradient::evaluate_rho(self.grid, layout, self.aps, self.newton_iters, self.newton_tol)?;
        match gradient::gradient_from(self.grid, &eval) {
            Ok(g) => Ok((g.rho, g.dx.into_iter().chain(g.dy).collect())),
            Err(Error::Degenerate) => Ok((0.0, vec![0.0; 2 * layout.len()])),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AscentOutcome {
    pub layout: ArrayLayout,
    pub accepted_steps: usize,
    /// Penalized objective at the start and end.
    pub initial_value: f64,
    pub final_value: f64,
}

/// Normalized gradient ascent on `f + α·L_S` with halving backtracking.
pub fn ascend<O: Objective + ?Sized>(
    objective: &O,
    init: &ArrayLayout,
    penalty: f64,
    config: &LobpoConfig,
) -> Result<AscentOutcome> {
    if !init.is_strictly_interior() {
        return Err(Error::Infeasible("ascent must start strictly inside the feasible set".into()));
    }
    let mut layout = init.clone();
    let mut accepted_steps = 0;
    let (mut f, _) = objective.value_and_gradient(&layout)?;
    let mut value = f + penalty * log_barrier(&layout);
    let initial_value = value;
    for _ in 0..config.inner_iters {
        let (fv, grad_f) = objective.value_and_gradient(&layout)?;
        f = fv;
        value = f + penalty * log_barrier(&layout);
        let (bx, by) = barrier_gradient(&layout)?;
        let g: Vec<f64> = grad_f.iter().zip(bx.iter().chain(&by)).map(|(a, b)| a + penalty * b).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= STATIONARY_NORM) {
            break;
        }
        let dir: Vec<f64> = g.iter().map(|v| v / norm).collect();
        let mut step = config.initial_step;
        let mut next = None;
        for _ in 0..=config.max_backtracks {
            let trial = layout.displaced(&dir, step);
            if trial.is_strictly_interior() {
                let trial_value = objective.value(&trial)? + penalty * log_barrier(&trial);
                if trial_value >= value + config.armijo_control * step * norm {
                    next = Some((trial, trial_value));
                    break;
                }
            }
            step /= 2.0;
        }
        match next {
            Some((trial, trial_value)) => {
                layout = trial;
                value = trial_value;
                accepted_steps += 1;
            }
            // The same point would be retried with the same gradient.
            None => break,
        }
    }
    Ok(AscentOutcome { layout, accepted_steps, initial_value, final_value: value })
}

/// One run of the inner ascent for `ρ_N` at penalty weight `α`.
pub fn gradient_ascent(
    grid: &AngularGrid,
    aps: &Aps,
    init: &ArrayLayout,
    penalty: f64,
    config: &LobpoConfig,
) -> Result<ArrayLayout> {
    config.validate()?;
    let objective = RhoObjective { grid, aps, newton_iters: config.newton_iters, newton_tol: config.newton_tol };
    Ok(ascend(&objective, init, penalty, config)?.layout)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub alpha: f64,
    pub rho_n: f64,
    pub displacement: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRound {
    pub row: TraceRow,
    pub layout: ArrayLayout,
}

/// Per-round record of the outer loop; round 0 is the initialization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizationTrace {
    pub rounds: Vec<TraceRound>,
}

impl OptimizationTrace {
    pub fn rows(&self) -> Vec<TraceRow> {
        self.rounds.iter().map(|r| r.row).collect()
    }

    /// `outer_iter,alpha,rho_n,displacement_m`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["outer_iter", "alpha", "rho_n", "displacement_m"])?;
        for r in &self.rounds {
            let r = r.row;
            w.write_record([
                r.outer_iter.to_string(),
                format!("{:.12e}", r.alpha),
                format!("{:.12e}", r.rho_n),
                format!("{:.12e}", r.displacement),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
        let mut r = csv::Reader::from_reader(input);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if headers != ["outer_iter", "alpha", "rho_n", "displacement_m"] {
            return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")));
        r.records()
            .map(|rec| {
                let rec = rec?;
                Ok(TraceRow {
                    outer_iter: rec[0].parse().map_err(|e| Error::Parse(format!("bad round {:?}: {e}", &rec[0])))?,
                    alpha: parse(&rec[1])?,
                    rho_n: parse(&rec[2])?,
                    displacement: parse(&rec[3])?,
                })
            })
            .collect()
    }

    /// Writes `iter_000.csv`, `iter_001.csv`, ... into `dir`.
    pub fn write_layouts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for r in &self.rounds {
            let file = std::fs::File::create(dir.join(format!("iter_{:03}.csv", r.row.outer_iter)))?;
            r.layout.write_csv(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LobpoOutcome {
    pub layout: ArrayLayout,
    pub trace: OptimizationTrace,
    /// `ρ_N` vanished at the initialization, so the initialization was returned.
    pub degenerate: bool,
    /// The displacement test fired before the round cap.
    pub converged: bool,
}

impl LobpoOutcome {
    pub fn final_rho(&self) -> f64 {
        self.trace.rounds.last().map_or(0.0, |r| r.row.rho_n)
    }

    pub fn initial_rho(&self) -> f64 {
        self.trace.rounds.first().map_or(0.0, |r| r.row.rho_n)
    }
}

pub(crate) fn run_outer_loop<O: Objective + ?Sized>(
    objective: &O,
    init: &ArrayLayout,
    config: &LobpoConfig,
) -> Result<LobpoOutcome> {
    config.validate()?;
    if !init.is_strictly_interior() {
        return Err(Error::Infeasible("initial layout must be strictly interior".into()));
    }
    let mut alpha = config.initial_penalty;
    let mut layout = init.clone();
    let mut trace = OptimizationTrace::default();
    trace.rounds.push(TraceRound {
        row: TraceRow { outer_iter: 0, alpha, rho_n: objective.value(&layout)?, displacement: 0.0 },
        layout: layout.clone(),
    });
    let mut converged = false;
    for round in 1..=config.max_outer_iters {
        let next = ascend(objective, &layout, alpha, config)?.layout;
        let displacement = next.distance_to(&layout);
        trace.rounds.push(TraceRound {
            row: TraceRow { outer_iter: round, alpha, rho_n: objective.value(&next)?, displacement },
            layout: next.clone(),
        });
        layout = next;
        alpha *= config.penalty_decay;
        if displacement < config.displacement_tol {
            converged = true;
            break;
        }
    }
    Ok(LobpoOutcome { layout, trace, degenerate: false, converged })
}

/// Penalty-continuation maximization of `ρ_N` from `init`.
pub fn lobpo(grid: &AngularGrid, aps: &Aps, config: &LobpoConfig, init: &ArrayLayout) -> Result<LobpoOutcome> {
    config.validate()?;
    let objective = RhoObjective { grid, aps, newton_iters: config.newton_iters, newton_tol: config.newton_tol };
    let eval = gradient::evaluate_rho(grid, init, aps, config.newton_iters, config.newton_tol)?;
    if eval.report.degenerate {
        if !init.is_strictly_interior() {
            return Err(Error::Infeasible("initial layout must be strictly interior".into()));
        }
        let trace = OptimizationTrace {
            rounds: vec![TraceRound {
                row: TraceRow { outer_iter: 0, alpha: config.initial_penalty, rho_n: 0.0, displacement: 0.0 },
                layout: init.clone(),
            }],
        };
        return Ok(LobpoOutcome { layout: init.clone(), trace, degenerate: true, converged: false });
    }
    run_outer_loop(&objective, init, config)
}

/// [`lobpo`] started from the region-filling lattice.
pub fn lobpo_from_sparse(
    grid: &AngularGrid,
    aps: &Aps,
    config: &LobpoConfig,
    rows: usize,
    cols: usize,
    region: Region,
) -> Result<LobpoOutcome> {
    lobpo(grid, aps, config, &upa_sparse(rows, cols, region)?)
}
