//! The asymptotic decorrelated channel power gain `ρ_K`, the positive root of
//! `ξ_K(ρ) = Σ λ_n / (ρ + (K-1)λ_n) = 1`.

use crate::{Error, Result};

/// Default stopping tolerance on `|ξ_K(ρ) - 1|`.
pub const DEFAULT_TOL: f64 = 1e-8;

fn check_inputs(eigenvalues: &[f64], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("ξ_K needs K >= 2, got {k}")));
    }
    if let Some(v) = eigenvalues.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("eigenvalue {v} is not a finite nonnegative number")));
    }
    Ok(())
}

/// `ξ_K(ρ)`; zero eigenvalues contribute nothing.
pub fn xi(rho: f64, eigenvalues: &[f64], k: usize) -> Result<f64> {
    check_inputs(eigenvalues, k)?;
    Ok(xi_unchecked(rho, eigenvalues, (k - 1) as f64))
}

/// `J_K(ρ) = dξ_K/dρ`.
pub fn xi_derivative(rho: f64, eigenvalues: &[f64], k: usize) -> Result<f64> {
    check_inputs(eigenvalues, k)?;
    Ok(xi_derivative_unchecked(rho, eigenvalues, (k - 1) as f64))
}

fn xi_unchecked(rho: f64, eigenvalues: &[f64], km1: f64) -> f64 {
    eigenvalues.iter().filter(|&&l| l > 0.0).map(|&l| l / (rho + km1 * l)).sum()
}

fn xi_derivative_unchecked(rho: f64, eigenvalues: &[f64], km1: f64) -> f64 {
    -eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let d = rho + km1 * l;
            l / (d * d)
        })
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoSolveReport {
    pub rho: f64,
    /// Newton updates performed.
    pub iterations: usize,
    /// `|ξ_K(ρ) - 1|` at the returned `ρ`; zero for `K = 1`.
    pub residual: f64,
    /// Every iterate starting from `ρ⁽⁰⁾ = 0`.
    pub iterate_trace: Vec<f64>,
    /// Set when `ξ_K(0) ≤ 1`, so no positive root exists and `ρ = 0` is returned.
    pub degenerate: bool,
}

/// Newton's method from `ρ = 0` on `ξ_K(ρ) = 1`.
///
/// Stops when the residual drops to `tol`, after `max_iter` updates, or when
/// the iterate stops increasing in floating point. `K = 1` returns `Σλ`.
pub fn solve_rho(eigenvalues: &[f64], k: usize, max_iter: usize, tol: f64) -> Result<RhoSolveReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("user count K must be at least 1".into()));
    }
    if k == 1 {
        check_inputs(eigenvalues, 2)?;
        let rho = eigenvalues.iter().sum();
        return Ok(RhoSolveReport { rho, iterations: 0, residual: 0.0, iterate_trace: vec![rho], degenerate: false });
    }
    check_inputs(eigenvalues, k)?;
    let km1 = (k - 1) as f64;
    let positive = eigenvalues.iter().filter(|&&l| l > 0.0).count();
    if positive as f64 <= km1 {
        return Ok(RhoSolveReport {
            rho: 0.0,
            iterations: 0,
            residual: (positive as f64 / km1 - 1.0).abs(),
            iterate_trace: vec![0.0],
            degenerate: true,
        });
    }
    let mut rho = 0.0;
    let mut trace = vec![rho];
    let mut iterations = 0;
    let mut f = xi_unchecked(rho, eigenvalues, km1) - 1.0;
    while iterations < max_iter && f > tol {
        let next = rho - f / xi_derivative_unchecked(rho, eigenvalues, km1);
        if !(next > rho) {
            break;
        }
        rho = next;
        trace.push(rho);
        iterations += 1;
        f = xi_unchecked(rho, eigenvalues, km1) - 1.0;
    }
    Ok(RhoSolveReport { rho, iterations, residual: f.abs(), iterate_trace: trace, degenerate: false })
}
