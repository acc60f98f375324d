use crate::angular::{AngularGrid, ArrayLayout};
use crate::asymptotic::{solve_rho, RhoSolveReport};
use crate::channel::{hermitize, weighted_frm, Aps, Covariance};
use crate::{CMatrix, Complex64, Error, Result};

/// `(Sˣ, Sʸ)` with `Sᵗ = Q̄ᴴ Diag(j κᵗ) Diag(b) Q̄`.
pub fn s_matrices(grid: &AngularGrid, layout: &ArrayLayout, aps: &Aps) -> Result<(CMatrix, CMatrix)> {
    let w = weighted_frm(grid, layout, aps.values())?;
    Ok((s_matrix(grid, &w, 0), s_matrix(grid, &w, 1)))
}

fn s_matrix(grid: &AngularGrid, w: &CMatrix, axis: usize) -> CMatrix {
    let mut scaled = w.clone();
    for (l, k) in grid.wavevectors().iter().enumerate() {
        scaled.row_mut(l).scale_mut(k[axis]);
    }
    let mut s = w.ad_mul(&scaled);
    // Wᴴ Diag(κ) W is Hermitian; multiplying by j makes it skew-Hermitian.
    hermitize(&mut s);
    s.map(|z| Complex64::new(-z.im, z.re))
}

#[derive(Clone, Debug)]
pub struct RhoGradient {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub rho: f64,
}

/// Value of `ρ_N` together with the solver report and covariance it came from.
pub(crate) struct RhoEvaluation {
    pub covariance: Covariance,
    pub report: RhoSolveReport,
    pub weighted: CMatrix,
}

pub(crate) fn evaluate_rho(
    grid: &AngularGrid,
    layout: &ArrayLayout,
    aps: &Aps,
    newton_iters: usize,
    newton_tol: f64,
) -> Result<RhoEvaluation> {
    let weighted = weighted_frm(grid, layout, aps.values())?;
    let mut g = weighted.ad_mul(&weighted);
    hermitize(&mut g);
    let covariance = Covariance::from_matrix(g)?;
    let report = solve_rho(covariance.eigenvalues(), layout.len(), newton_iters, newton_tol)?;
    Ok(RhoEvaluation { covariance, report, weighted })
}

/// `ρ_N` of a layout, zero when degenerate.
pub fn rho_n(grid: &AngularGrid, layout: &ArrayLayout, aps: &Aps, newton_iters: usize, newton_tol: f64) -> Result<f64> {
    Ok(evaluate_rho(grid, layout, aps, newton_iters, newton_tol)?.report.rho)
}

pub(crate) fn gradient_from(grid: &AngularGrid, eval: &RhoEvaluation) -> Result<RhoGradient> {
    let rho = eval.report.rho;
    if eval.report.degenerate || !(rho > 0.0) {
        return Err(Error::Degenerate);
    }
    let n = eval.covariance.len();
    let lam = eval.covariance.eigenvalues();
    let u = eval.covariance.eigenvectors();
    let factor: Vec<f64> = lam.iter().map(|&l| 1.0 / (1.0 + (n as f64 - 1.0) * l / rho).powi(2)).collect();
    let denom: f64 = lam.iter().zip(&factor).map(|(l, f)| l * f).sum();
    let scaled = CMatrix::from_fn(n, n, |r, c| u[(r, c)] * factor[c]);
    let y_inv2 = scaled * u.adjoint();
    let grads: Vec<Vec<f64>> = [0, 1]
        .iter()
        .map(|&axis| {
            let s = s_matrix(grid, &eval.weighted, axis);
            (0..n)
                .map(|i| {
                    let d: Complex64 = (0..n).map(|m| y_inv2[(i, m)] * s[(m, i)]).sum();
                    2.0 * rho * d.re / denom
                })
                .collect()
        })
        .collect();
    let mut it = grads.into_iter();
    Ok(RhoGradient { dx: it.next().unwrap(), dy: it.next().unwrap(), rho })
}

/// Analytic gradient of `ρ_N` with respect to antenna coordinates.
pub fn rho_gradient_with(
    grid: &AngularGrid,
    layout: &ArrayLayout,
    aps: &Aps,
    newton_iters: usize,
    newton_tol: f64,
) -> Result<RhoGradient> {
    gradient_from(grid, &evaluate_rho(grid, layout, aps, newton_iters, newton_tol)?)
}

/// [`rho_gradient_with`] with a Newton solve run to machine precision.
pub fn rho_gradient(grid: &AngularGrid, layout: &ArrayLayout, aps: &Aps) -> Result<RhoGradient> {
    rho_gradient_with(grid, layout, aps, 100, 0.0)
}
