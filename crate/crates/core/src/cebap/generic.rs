use rayon::prelude::*;

use super::{run_outer_loop, LobpoConfig, LobpoOutcome, Objective};
use crate::angular::ArrayLayout;
use crate::Result;

/// Wraps a scalar objective with central-difference gradients.
pub struct FiniteDifference<F> {
    pub objective: F,
    /// Per-coordinate step in meters.
    pub step: f64,
}

impl<F> FiniteDifference<F>
where
    F: Fn(&ArrayLayout) -> Result<f64> + Sync,
{
    /// Step of `1e-4·λ`.
    pub fn new(objective: F, wavelength: f64) -> Self {
        FiniteDifference { objective, step: 1e-4 * wavelength }
    }
}

impl<F> Objective for FiniteDifference<F>
where
    F: Fn(&ArrayLayout) -> Result<f64> + Sync,
{
    fn value(&self, layout: &ArrayLayout) -> Result<f64> {
        (self.objective)(layout)
    }

    fn value_and_gradient(&self, layout: &ArrayLayout) -> Result<(f64, Vec<f64>)> {
        let value = (self.objective)(layout)?;
        let dim = 2 * layout.len();
        let grad = (0..dim)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                let up = (self.objective)(&layout.displaced(&e, self.step))?;
                let down = (self.objective)(&layout.displaced(&e, -self.step))?;
                Ok((up - down) / (2.0 * self.step))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((value, grad))
    }
}

/// Penalty-continuation ascent of an arbitrary layout objective using finite-difference gradients.
pub fn lobpo_generic<F>(objective: F, init: &ArrayLayout, wavelength: f64, config: &LobpoConfig) -> Result<LobpoOutcome>
where
    F: Fn(&ArrayLayout) -> Result<f64> + Sync,
{
    run_outer_loop(&FiniteDifference::new(objective, wavelength), init, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{build_grid, check_feasible, upa_sparse, Region};
    use crate::cebap::{barrier_gradient, lobpo, rho_n};
    use crate::vmf::{vmf_aps, VmfParams};

    const LAMBDA: f64 = 0.06;

    #[test]
    fn finite_difference_gradient_of_quadratic() {
        let region = Region::square(4.0 * LAMBDA, LAMBDA / 2.0).unwrap();
        let layout = ArrayLayout::new(vec![[0.01, -0.02], [0.05, 0.04]], region).unwrap();
        let fd = FiniteDifference::new(
            |l: &ArrayLayout| Ok(l.positions().iter().map(|p| 3.0 * p[0] * p[0] - p[1]).sum()),
            LAMBDA,
        );
        let (v, g) = fd.value_and_gradient(&layout).unwrap();
        assert!((v - (3.0 * 1e-4 + 3.0 * 25e-4 + 0.02 - 0.04)).abs() < 1e-15);
        let expect = [0.06, 0.3, -1.0, -1.0];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_objective_reaches_barrier_stationary_point() {
        let region = Region::square(2.0 * LAMBDA, LAMBDA / 2.0).unwrap();
        let init = ArrayLayout::new(vec![[-0.3 * LAMBDA, 0.1 * LAMBDA], [0.5 * LAMBDA, -0.2 * LAMBDA]], region).unwrap();
        let cfg = LobpoConfig { inner_iters: 200, ..LobpoConfig::for_wavelength(LAMBDA) };
        let out = lobpo_generic(|_: &ArrayLayout| Ok(1.0), &init, LAMBDA, &cfg).unwrap();
        assert!(check_feasible(&out.layout).is_feasible());
        let (gx, gy) = barrier_gradient(&out.layout).unwrap();
        let norm = gx.iter().chain(&gy).map(|v| v * v).sum::<f64>().sqrt();
        let (gx0, gy0) = barrier_gradient(&init).unwrap();
        let norm0 = gx0.iter().chain(&gy0).map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-2 * norm0, "{norm} vs {norm0}");
    }

    #[test]
    fn agrees_with_analytic_gradient_path() {
        let grid = build_grid(20, 32, LAMBDA).unwrap();
        let p = VmfParams::new([0.0, 0.5, 3f64.sqrt() / 2.0], 0.1, 1.0, grid.wavenumber()).unwrap();
        let aps = vmf_aps(&grid, &p).unwrap();
        let region = Region::square(3.0 * LAMBDA, LAMBDA / 2.0).unwrap();
        let init = upa_sparse(2, 4, region).unwrap();
        let cfg = LobpoConfig::for_wavelength(LAMBDA);
        let analytic = lobpo(&grid, &aps, &cfg, &init).unwrap();
        let generic = lobpo_generic(|l: &ArrayLayout| rho_n(&grid, l, &aps, cfg.newton_iters, cfg.newton_tol), &init, LAMBDA, &cfg)
            .unwrap();
        let a = analytic.final_rho();
        let g = generic.final_rho();
        assert!(check_feasible(&generic.layout).is_feasible());
        assert!((a - g).abs() < 0.01 * a, "{a} vs {g}");
    }
}
