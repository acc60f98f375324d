use nalgebra::SymmetricEigen;

use super::Aps;
use crate::angular::{AngularGrid, ArrayLayout};
use crate::{CMatrix, Complex64, Error, Result};

/// Eigenvalues below this fraction of the trace are treated as rounding noise.
const CLAMP_FRACTION: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns match `values`.
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Negative eigenvalues smaller than `1e-10` of the absolute spectrum mass are set to zero.
pub fn eigen(matrix: &CMatrix) -> Result<HermitianEigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", n, matrix.ncols())));
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    if !(dev <= 1e-8 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (matrix + matrix.adjoint()).scale(0.5);
    let dec = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let mass: f64 = dec.eigenvalues.iter().map(|v| v.abs()).sum();
    let floor = CLAMP_FRACTION * mass;
    let values = order
        .iter()
        .map(|&i| {
            let v = dec.eigenvalues[i];
            if v < 0.0 && -v < floor {
                0.0
            } else {
                v
            }
        })
        .collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Channel covariance with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct Covariance {
    matrix: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl Covariance {
    /// Decomposes a covariance known to be positive semidefinite.
    ///
    /// Eigenvalues of either sign below `1e-10·tr` are set to zero; a larger
    /// negative eigenvalue is an error.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let dec = eigen(&matrix)?;
        let trace: f64 = (0..matrix.nrows()).map(|i| matrix[(i, i)].re).sum();
        let floor = CLAMP_FRACTION * trace.abs();
        let mut eigenvalues = dec.values;
        for v in eigenvalues.iter_mut() {
            if v.abs() <= floor {
                *v = 0.0;
            } else if *v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "covariance has eigenvalue {v:e} below zero beyond rounding"
                )));
            }
        }
        Ok(Covariance { matrix, eigenvalues, eigenvectors: dec.vectors })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Nonnegative, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Ratio of largest to smallest eigenvalue (infinite when rank deficient).
    pub fn eigenvalue_spread(&self) -> f64 {
        let lo = *self.eigenvalues.last().unwrap_or(&0.0);
        if lo > 0.0 {
            self.eigenvalues[0] / lo
        } else {
            f64::INFINITY
        }
    }
}

/// Rows of the field-response matrix weighted by `sqrt(b_l)`.
pub(crate) fn weighted_frm(grid: &AngularGrid, layout: &ArrayLayout, power: &[f64]) -> Result<CMatrix> {
    if power.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum has {} entries, grid has {}",
            power.len(),
            grid.len()
        )));
    }
    let wv = grid.wavevectors();
    let pos = layout.positions();
    Ok(CMatrix::from_fn(grid.len(), layout.len(), |l, n| {
        Complex64::from_polar(power[l].sqrt(), wv[l][0] * pos[n][0] + wv[l][1] * pos[n][1])
    }))
}

/// Forces exact Hermitian symmetry and a real diagonal.
pub(crate) fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// `Q̄ᴴ Diag(b) Q̄` without decomposing it.
pub fn covariance_matrix(grid: &AngularGrid, layout: &ArrayLayout, power: &[f64]) -> Result<CMatrix> {
    let w = weighted_frm(grid, layout, power)?;
    let mut g = w.ad_mul(&w);
    hermitize(&mut g);
    Ok(g)
}

pub fn covariance(grid: &AngularGrid, layout: &ArrayLayout, aps: &Aps) -> Result<Covariance> {
    Covariance::from_matrix(covariance_matrix(grid, layout, aps.values())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{build_grid, frm, upa_sparse, Region};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.06;

    fn random_layout(rng: &mut ChaCha8Rng, n: usize) -> ArrayLayout {
        let region = Region::square(4.0 * LAMBDA, LAMBDA / 2.0).unwrap();
        let pos = (0..n)
            .map(|_| [rng.random_range(-2.0 * LAMBDA..2.0 * LAMBDA), rng.random_range(-2.0 * LAMBDA..2.0 * LAMBDA)])
            .collect();
        ArrayLayout::new(pos, region).unwrap()
    }

    fn random_aps(rng: &mut ChaCha8Rng, len: usize) -> Aps {
        Aps::new((0..len).map(|_| rng.random::<f64>().powi(4)).collect()).unwrap()
    }

    fn reconstruction_error(m: &CMatrix, d: &HermitianEigen) -> f64 {
        let lam = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d.values.len(),
            d.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        (&d.vectors * lam * d.vectors.adjoint() - m).norm() / m.norm()
    }

    #[test]
    fn single_antenna_is_beta() {
        let grid = build_grid(10, 12, LAMBDA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let aps = random_aps(&mut rng, grid.len());
        let layout = random_layout(&mut rng, 1);
        let c = covariance(&grid, &layout, &aps).unwrap();
        assert!((c.matrix()[(0, 0)].re - aps.total_power()).abs() < 1e-12 * aps.total_power());
        assert_eq!(c.matrix()[(0, 0)].im, 0.0);
    }

    #[test]
    fn single_grid_is_rank_one() {
        let grid = build_grid(10, 12, LAMBDA).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layout = random_layout(&mut rng, 6);
        let beta = 2.5;
        let l = 37;
        let mut b = vec![0.0; grid.len()];
        b[l] = beta;
        let c = covariance(&grid, &layout, &Aps::new(b).unwrap()).unwrap();
        let q = frm(&grid, &layout);
        for n in 0..6 {
            for i in 0..6 {
                let expect = q[(l, n)].conj() * q[(l, i)] * beta;
                assert!((c.matrix()[(n, i)] - expect).norm() < 1e-12);
            }
        }
        assert!((c.eigenvalues()[0] - 6.0 * beta).abs() < 1e-12);
        assert!(c.eigenvalues()[1..].iter().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn covariance_invariants(seed in any::<u64>(), n in 1usize..10) {
            let grid = build_grid(12, 16, LAMBDA).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let aps = random_aps(&mut rng, grid.len());
            let beta = aps.total_power();
            let layout = random_layout(&mut rng, n);
            let c = covariance(&grid, &layout, &aps).unwrap();
            let m = c.matrix();
            for i in 0..n {
                prop_assert!((m[(i, i)].re - beta).abs() <= 1e-9 * beta);
                for j in 0..n {
                    prop_assert!((m[(i, j)] - m[(j, i)].conj()).norm() <= 1e-10);
                }
            }
            let sum: f64 = c.eigenvalues().iter().sum();
            prop_assert!((sum - n as f64 * beta).abs() <= 1e-9 * n as f64 * beta);
            prop_assert!((c.trace() - n as f64 * beta).abs() <= 1e-9 * n as f64 * beta);
            prop_assert!(c.eigenvalues().iter().all(|&v| v >= 0.0));
            prop_assert!(c.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
            let dec = HermitianEigen { values: c.eigenvalues().to_vec(), vectors: c.eigenvectors().clone() };
            prop_assert!(reconstruction_error(m, &dec) < 1e-8);

            let shift = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
            let moved = ArrayLayout::new(
                layout.positions().iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect(),
                layout.region(),
            ).unwrap();
            let cm = covariance_matrix(&grid, &moved, aps.values()).unwrap();
            prop_assert!((&cm - m).norm() <= 1e-9 * m.norm());
        }

        #[test]
        fn eigen_reconstructs_random_hermitian(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = (&a + a.adjoint()).scale(0.5);
            let d = eigen(&h).unwrap();
            prop_assert!(reconstruction_error(&h, &d) < 1e-8);
            prop_assert!(d.values.windows(2).all(|w| w[0] >= w[1]));
            let gram = d.vectors.adjoint() * &d.vectors;
            prop_assert!((gram - CMatrix::identity(n, n)).norm() < 1e-10);
        }
    }

    #[test]
    fn eigen_of_scaled_identity_and_rank_one() {
        let beta = 0.7;
        let d = eigen(&CMatrix::identity(5, 5).scale(beta)).unwrap();
        assert!(d.values.iter().all(|v| (v - beta).abs() < 1e-14));

        let v = nalgebra::DVector::from_fn(5, |i, _| Complex64::from_polar(1.0, 0.3 * i as f64));
        let m = (&v * v.adjoint()).scale(beta);
        let d = eigen(&m).unwrap();
        assert!((d.values[0] - 5.0 * beta).abs() < 1e-13);
        assert!(d.values[1..].iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(eigen(&m), Err(Error::NotHermitian(_))));
        assert!(matches!(eigen(&CMatrix::zeros(2, 3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn covariance_rejects_mismatched_spectrum() {
        let grid = build_grid(4, 4, LAMBDA).unwrap();
        let layout = upa_sparse(2, 2, Region::square(2.0 * LAMBDA, LAMBDA / 2.0).unwrap()).unwrap();
        assert!(covariance(&grid, &layout, &Aps::new(vec![1.0; 3]).unwrap()).is_err());
    }
}
