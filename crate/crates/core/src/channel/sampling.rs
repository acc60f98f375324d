use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use super::covariance::{covariance_matrix, eigen};
use super::{Scenario, UserCount};
use crate::angular::{frm, ArrayLayout};
use crate::{CMatrix, Complex64, Error, Result};

/// Draws from `CN(0, 1)`.
pub fn sample_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `P(K = n) ∝ k0ⁿ/n!` for `n = 1..=max`.
#[derive(Clone, Debug)]
pub struct TruncatedPoisson {
    pmf: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl TruncatedPoisson {
    pub fn new(count: UserCount) -> Result<Self> {
        if !(count.k0 > 0.0 && count.k0.is_finite()) || count.max == 0 {
            return Err(Error::InvalidArgument(format!(
                "truncated Poisson needs k0 > 0 and max >= 1, got {} and {}",
                count.k0, count.max
            )));
        }
        let ln_k0 = count.k0.ln();
        let mut log_w = Vec::with_capacity(count.max);
        let mut ln_fact = 0.0;
        for n in 1..=count.max {
            ln_fact += (n as f64).ln();
            log_w.push(n as f64 * ln_k0 - ln_fact);
        }
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|v| (v - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let pmf: Vec<f64> = w.iter().map(|v| v / z).collect();
        let index = WeightedIndex::new(&pmf).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(TruncatedPoisson { pmf, index })
    }

    /// `pmf()[n - 1] = P(K = n)`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng) + 1
    }
}

pub fn sample_user_count<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> usize {
    TruncatedPoisson::new(scenario.user_count())
        .expect("scenario invariants guarantee a valid user-count law")
        .sample(rng)
}

fn subregion_index(scenario: &Scenario) -> WeightedIndex<f64> {
    WeightedIndex::new(scenario.user_distribution()).expect("user distribution sums to one")
}

/// Draws `K` users' channels path by path: `h = Q̄ᴴψ` with `ψ ~ CN(0, Diag(b̄_m))`.
pub fn sample_channels<R: Rng + ?Sized>(
    scenario: &Scenario,
    layout: &ArrayLayout,
    k: usize,
    rng: &mut R,
) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let q = frm(scenario.grid(), layout);
    let pick = subregion_index(scenario);
    let (l0, n) = (q.nrows(), q.ncols());
    let mut h = CMatrix::zeros(n, k);
    let mut psi = vec![Complex64::new(0.0, 0.0); l0];
    for user in 0..k {
        let b = scenario.power_response(pick.sample(rng));
        for (p, &bl) in psi.iter_mut().zip(b) {
            *p = sample_complex_normal(rng) * bl.sqrt();
        }
        for ant in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..l0 {
                acc += q[(l, ant)].conj() * psi[l];
            }
            h[(ant, user)] = acc;
        }
    }
    Ok(h)
}

/// Draws channels from precomputed square-root factors of each subregion covariance.
///
/// Distributionally identical to [`sample_channels`] but costs `O(N²)` per user.
#[derive(Clone, Debug)]
pub struct ChannelSampler {
    factors: Vec<CMatrix>,
    subregions: WeightedIndex<f64>,
    users: TruncatedPoisson,
}

impl ChannelSampler {
    pub fn new(scenario: &Scenario, layout: &ArrayLayout) -> Result<Self> {
        let n = layout.len();
        let mut factors = Vec::with_capacity(scenario.n_subregions());
        for m in 0..scenario.n_subregions() {
            let b = scenario.power_response(m);
            if b.iter().all(|&v| v == 0.0) {
                factors.push(CMatrix::zeros(n, n));
                continue;
            }
            let g = covariance_matrix(scenario.grid(), layout, b)?;
            let dec = eigen(&g)?;
            let mut f = dec.vectors;
            for (c, &lam) in dec.values.iter().enumerate() {
                let s = lam.max(0.0).sqrt();
                f.column_mut(c).scale_mut(s);
            }
            factors.push(f);
        }
        Ok(ChannelSampler {
            factors,
            subregions: subregion_index(scenario),
            users: TruncatedPoisson::new(scenario.user_count())?,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.factors[0].nrows()
    }

    pub fn user_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.users.sample(rng)
    }

    pub fn user_law(&self) -> &TruncatedPoisson {
        &self.users
    }

    /// `N × K` channel matrix for `k` users with i.i.d. subregions.
    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> CMatrix {
        let n = self.n_antennas();
        let mut h = CMatrix::zeros(n, k);
        let mut z = nalgebra::DVector::<Complex64>::zeros(n);
        for user in 0..k {
            let f = &self.factors[self.subregions.sample(rng)];
            for v in z.iter_mut() {
                *v = sample_complex_normal(rng);
            }
            h.column_mut(user).copy_from(&(f * &z));
        }
        h
    }
}
