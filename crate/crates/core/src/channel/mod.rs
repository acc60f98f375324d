//! Scenarios, angular power spectra, covariance assembly and channel sampling.

mod covariance;
mod file;
mod sampling;

pub use covariance::{covariance, covariance_matrix, eigen, Covariance, HermitianEigen};
pub(crate) use covariance::{hermitize, weighted_frm};
pub use file::{dbm_to_watts, watts_to_dbm, GridSpec, ScenarioFile};
pub use sampling::{
    sample_channels, sample_complex_normal, sample_user_count, ChannelSampler, TruncatedPoisson,
};

use serde::{Deserialize, Serialize};

use crate::angular::AngularGrid;
use crate::{Error, Result};

/// Truncated-Poisson user-count law `P(K = n) ∝ k0ⁿ/n!` on `1..=max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserCount {
    pub k0: f64,
    pub max: usize,
}

/// Cell-specific angular power spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct Aps {
    values: Vec<f64>,
    total_power: f64,
}

impl Aps {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidArgument("spectrum entries must be finite and nonnegative".into()));
        }
        let total_power = values.iter().sum();
        Ok(Aps { values, total_power })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `β = Σ b_l`.
    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Gridded multi-subregion channel description with radio parameters.
#[derive(Clone, Debug)]
pub struct Scenario {
    grid: AngularGrid,
    power_responses: Vec<Vec<f64>>,
    user_distribution: Vec<f64>,
    user_count: UserCount,
    noise_power: f64,
    tx_power: f64,
    subregion_centers: Option<Vec<[f64; 2]>>,
    los_grid_index: Option<Vec<Option<usize>>>,
}

impl Scenario {
    /// `power_responses` holds one length-`L0` column per subregion; powers are in watts.
    pub fn new(
        grid: AngularGrid,
        power_responses: Vec<Vec<f64>>,
        user_distribution: Vec<f64>,
        user_count: UserCount,
        noise_power: f64,
        tx_power: f64,
    ) -> Result<Self> {
        let m = power_responses.len();
        if m == 0 {
            return Err(Error::InvalidArgument("scenario has no subregions".into()));
        }
        for (i, col) in power_responses.iter().enumerate() {
            if col.len() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "subregion {i} has {} power responses, grid has {}",
                    col.len(),
                    grid.len()
                )));
            }
            if col.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "subregion {i} has negative or non-finite power responses"
                )));
            }
            if !col.iter().sum::<f64>().is_finite() {
                return Err(Error::InvalidArgument(format!("subregion {i} total power overflows")));
            }
        }
        if user_distribution.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "user distribution has {} entries for {m} subregions",
                user_distribution.len()
            )));
        }
        if user_distribution.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument("user distribution must be nonnegative".into()));
        }
        let total: f64 = user_distribution.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("user distribution sums to {total}, expected 1")));
        }
        if !(user_count.k0 > 0.0 && user_count.k0.is_finite()) || user_count.max == 0 {
            return Err(Error::InvalidArgument(format!(
                "user count needs k0 > 0 and max >= 1, got k0 = {} and max = {}",
                user_count.k0, user_count.max
            )));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise power must be positive, got {noise_power}")));
        }
        if !(tx_power >= 0.0 && tx_power.is_finite()) {
            return Err(Error::InvalidArgument(format!("transmit power must be nonnegative, got {tx_power}")));
        }
        Ok(Scenario {
            grid,
            power_responses,
            user_distribution,
            user_count,
            noise_power,
            tx_power,
            subregion_centers: None,
            los_grid_index: None,
        })
    }

    pub fn with_subregion_centers(mut self, centers: Vec<[f64; 2]>) -> Result<Self> {
        if centers.len() != self.n_subregions() {
            return Err(Error::DimensionMismatch(format!(
                "{} subregion centers for {} subregions",
                centers.len(),
                self.n_subregions()
            )));
        }
        self.subregion_centers = Some(centers);
        Ok(self)
    }

    pub fn with_los_grid_index(mut self, index: Vec<Option<usize>>) -> Result<Self> {
        if index.len() != self.n_subregions() {
            return Err(Error::DimensionMismatch(format!(
                "{} LoS indices for {} subregions",
                index.len(),
                self.n_subregions()
            )));
        }
        if let Some(bad) = index.iter().flatten().find(|&&l| l >= self.grid.len()) {
            return Err(Error::InvalidArgument(format!("LoS grid index {bad} out of range")));
        }
        self.los_grid_index = Some(index);
        Ok(self)
    }

    pub fn with_tx_power(mut self, tx_power: f64) -> Result<Self> {
        if !(tx_power >= 0.0 && tx_power.is_finite()) {
            return Err(Error::InvalidArgument(format!("transmit power must be nonnegative, got {tx_power}")));
        }
        self.tx_power = tx_power;
        Ok(self)
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn n_subregions(&self) -> usize {
        self.power_responses.len()
    }

    /// Column `m` of `D`.
    pub fn power_response(&self, m: usize) -> &[f64] {
        &self.power_responses[m]
    }

    pub fn power_responses(&self) -> &[Vec<f64>] {
        &self.power_responses
    }

    pub fn user_distribution(&self) -> &[f64] {
        &self.user_distribution
    }

    pub fn user_count(&self) -> UserCount {
        self.user_count
    }

    /// Noise power `σ²` in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Transmit power budget `P_T` in watts.
    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn subregion_centers(&self) -> Option<&[[f64; 2]]> {
        self.subregion_centers.as_deref()
    }

    pub fn los_grid_index(&self) -> Option<&[Option<usize>]> {
        self.los_grid_index.as_deref()
    }

    /// Cell-level spectrum `b = Dμ`.
    pub fn aps(&self) -> Aps {
        compute_aps(&self.power_responses, &self.user_distribution)
            .expect("scenario invariants guarantee consistent dimensions")
    }

    pub fn subregion_aps(&self, m: usize) -> Aps {
        Aps::new(self.power_responses[m].clone()).expect("validated at construction")
    }
}

/// `b = Dμ` for `D` given as columns.
pub fn compute_aps(power_responses: &[Vec<f64>], user_distribution: &[f64]) -> Result<Aps> {
    if power_responses.len() != user_distribution.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} subregions but {} distribution weights",
            power_responses.len(),
            user_distribution.len()
        )));
    }
    let l0 = power_responses.first().map_or(0, Vec::len);
    if power_responses.iter().any(|c| c.len() != l0) {
        return Err(Error::DimensionMismatch("power response columns differ in length".into()));
    }
    let mut b = vec![0.0; l0];
    for (col, &mu) in power_responses.iter().zip(user_distribution) {
        for (acc, v) in b.iter_mut().zip(col) {
            *acc += mu * v;
        }
    }
    Aps::new(b)
}

/// Rescales LoS and NLoS entries so their cell-wide ratio is `10^(χ/10)` with total power kept.
pub fn rescale_rician(scenario: &Scenario, rician_factor_db: f64) -> Result<Scenario> {
    let los = scenario
        .los_grid_index()
        .filter(|idx| idx.iter().any(Option::is_some))
        .ok_or_else(|| Error::InvalidArgument("scenario has no LoS grid indices".into()))?;
    let chi = 10f64.powf(rician_factor_db / 10.0);
    let mut los_power = 0.0;
    let mut total = 0.0;
    for (col, l) in scenario.power_responses.iter().zip(los) {
        total += col.iter().sum::<f64>();
        if let Some(l) = l {
            los_power += col[*l];
        }
    }
    let nlos_power = total - los_power;
    if los_power <= 0.0 {
        return Err(Error::InvalidArgument("LoS entries carry no power".into()));
    }
    if nlos_power <= 0.0 {
        return Err(Error::InvalidArgument("scenario has no NLoS power".into()));
    }
    let s_los = total * chi / ((1.0 + chi) * los_power);
    let s_nlos = total / ((1.0 + chi) * nlos_power);
    let mut out = scenario.clone();
    for (col, l) in out.power_responses.iter_mut().zip(los) {
        for (i, v) in col.iter_mut().enumerate() {
            *v *= if Some(i) == *l { s_los } else { s_nlos };
        }
    }
    Ok(out)
}

/// Normalized Gaussian weights `exp(-‖a_m - focus‖²/(2σ²))` over subregion centers.
pub fn gaussian_user_distribution(centers: &[[f64; 2]], focus: [f64; 2], spread: f64) -> Result<Vec<f64>> {
    if !(spread > 0.0) {
        return Err(Error::InvalidArgument(format!("spread must be positive, got {spread}")));
    }
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no subregion centers".into()));
    }
    let logits: Vec<f64> = centers
        .iter()
        .map(|a| -((a[0] - focus[0]).powi(2) + (a[1] - focus[1]).powi(2)) / (2.0 * spread * spread))
        .collect();
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / s).collect())
}

/// User-center focus `(1 - η)·a_SW + η·a_NE` for a traverse factor `η ∈ [0, 1]`.
pub fn traverse_focus(south_west: [f64; 2], north_east: [f64; 2], eta: f64) -> Result<[f64; 2]> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("traverse factor must lie in [0, 1], got {eta}")));
    }
    Ok([
        (1.0 - eta) * south_west[0] + eta * north_east[0],
        (1.0 - eta) * south_west[1] + eta * north_east[1],
    ])
}
