//! von Mises-Fisher angular power spectra and their closed-form covariance.

use std::f64::consts::PI;

use crate::angular::{AngularGrid, ArrayLayout};
use crate::channel::{eigen, Aps};
use crate::{CMatrix, Complex64, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VmfParams {
    direction: [f64; 3],
    concentration: f64,
    total_power: f64,
    wavenumber: f64,
}

impl VmfParams {
    /// `direction` is normalized; it must point into the upper half-space when `concentration > 0`.
    /// `concentration` is `ν0` in meters.
    pub fn new(direction: [f64; 3], concentration: f64, total_power: f64, wavenumber: f64) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("direction must be a nonzero finite vector".into()));
        }
        let direction = direction.map(|v| v / norm);
        if !(concentration >= 0.0 && concentration.is_finite()) {
            return Err(Error::InvalidArgument(format!("concentration must be nonnegative, got {concentration}")));
        }
        if concentration > 0.0 && direction[2] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "direction z-component must be positive, got {:.6}",
                direction[2]
            )));
        }
        if !(total_power > 0.0 && total_power.is_finite()) {
            return Err(Error::InvalidArgument(format!("total power must be positive, got {total_power}")));
        }
        if !(wavenumber > 0.0 && wavenumber.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {wavenumber}")));
        }
        Ok(VmfParams { direction, concentration, total_power, wavenumber })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    /// `ν = ν0·ν̂`.
    pub fn nu(&self) -> [f64; 3] {
        self.direction.map(|v| v * self.concentration)
    }

    pub fn with_concentration(&self, concentration: f64) -> Result<Self> {
        VmfParams::new(self.direction, concentration, self.total_power, self.wavenumber)
    }

    /// Full-sphere normalizer `B = 4πκ0 sinh(κ0ν0)/(βν0)`, or `4πκ0²/β` when `ν0 = 0`.
    pub fn full_sphere_normalizer(&self) -> f64 {
        let k0 = self.wavenumber;
        let s = k0 * self.concentration;
        if s == 0.0 {
            4.0 * PI * k0 * k0 / self.total_power
        } else {
            4.0 * PI * k0 * s.sinh() / (self.total_power * self.concentration)
        }
    }
}

/// `b_l = ω_l exp(νᵀκ_l)/B` with `B` making `Σ b_l = β`.
pub fn vmf_aps(grid: &AngularGrid, params: &VmfParams) -> Result<Aps> {
    let k0 = grid.wavenumber();
    if (k0 - params.wavenumber).abs() > 1e-9 * k0 {
        return Err(Error::InvalidArgument(format!(
            "grid wavenumber {k0} differs from vMF wavenumber {}",
            params.wavenumber
        )));
    }
    let nu = params.nu();
    let exponents: Vec<f64> = grid
        .wavevectors()
        .iter()
        .map(|k| nu[0] * k[0] + nu[1] * k[1] + nu[2] * k[2])
        .collect();
    let top = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().zip(grid.areas()).map(|(e, w)| w * (e - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Aps::new(weights.iter().map(|w| params.total_power * w / total).collect())
}

/// Principal square root of `(‖δ‖² - ‖ν‖²) + j·2δᵀν`.
pub fn complex_distance(delta: [f64; 3], nu: [f64; 3]) -> Complex64 {
    let dd: f64 = delta.iter().map(|v| v * v).sum();
    let nn: f64 = nu.iter().map(|v| v * v).sum();
    let a = dd - nn;
    let b = 2.0 * (delta[0] * nu[0] + delta[1] * nu[1] + delta[2] * nu[2]);
    let r = a.hypot(b);
    if a >= 0.0 {
        let re = ((r + a) / 2.0).sqrt();
        let im = if re > 0.0 { b / (2.0 * re) } else { 0.0 };
        Complex64::new(re, im)
    } else {
        let im = ((r - a) / 2.0).sqrt().copysign(if b < 0.0 { -1.0 } else { 1.0 });
        Complex64::new(b / (2.0 * im), im)
    }
}

/// `sin(x + jy) / sinh(s)` without overflow, valid for `|y| ≤ s` up to rounding.
fn sin_over_sinh(z: Complex64, s: f64) -> Complex64 {
    let denom = -(-2.0 * s).exp_m1();
    let grow = (z.im.abs() - s).exp();
    let shrink = (-z.im.abs() - s).exp();
    let cosh_ratio = (grow + shrink) / denom;
    let sinh_ratio = (grow - shrink) / denom * z.im.signum();
    Complex64::new(z.re.sin() * cosh_ratio, z.re.cos() * sinh_ratio)
}

fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-6 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `(4πκ0²/B)·sinc(κ0 d)` for the relative position `delta`.
pub fn closed_form_entry(delta: [f64; 3], params: &VmfParams) -> Complex64 {
    let k0 = params.wavenumber;
    let beta = params.total_power;
    let s = k0 * params.concentration;
    let z = complex_distance(delta, params.nu()) * k0;
    if s == 0.0 {
        return sinc(z) * beta;
    }
    if z.norm() < 1e-6 {
        return sinc(z) * (beta * s / s.sinh());
    }
    sin_over_sinh(z, s) * (beta * s) / z
}

/// Covariance of a vMF spectrum under the full-sphere approximation.
pub fn closed_form_covariance(layout: &ArrayLayout, params: &VmfParams) -> CMatrix {
    let pos = layout.positions();
    let n = pos.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] = Complex64::new(params.total_power, 0.0);
        for k in i + 1..n {
            let delta = [pos[i][0] - pos[k][0], pos[i][1] - pos[k][1], 0.0];
            let v = closed_form_entry(delta, params);
            g[(i, k)] = v;
            g[(k, i)] = v.conj();
        }
    }
    g
}

/// Upper bound on `|closed_form_entry|` from `|sin(x + jy)| ≤ cosh(y)`.
pub fn closed_form_envelope(delta: [f64; 3], params: &VmfParams) -> f64 {
    let k0 = params.wavenumber;
    let beta = params.total_power;
    let s = k0 * params.concentration;
    let d = complex_distance(delta, params.nu());
    if s == 0.0 {
        return beta / (k0 * d.norm());
    }
    let y = k0 * d.im.abs();
    let ratio = ((y - s).exp() + (-y - s).exp()) / -(-2.0 * s).exp_m1();
    beta * params.concentration * ratio / d.norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseLimitReport {
    pub separations: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub envelopes: Vec<f64>,
    /// Envelope strictly decreasing across the separations.
    pub decays: bool,
}

/// Off-diagonal magnitude and envelope at growing separations along `direction_hat`.
pub fn sparse_limit_check(params: &VmfParams, direction_hat: [f64; 3], separations: &[f64]) -> Result<SparseLimitReport> {
    let norm = direction_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("separation direction must be nonzero".into()));
    }
    if separations.windows(2).any(|w| w[1] <= w[0]) || separations.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument("separations must be positive and increasing".into()));
    }
    let unit = direction_hat.map(|v| v / norm);
    let mut magnitudes = Vec::with_capacity(separations.len());
    let mut envelopes = Vec::with_capacity(separations.len());
    for &sep in separations {
        let delta = unit.map(|v| v * sep);
        magnitudes.push(closed_form_entry(delta, params).norm());
        envelopes.push(closed_form_envelope(delta, params));
    }
    let decays = envelopes.windows(2).all(|w| w[1] < w[0]);
    Ok(SparseLimitReport { separations: separations.to_vec(), magnitudes, envelopes, decays })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratedLimitReport {
    pub concentrations: Vec<f64>,
    /// `‖G - β v vᴴ‖_F / ‖G‖_F`.
    pub residuals: Vec<f64>,
    /// `λ_2/λ_1`.
    pub eigen_ratios: Vec<f64>,
    /// Largest `|arg G_ni + κ0 δᵀν̂|` over off-diagonal entries, in radians.
    pub phase_errors: Vec<f64>,
    /// Residual strictly decreasing across the concentrations.
    pub converges: bool,
}

/// Distance of the closed form from the rank-one steering-vector limit at growing `ν0`.
pub fn concentrated_limit_check(
    layout: &ArrayLayout,
    base: &VmfParams,
    concentrations: &[f64],
) -> Result<ConcentratedLimitReport> {
    if concentrations.windows(2).any(|w| w[1] <= w[0]) || concentrations.iter().any(|&c| c <= 0.0) {
        return Err(Error::InvalidArgument("concentrations must be positive and increasing".into()));
    }
    let k0 = base.wavenumber;
    let dir = base.direction;
    let pos = layout.positions();
    let n = pos.len();
    let phase = |p: &[f64; 2]| -k0 * (p[0] * dir[0] + p[1] * dir[1]);
    let v = nalgebra::DVector::from_iterator(n, pos.iter().map(|p| Complex64::from_polar(1.0, phase(p))));
    let limit = (&v * v.adjoint()).scale(base.total_power);
    let mut residuals = Vec::new();
    let mut eigen_ratios = Vec::new();
    let mut phase_errors = Vec::new();
    for &c in concentrations {
        let params = base.with_concentration(c)?;
        let g = closed_form_covariance(layout, &params);
        residuals.push((&g - &limit).norm() / g.norm());
        let dec = eigen(&g)?;
        eigen_ratios.push(if n > 1 { dec.values[1] / dec.values[0] } else { 0.0 });
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    let err = (g[(i, k)] * limit[(i, k)].conj()).arg();
                    worst = worst.max(err.abs());
                }
            }
        }
        phase_errors.push(worst);
    }
    let converges = residuals.windows(2).all(|w| w[1] < w[0]);
    Ok(ConcentratedLimitReport { concentrations: concentrations.to_vec(), residuals, eigen_ratios, phase_errors, converges })
}
