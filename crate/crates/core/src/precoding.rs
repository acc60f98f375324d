//! Zero-forcing precoding, decorrelated gains and power allocation.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Result};

/// Gram matrices with a larger condition number count as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    /// `Σ w_k log2(1 + γ_k)`.
    WeightedSumRate,
    /// `min_k γ_k / w_k`.
    MinWeightedSinr,
}

impl UtilityKind {
    pub fn name(self) -> &'static str {
        match self {
            UtilityKind::WeightedSumRate => "sum-rate",
            UtilityKind::MinWeightedSinr => "min-sinr",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub sinrs: Vec<f64>,
    pub utility_value: f64,
}

/// `(HᴴH)⁻¹` after checking its condition number.
fn gram_inverse(h: &CMatrix) -> Result<CMatrix> {
    let (n, k) = h.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("channel matrix has no users".into()));
    }
    if k > n {
        return Err(Error::DimensionMismatch(format!("{k} users exceed {n} antennas")));
    }
    let c = h.ad_mul(h);
    let dec = SymmetricEigen::try_new(c, f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    let hi = dec.eigenvalues.max();
    let lo = dec.eigenvalues.min();
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient(cond));
    }
    let u = &dec.eigenvectors;
    let scaled = CMatrix::from_fn(k, k, |r, col| u[(r, col)] / dec.eigenvalues[col]);
    Ok(scaled * u.adjoint())
}

/// `c_k = 1 / [(HᴴH)⁻¹]_kk`.
pub fn decorrelated_gains(h: &CMatrix) -> Result<Vec<f64>> {
    let inv = gram_inverse(h)?;
    Ok((0..h.ncols()).map(|k| 1.0 / inv[(k, k)].re).collect())
}

/// `W = H (HᴴH)⁻¹ Diag(p)^{1/2}`.
pub fn zf_precoder(h: &CMatrix, powers: &[f64]) -> Result<CMatrix> {
    if powers.len() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} powers for {} users",
            powers.len(),
            h.ncols()
        )));
    }
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidArgument("powers must be finite and nonnegative".into()));
    }
    let mut w = h * gram_inverse(h)?;
    for (k, p) in powers.iter().enumerate() {
        w.column_mut(k).scale_mut(p.sqrt());
    }
    Ok(w)
}

/// `γ_k = |h_kᴴw_k|² / (Σ_{i≠k} |h_kᴴw_i|² + σ²)` for any precoder.
pub fn sinr(h: &CMatrix, w: &CMatrix, noise_power: f64) -> Result<Vec<f64>> {
    if h.nrows() != w.nrows() || h.ncols() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "channel is {}x{}, precoder is {}x{}",
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let m = h.ad_mul(w);
    Ok((0..h.ncols())
        .map(|k| {
            let signal = m[(k, k)].norm_sqr();
            let interference: f64 = (0..w.ncols()).filter(|&i| i != k).map(|i| m[(k, i)].norm_sqr()).sum();
            signal / (interference + noise_power)
        })
        .collect())
}

pub fn utility(sinrs: &[f64], weights: &[f64], kind: UtilityKind) -> f64 {
    if sinrs.is_empty() {
        return 0.0;
    }
    match kind {
        UtilityKind::WeightedSumRate => sinrs.iter().zip(weights).map(|(g, w)| w * g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2,
        UtilityKind::MinWeightedSinr => sinrs.iter().zip(weights).map(|(g, w)| g / w).fold(f64::INFINITY, f64::min),
    }
}

fn check_allocation_inputs(c: &[f64], weights: &[f64], tx_power: f64, noise_power: f64) -> Result<()> {
    if c.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!("{} gains for {} weights", c.len(), weights.len())));
    }
    if c.iter().chain(weights).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("gains and weights must be positive".into()));
    }
    if !(tx_power >= 0.0 && tx_power.is_finite()) || !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need P_T >= 0 and σ² > 0, got {tx_power} and {noise_power}"
        )));
    }
    Ok(())
}

/// Weighted-sum-rate optimal powers under `Σ p_k/c_k ≤ P_T`, by exact active-set search.
pub fn waterfill(c: &[f64], weights: &[f64], tx_power: f64, noise_power: f64) -> Result<PowerAllocation> {
    check_allocation_inputs(c, weights, tx_power, noise_power)?;
    let k = c.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| (weights[b] * c[b]).total_cmp(&(weights[a] * c[a])));
    let mut level = 0.0;
    let mut sum_w = 0.0;
    let mut sum_inv_c = 0.0;
    for (m, &i) in order.iter().enumerate() {
        sum_w += weights[i];
        sum_inv_c += 1.0 / c[i];
        let candidate = (tx_power + noise_power * sum_inv_c) / sum_w;
        if weights[i] * c[i] * candidate > noise_power || m == 0 {
            level = candidate;
        } else {
            break;
        }
    }
    let powers: Vec<f64> = (0..k).map(|i| (weights[i] * c[i] * level - noise_power).max(0.0)).collect();
    let sinrs: Vec<f64> = powers.iter().map(|p| p / noise_power).collect();
    let utility_value = utility(&sinrs, weights, UtilityKind::WeightedSumRate);
    Ok(PowerAllocation { powers, sinrs, utility_value })
}

/// Max-min weighted SINR powers: every `γ_k / w_k` equals `P_T / (σ² Σ w_k/c_k)`.
pub fn maxmin_alloc(c: &[f64], weights: &[f64], tx_power: f64, noise_power: f64) -> Result<PowerAllocation> {
    check_allocation_inputs(c, weights, tx_power, noise_power)?;
    let gamma0 = tx_power / (noise_power * c.iter().zip(weights).map(|(c, w)| w / c).sum::<f64>());
    let sinrs: Vec<f64> = weights.iter().map(|w| w * gamma0).collect();
    let powers = sinrs.iter().map(|g| g * noise_power).collect();
    Ok(PowerAllocation { powers, sinrs, utility_value: gamma0 })
}

/// Allocates power for the given utility and evaluates it.
pub fn allocate(kind: UtilityKind, c: &[f64], weights: &[f64], tx_power: f64, noise_power: f64) -> Result<PowerAllocation> {
    match kind {
        UtilityKind::WeightedSumRate => waterfill(c, weights, tx_power, noise_power),
        UtilityKind::MinWeightedSinr => maxmin_alloc(c, weights, tx_power, noise_power),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_complex_normal;
    use crate::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_h(rng: &mut ChaCha8Rng, n: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(n, k, |_, _| sample_complex_normal(rng))
    }

    /// `‖h_k‖² - h_kᴴ H₋ₖ (H₋ₖᴴ H₋ₖ)⁻¹ H₋ₖᴴ h_k`.
    fn projection_gain(h: &CMatrix, k: usize) -> f64 {
        let hk = h.column(k).into_owned();
        let others: Vec<usize> = (0..h.ncols()).filter(|&i| i != k).collect();
        if others.is_empty() {
            return hk.norm_squared();
        }
        let rest = h.select_columns(&others);
        let gram = rest.ad_mul(&rest);
        let inv = gram.try_inverse().unwrap();
        let proj = (hk.adjoint() * &rest * inv * rest.adjoint() * &hk)[(0, 0)];
        hk.norm_squared() - proj.re
    }

    #[test]
    fn gains_single_user_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_h(&mut rng, 6, 1);
        let c = decorrelated_gains(&h).unwrap();
        assert!((c[0] - h.norm_squared()).abs() < 1e-12 * c[0]);

        let mut h = CMatrix::zeros(4, 3);
        h[(0, 0)] = Complex64::new(2.0, 0.0);
        h[(1, 1)] = Complex64::new(0.0, -1.5);
        h[(2, 2)] = Complex64::new(0.3, 0.4);
        h[(3, 2)] = Complex64::new(1.0, 0.0);
        let c = decorrelated_gains(&h).unwrap();
        assert!((c[0] - 4.0).abs() < 1e-12);
        assert!((c[1] - 2.25).abs() < 1e-12);
        assert!((c[2] - 1.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gains_match_projection(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(&mut rng, 8, 4);
            let c = decorrelated_gains(&h).unwrap();
            for k in 0..4 {
                let oracle = projection_gain(&h, k);
                prop_assert!((c[k] - oracle).abs() <= 1e-9 * oracle);
            }
            let a = random_h(&mut rng, 8, 8);
            let q = a.qr().q();
            let rotated = decorrelated_gains(&(q * &h)).unwrap();
            for k in 0..4 {
                prop_assert!((rotated[k] - c[k]).abs() <= 1e-9 * c[k]);
            }
        }

        #[test]
        fn zf_properties(seed in any::<u64>(), k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(&mut rng, 8, k);
            let p: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..3.0)).collect();
            let w = zf_precoder(&h, &p).unwrap();
            let sq = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, p.iter().map(|v| Complex64::new(v.sqrt(), 0.0))));
            prop_assert!((h.ad_mul(&w) - &sq).norm() < 1e-9 * sq.norm());
            let c = decorrelated_gains(&h).unwrap();
            let budget: f64 = p.iter().zip(&c).map(|(p, c)| p / c).sum();
            prop_assert!(((&w * w.adjoint()).trace().re - budget).abs() <= 1e-9 * budget);
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        let leak = h.column(a).dotc(&w.column(b)).norm();
                        prop_assert!(leak < 1e-9 * h.column(a).norm() * w.column(b).norm());
                    }
                }
            }
            let s = sinr(&h, &w, 0.5).unwrap();
            for i in 0..k {
                prop_assert!((s[i] - p[i] / 0.5).abs() <= 1e-9 * s[i]);
            }
        }

        #[test]
        fn utility_monotone(g in proptest::collection::vec(0.0f64..100.0, 1..6), bump in 0.0f64..10.0, idx in 0usize..6) {
            let w = vec![1.0; g.len()];
            let mut h = g.clone();
            let i = idx % g.len();
            h[i] += bump;
            for kind in [UtilityKind::WeightedSumRate, UtilityKind::MinWeightedSinr] {
                prop_assert!(utility(&h, &w, kind) >= utility(&g, &w, kind));
            }
        }
    }

    #[test]
    fn zf_single_user_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_h(&mut rng, 5, 1);
        let c = decorrelated_gains(&h).unwrap();
        let pt = 3.0;
        let w = zf_precoder(&h, &[c[0] * pt]).unwrap();
        assert!((w.norm_squared() - pt).abs() < 1e-12 * pt);
    }

    #[test]
    fn rank_deficiency_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_h(&mut rng, 6, 1);
        let mut h = CMatrix::zeros(6, 2);
        h.set_column(0, &a.column(0));
        h.set_column(1, &a.column(0).scale(2.0));
        assert!(matches!(decorrelated_gains(&h), Err(Error::RankDeficient(_))));
        assert!(matches!(decorrelated_gains(&random_h(&mut rng, 2, 3)), Err(Error::DimensionMismatch(_))));
        assert!(zf_precoder(&random_h(&mut rng, 4, 2), &[1.0]).is_err());
    }

    #[test]
    fn sinr_zero_precoder_and_hand_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_h(&mut rng, 3, 2);
        assert!(sinr(&h, &CMatrix::zeros(3, 2), 1.0).unwrap().iter().all(|&g| g == 0.0));

        let h = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0),
            Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0),
        ]);
        let w = CMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0),
        ]);
        // h_1 = [1, 0.5], h_2 = [j, 1]; w_1 = [1, 0], w_2 = [0, 2].
        // h_1ᴴw_1 = 1, h_1ᴴw_2 = 1; h_2ᴴw_1 = -j, h_2ᴴw_2 = 2.
        let s = sinr(&h, &w, 0.5).unwrap();
        assert!((s[0] - 1.0 / 1.5).abs() < 1e-15);
        assert!((s[1] - 4.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn utility_values() {
        assert_eq!(utility(&[0.0, 0.0], &[1.0, 1.0], UtilityKind::WeightedSumRate), 0.0);
        assert_eq!(utility(&[0.0, 0.0], &[1.0, 1.0], UtilityKind::MinWeightedSinr), 0.0);
        assert!((utility(&[1.0], &[1.0], UtilityKind::WeightedSumRate) - 1.0).abs() < 1e-15);
        assert_eq!(utility(&[1.0], &[1.0], UtilityKind::MinWeightedSinr), 1.0);
    }

    #[test]
    fn allocation_single_user_and_symmetric() {
        let (c, pt, s2) = (2.0, 5.0, 0.1);
        let wf = waterfill(&[c], &[1.0], pt, s2).unwrap();
        assert!((wf.powers[0] - c * pt).abs() < 1e-12);
        assert!((wf.utility_value - (1.0 + c * pt / s2).log2()).abs() < 1e-12);
        let mm = maxmin_alloc(&[c], &[1.0], pt, s2).unwrap();
        assert!((mm.powers[0] - wf.powers[0]).abs() < 1e-12);

        let wf = waterfill(&[c; 4], &[1.0; 4], pt, s2).unwrap();
        assert!(wf.powers.iter().all(|p| (p - c * pt / 4.0).abs() < 1e-12));
        let mm = maxmin_alloc(&[c; 4], &[1.0; 4], pt, s2).unwrap();
        assert!(mm.powers.iter().all(|p| (p - c * pt / 4.0).abs() < 1e-12));
        assert!(mm.sinrs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn waterfill_switches_off_weak_users() {
        let a = waterfill(&[100.0, 1e-6], &[1.0, 1.0], 1.0, 1.0).unwrap();
        assert_eq!(a.powers[1], 0.0);
        assert!((a.powers[0] - 100.0).abs() < 1e-9);
        let z = waterfill(&[1.0, 2.0], &[1.0, 1.0], 0.0, 1.0).unwrap();
        assert!(z.powers.iter().all(|&p| p == 0.0));
        assert!(waterfill(&[1.0, 0.0], &[1.0, 1.0], 1.0, 1.0).is_err());
        assert!(maxmin_alloc(&[1.0], &[1.0, 1.0], 1.0, 1.0).is_err());
    }

    /// Maximizes the weighted sum rate over `q_1 + q_2 + q_3 = P` by nested zooming grids.
    fn simplex_oracle(c: &[f64], w: &[f64], pt: f64, s2: f64) -> f64 {
        let f = |q: [f64; 3]| -> f64 { (0..3).map(|k| w[k] * (1.0 + q[k] * c[k] / s2).log2()).sum() };
        let (mut lo, mut hi) = ([0.0, 0.0], [pt, pt]);
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        let steps = 200;
        for _ in 0..40 {
            for i in 0..=steps {
                let a = lo[0] + (hi[0] - lo[0]) * i as f64 / steps as f64;
                for j in 0..=steps {
                    let b = lo[1] + (hi[1] - lo[1]) * j as f64 / steps as f64;
                    if a + b > pt {
                        continue;
                    }
                    let v = f([a, b, pt - a - b]);
                    if v > best.0 {
                        best = (v, [a, b]);
                    }
                }
            }
            for d in 0..2 {
                let half = (hi[d] - lo[d]) / 8.0;
                lo[d] = (best.1[d] - half).max(0.0);
                hi[d] = (best.1[d] + half).min(pt);
            }
        }
        best.0
    }

    #[test]
    fn waterfill_matches_numerical_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..2.0)).collect();
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
            let (pt, s2) = (rng.random_range(0.1..5.0), rng.random_range(0.05..1.0));
            let a = waterfill(&c, &w, pt, s2).unwrap();
            let budget: f64 = a.powers.iter().zip(&c).map(|(p, c)| p / c).sum();
            assert!((budget - pt).abs() <= 1e-9 * pt);
            let oracle = simplex_oracle(&c, &w, pt, s2);
            assert!(oracle <= a.utility_value * (1.0 + 1e-12));
            assert!((a.utility_value - oracle).abs() <= 1e-6 * a.utility_value, "{} vs {oracle}", a.utility_value);
        }
    }

    #[test]
    fn maxmin_beats_random_allocations() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..2.0)).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..1.5)).collect();
        let (pt, s2) = (2.0, 0.3);
        let best = maxmin_alloc(&c, &w, pt, s2).unwrap();
        let budget: f64 = best.powers.iter().zip(&c).map(|(p, c)| p / c).sum();
        assert!((budget - pt).abs() <= 1e-9 * pt);
        for _ in 0..10_000 {
            let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let scale = rng.random::<f64>();
            let sinrs: Vec<f64> = (0..3).map(|k| e[k] / s * pt * scale * c[k] / s2).collect();
            assert!(utility(&sinrs, &w, UtilityKind::MinWeightedSinr) <= best.utility_value * (1.0 + 1e-12));
        }
    }

    proptest! {
        #[test]
        fn each_allocation_wins_its_own_utility(c in proptest::collection::vec(0.01f64..10.0, 1..8), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = c.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let wf = waterfill(&c, &w, 1.0, 0.2).unwrap();
            let mm = maxmin_alloc(&c, &w, 1.0, 0.2).unwrap();
            prop_assert!(wf.utility_value >= utility(&mm.sinrs, &w, UtilityKind::WeightedSumRate) * (1.0 - 1e-12));
            prop_assert!(mm.utility_value >= utility(&wf.sinrs, &w, UtilityKind::MinWeightedSinr) * (1.0 - 1e-12));
            for a in [&wf, &mm] {
                let used: f64 = a.powers.iter().zip(&c).map(|(p, c)| p / c).sum();
                prop_assert!(used <= 1.0 * (1.0 + 1e-9));
                prop_assert!(a.powers.iter().all(|&p| p >= 0.0));
            }
        }
    }
}
