//! Seeded Monte-Carlo estimates of ergodic utilities and decorrelated gains.
//!
//! Sample `i` draws from a ChaCha stream selected by `i`, so results do not
//! depend on the worker count or scheduling.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::ArrayLayout;
use crate::channel::{ChannelSampler, Scenario};
use crate::precoding::{allocate, decorrelated_gains, UtilityKind};
use crate::{CMatrix, Error, Result};

pub const DEFAULT_SAMPLES: usize = 5000;

const REDRAW_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const WEIGHT_STREAM_OFFSET: u64 = 1 << 62;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsPolicy {
    Unit,
    /// One weight per user index; must cover the largest user count.
    Fixed(Vec<f64>),
    /// Uniform on `[0.5, 1.5]`, rescaled to mean one within each sample.
    Random { seed: u64 },
}

impl WeightsPolicy {
    fn weights(&self, k: usize, index: u64) -> Result<Vec<f64>> {
        match self {
            WeightsPolicy::Unit => Ok(vec![1.0; k]),
            WeightsPolicy::Fixed(w) => {
                if w.len() < k {
                    return Err(Error::DimensionMismatch(format!("{} fixed weights for {k} users", w.len())));
                }
                Ok(w[..k].to_vec())
            }
            WeightsPolicy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(WEIGHT_STREAM_OFFSET | index);
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
                let mean = w.iter().sum::<f64>() / k as f64;
                Ok(w.into_iter().map(|v| v / mean).collect())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let WeightsPolicy::Fixed(w) = self {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidArgument("fixed weights must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Draws discarded because the Gram matrix was numerically singular.
    pub n_redraws: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    /// Mean of `c_k` over users and samples.
    pub mean: f64,
    pub std_error: f64,
    /// Standard deviation of the per-sample user average.
    pub spread: f64,
    pub n_samples: usize,
    pub n_redraws: usize,
    pub seed: u64,
}

/// Fixed-order pairwise sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0)).sqrt())
}

fn sample_rng(seed: u64, index: u64, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt.wrapping_mul(REDRAW_STRIDE)));
    rng.set_stream(index);
    rng
}

fn redraw_budget(n_samples: usize) -> usize {
    n_samples / 100
}

/// Runs `draw` for every sample index, retrying rank failures on fresh substreams.
fn run_samples<T, F>(n_samples: usize, seed: u64, draw: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let budget = redraw_budget(n_samples);
    let results: Vec<Result<(T, usize)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|index| {
            let mut redraws = 0;
            loop {
                let mut rng = sample_rng(seed, index, redraws as u64);
                match draw(index, &mut rng) {
                    Ok(v) => return Ok((v, redraws)),
                    Err(Error::RankDeficient(_)) if redraws < budget => redraws += 1,
                    Err(Error::RankDeficient(_)) => {
                        return Err(Error::PersistentRankFailure { redraws: redraws + 1, samples: n_samples })
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();
    let mut values = Vec::with_capacity(n_samples);
    let mut total = 0;
    for r in results {
        let (v, k) = r?;
        values.push(v);
        total += k;
    }
    if total > budget {
        return Err(Error::PersistentRankFailure { redraws: total, samples: n_samples });
    }
    Ok((values, total))
}

fn active_columns(h: CMatrix) -> CMatrix {
    let keep: Vec<usize> = (0..h.ncols()).filter(|&c| h.column(c).iter().any(|z| z.norm_sqr() > 0.0)).collect();
    if keep.len() == h.ncols() {
        return h;
    }
    h.select_columns(&keep)
}

/// Ergodic utility of ZF precoding with optimal power allocation.
///
/// Users whose channel is identically zero carry no power and are left out.
pub fn ergodic_utility(
    scenario: &Scenario,
    layout: &ArrayLayout,
    kind: UtilityKind,
    weights: &WeightsPolicy,
    n_samples: usize,
    seed: u64,
) -> Result<ErgodicEstimate> {
    weights.validate()?;
    if scenario.user_count().max > layout.len() {
        return Err(Error::InvalidArgument(format!(
            "up to {} users cannot be served by {} antennas",
            scenario.user_count().max,
            layout.len()
        )));
    }
    let sampler = ChannelSampler::new(scenario, layout)?;
    let (p, s2) = (scenario.tx_power(), scenario.noise_power());
    let (values, n_redraws) = run_samples(n_samples, seed, |index, rng| {
        let k = sampler.user_count(rng);
        let w_all = weights.weights(k, index)?;
        let h = sampler.draw(k, rng);
        let active: Vec<usize> = (0..k).filter(|&c| h.column(c).iter().any(|z| z.norm_sqr() > 0.0)).collect();
        if active.is_empty() {
            return Ok(0.0);
        }
        let w: Vec<f64> = active.iter().map(|&i| w_all[i]).collect();
        let c = decorrelated_gains(&active_columns(h))?;
        Ok(allocate(kind, &c, &w, p, s2)?.utility_value)
    })?;
    let (mean, std) = mean_and_std(&values);
    Ok(ErgodicEstimate { mean, std_error: std / (n_samples as f64).sqrt(), n_samples, n_redraws, seed })
}

/// Average decorrelated gain with exactly `k` users per sample.
pub fn empirical_c_mean(
    scenario: &Scenario,
    layout: &ArrayLayout,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<GainEstimate> {
    if k == 0 || k > layout.len() {
        return Err(Error::InvalidArgument(format!("user count {k} outside 1..={}", layout.len())));
    }
    let sampler = ChannelSampler::new(scenario, layout)?;
    let (values, n_redraws) = run_samples(n_samples, seed, |_, rng| {
        let c = decorrelated_gains(&sampler.draw(k, rng))?;
        Ok(c.iter().sum::<f64>() / k as f64)
    })?;
    let (mean, spread) = mean_and_std(&values);
    Ok(GainEstimate { mean, std_error: spread / (n_samples as f64).sqrt(), spread, n_samples, n_redraws, seed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub layout_name: String,
    pub utility: UtilityKind,
    pub estimate: ErgodicEstimate,
}

/// `layout_name,utility,mean,std_error,n_samples,seed`.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["layout_name", "utility", "mean", "std_error", "n_samples", "seed"])?;
    for r in rows {
        w.write_record([
            r.layout_name.clone(),
            r.utility.name().to_owned(),
            format!("{:.12e}", r.estimate.mean),
            format!("{:.12e}", r.estimate.std_error),
            r.estimate.n_samples.to_string(),
            r.estimate.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
