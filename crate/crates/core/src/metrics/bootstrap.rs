use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 1000,
            seed: 0,
            level: 0.95,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples < 100 {
            return Err(Error::config("n_resamples", "must be at least 100"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("level", "must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub n_resamples: usize,
    pub seed: u64,
    /// Resamples on which the statistic was undefined.
    pub n_failed: usize,
}

/// Unit indices of resample `b`: `n` uniform draws with replacement from a
/// generator seeded with `seed + b`.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Multiplicity of each unit in resample `b`.
pub fn resample_weights(n: usize, seed: u64, b: usize) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for i in resample_indices(n, seed, b) {
        w[i] += 1;
    }
    w
}

/// Linear-interpolation quantile of ascending `sorted`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from resample values; more than 1% undefined is an error.
/// The bounds are widened to contain `point` when needed.
pub(crate) fn summarize(point: f64, samples: &[Option<f64>], config: &BootstrapConfig) -> Result<CiResult> {
    let mut values: Vec<f64> = samples.iter().flatten().copied().collect();
    let failed = samples.len() - values.len();
    if failed * 100 > samples.len() || values.is_empty() {
        return Err(Error::BootstrapFailures {
            failed,
            total: samples.len(),
        });
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - config.level) / 2.0;
    Ok(CiResult {
        point,
        lower: quantile(&values, alpha).min(point),
        upper: quantile(&values, 1.0 - alpha).max(point),
        level: config.level,
        n_resamples: config.n_resamples,
        seed: config.seed,
        n_failed: failed,
    })
}

/// Percentile bootstrap over `n_units` resampled with replacement.
///
/// `statistic` receives the unit indices of a resample and returns `None`
/// where it is undefined.
pub fn bootstrap_ci<F>(n_units: usize, statistic: F, config: &BootstrapConfig) -> Result<CiResult>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    config.validate()?;
    if n_units == 0 {
        return Err(Error::Data("cannot bootstrap an empty dataset".into()));
    }
    let all: Vec<usize> = (0..n_units).collect();
    let point = statistic(&all)
        .ok_or_else(|| Error::Data("statistic is undefined on the full sample".into()))?;
    let samples: Vec<Option<f64>> = (0..config.n_resamples)
        .into_par_iter()
        .map(|b| statistic(&resample_indices(n_units, config.seed, b)))
        .collect();
    summarize(point, &samples, config)
}
