use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::PatientRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.val, self.test];
        if f.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::config("split", "fractions must be positive"));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "fractions must sum to 1"));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items. Equal remainders go to the
    /// earlier split (train, then val, then test).
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.val, self.test].map(|f| f * n as f64);
        // Guard against 0.7 * 10 landing a hair under 7.
        let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
        let rem = quotas.map(|q| (q - (q + 1e-9).floor()).max(0.0));
        let assigned: usize = sizes.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]).then(a.cmp(&b)));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSplit {
    pub train: Vec<PatientRecord>,
    pub val: Vec<PatientRecord>,
    pub test: Vec<PatientRecord>,
}

/// Patient-level train/validation/test partition, deterministic in `seed`.
///
/// Within each part patients keep their input order.
pub fn split(cohort: &[PatientRecord], fractions: SplitFractions, seed: u64) -> Result<CohortSplit> {
    fractions.validate()?;
    if cohort.len() < 3 {
        return Err(Error::Data(format!(
            "cannot split a cohort of {} patients into three parts",
            cohort.len()
        )));
    }
    let [n_train, n_val, _] = fractions.sizes(cohort.len());
    let mut idx: Vec<usize> = (0..cohort.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let take = |range: &[usize]| {
        let mut part = range.to_vec();
        part.sort_unstable();
        part.into_iter().map(|i| cohort[i].clone()).collect::<Vec<_>>()
    };
    Ok(CohortSplit {
        train: take(&idx[..n_train]),
        val: take(&idx[n_train..n_train + n_val]),
        test: take(&idx[n_train + n_val..]),
    })
}
