use serde::{Deserialize, Serialize};

use super::likelihood::CoxData;
use crate::error::{Error, Result};

/// Breslow cumulative baseline hazard, a right-continuous step function.
///
/// `cumulative_hazard[k]` holds `H0` from `times[k]` up to the next time; `H0`
/// is zero before the first event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreslowBaseline {
    pub times: Vec<f64>,
    pub cumulative_hazard: Vec<f64>,
}

impl BreslowBaseline {
    pub(crate) fn from_data(data: &CoxData, beta: &[f64]) -> Self {
        let mut times = Vec::new();
        let mut cumulative_hazard = Vec::new();
        let mut h = 0.0;
        for (t, inc) in data.breslow_increments(beta) {
            h += inc;
            times.push(t);
            cumulative_hazard.push(h);
        }
        BreslowBaseline {
            times,
            cumulative_hazard,
        }
    }

    /// `H0(t)`; errors on negative `t`.
    pub fn at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Data(format!("time must be >= 0, got {t}")));
        }
        let k = self.times.partition_point(|&s| s <= t);
        Ok(if k == 0 { 0.0 } else { self.cumulative_hazard[k - 1] })
    }
}
