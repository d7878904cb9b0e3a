use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer pair counts behind a concordance index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied: u64,
    pub valid: u64,
}

impl ConcordanceCounts {
    /// `(concordant + tied/2) / valid`, or `None` without valid pairs.
    pub fn index(&self) -> Option<f64> {
        if self.valid == 0 {
            None
        } else {
            Some((2 * self.concordant + self.tied) as f64 / (2 * self.valid) as f64)
        }
    }
}

/// Patients pre-sorted by time with dense risk ranks, ready for repeated
/// (optionally weighted) pair counting.
#[derive(Debug, Clone)]
pub(crate) struct RankedSample {
    /// Original indices sorted by ascending time.
    order: Vec<usize>,
    times: Vec<f64>,
    comparable: Vec<bool>,
    ranks: Vec<usize>,
    n_ranks: usize,
}

impl RankedSample {
    /// `comparable[i]` marks patients that may be the earlier member of a pair.
    pub fn new(times: &[f64], comparable: &[bool], risks: &[f64]) -> Result<Self> {
        if let Some(i) = risks.iter().position(|r| !r.is_finite()) {
            return Err(Error::Numerical(format!("risk for patient {i} is {}", risks[i])));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        let mut distinct: Vec<f64> = risks.to_vec();
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        distinct.dedup_by(|a, b| a == b);
        let ranks = order
            .iter()
            .map(|&i| distinct.partition_point(|&r| r < risks[i]))
            .collect();
        Ok(RankedSample {
            times: order.iter().map(|&i| times[i]).collect(),
            comparable: order.iter().map(|&i| comparable[i]).collect(),
            order,
            ranks,
            n_ranks: distinct.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Re-keys weights lookups from local positions to `ids[local]`.
    pub fn with_ids(mut self, ids: &[usize]) -> Self {
        self.order.iter_mut().for_each(|k| *k = ids[*k]);
        self
    }

    /// Pair counts, each patient counted `weights[original index]` times.
    pub fn counts(&self, weights: Option<&[u32]>) -> ConcordanceCounts {
        let w = |k: usize| weights.map_or(1, |w| u64::from(w[self.order[k]]));
        let mut tree = vec![0u64; self.n_ranks + 1];
        let mut total = 0u64;
        let prefix = |tree: &[u64], end: usize| {
            let (mut i, mut s) = (end, 0u64);
            while i > 0 {
                s += tree[i];
                i -= i & i.wrapping_neg();
            }
            s
        };
        let mut out = ConcordanceCounts::default();
        let n = self.len();
        let mut hi = n;
        // groups of equal time, latest first; later patients already in the tree
        while hi > 0 {
            let t = self.times[hi - 1];
            let mut lo = hi - 1;
            while lo > 0 && self.times[lo - 1] == t {
                lo -= 1;
            }
            for k in lo..hi {
                let wk = w(k);
                if wk == 0 || !self.comparable[k] {
                    continue;
                }
                let r = self.ranks[k];
                let below = prefix(&tree, r);
                let through = prefix(&tree, r + 1);
                out.concordant += wk * below;
                out.tied += wk * (through - below);
                out.valid += wk * total;
            }
            for k in lo..hi {
                let wk = w(k);
                if wk == 0 {
                    continue;
                }
                let mut i = self.ranks[k] + 1;
                while i < tree.len() {
                    tree[i] += wk;
                    i += i & i.wrapping_neg();
                }
                total += wk;
            }
            hi = lo;
        }
        out
    }
}

fn check_lengths(times: &[f64], events: &[bool], risks: &[f64]) -> Result<()> {
    if times.len() != events.len() || times.len() != risks.len() {
        return Err(Error::Data(format!(
            "length mismatch: {} times, {} events, {} risks",
            times.len(),
            events.len(),
            risks.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Data(format!("event times must be positive, got {t}")));
    }
    Ok(())
}

/// Harrell's concordance pair counts for static risks.
pub fn harrell_counts(times: &[f64], events: &[bool], risks: &[f64]) -> Result<ConcordanceCounts> {
    check_lengths(times, events, risks)?;
    Ok(RankedSample::new(times, events, risks)?.counts(None))
}

/// Harrell's C: among pairs with `T_i < T_j` and an event at `T_i`, the share
/// where `i` has the higher risk; risk ties count one half.
pub fn harrell_c(times: &[f64], events: &[bool], risks: &[f64]) -> Result<f64> {
    harrell_counts(times, events, risks)?
        .index()
        .ok_or(Error::NoValidPairs)
}
