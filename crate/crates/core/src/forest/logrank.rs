//! Two-sample log-rank statistic, direct and incremental.

/// Squared (χ²-form) two-group log-rank statistic `(O − E)² / V`.
///
/// `left` and `right` are `(times, failure flags)`. Returns 0 when there are
/// no events or the variance vanishes. Symmetric in group order.
pub fn logrank_statistic(left: (&[f64], &[bool]), right: (&[f64], &[bool])) -> f64 {
    let mut event_times: Vec<f64> = left
        .0
        .iter()
        .zip(left.1)
        .chain(right.0.iter().zip(right.1))
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();

    let at_risk = |times: &[f64], t: f64| times.iter().filter(|&&s| s >= t).count() as f64;
    let deaths = |g: (&[f64], &[bool]), t: f64| {
        g.0.iter().zip(g.1).filter(|(&s, &e)| e && s == t).count() as f64
    };

    let (mut o_minus_e, mut var) = (0.0, 0.0);
    for t in event_times {
        let nl = at_risk(left.0, t);
        let n = nl + at_risk(right.0, t);
        let dl = deaths(left, t);
        let d = dl + deaths(right, t);
        o_minus_e += dl - d * nl / n;
        if n > 1.0 {
            var += nl * (n - nl) * d * (n - d) / (n * n * (n - 1.0));
        }
    }
    if var > 0.0 {
        o_minus_e * o_minus_e / var
    } else {
        0.0
    }
}

/// Fenwick tree over `0..len` supporting point add and prefix sum.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0.0; len + 1],
        }
    }

    fn add(&mut self, idx: usize, v: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..end`.
    fn prefix(&self, end: usize) -> f64 {
        let mut i = end;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Per-node event-time tables that let rows move into the left child in
/// `O(log m)` each, keeping `O − E` and `V` of the left group current.
pub(crate) struct SplitScanner {
    /// Σ_{k<K} d_k / n_k
    expected: Vec<f64>,
    /// Σ_{k<K} c_k
    c_prefix: Vec<f64>,
    /// Σ_{k<K} c_k (n_k − 1)
    c_n_prefix: Vec<f64>,
    count: Fenwick,
    c_sum: Fenwick,
    left_len: usize,
    observed: f64,
    expected_total: f64,
    var: f64,
}

impl SplitScanner {
    /// `times`/`failure` describe the node's rows; returns the scanner and each
    /// row's `K` (number of node event times at or before its time).
    pub fn new(times: &[f64], failure: &[bool]) -> (Self, Vec<usize>) {
        let mut tau: Vec<f64> = times
            .iter()
            .zip(failure)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        tau.sort_by(f64::total_cmp);
        tau.dedup();
        let m = tau.len();

        let ks: Vec<usize> = times.iter().map(|&t| tau.partition_point(|&s| s <= t)).collect();
        // at-risk counts: rows with K > k; deaths: failures with K - 1 == k
        let mut n_at = vec![0f64; m + 1];
        let mut d_at = vec![0f64; m];
        for (&k, &e) in ks.iter().zip(failure) {
            n_at[k] += 1.0;
            if e {
                d_at[k - 1] += 1.0;
            }
        }
        let mut risk = vec![0f64; m];
        let mut acc = 0.0;
        for k in (0..m).rev() {
            acc += n_at[k + 1];
            risk[k] = acc;
        }

        let mut expected = vec![0.0; m + 1];
        let mut c_prefix = vec![0.0; m + 1];
        let mut c_n_prefix = vec![0.0; m + 1];
        for k in 0..m {
            let (n, d) = (risk[k], d_at[k]);
            let c = if n > 1.0 {
                d * (n - d) / (n * n * (n - 1.0))
            } else {
                0.0
            };
            expected[k + 1] = expected[k] + d / n;
            c_prefix[k + 1] = c_prefix[k] + c;
            c_n_prefix[k + 1] = c_n_prefix[k] + c * (n - 1.0);
        }
        (
            SplitScanner {
                expected,
                c_prefix,
                c_n_prefix,
                count: Fenwick::new(m + 1),
                c_sum: Fenwick::new(m + 1),
                left_len: 0,
                observed: 0.0,
                expected_total: 0.0,
                var: 0.0,
            },
            ks,
        )
    }

    /// Moves a row with event-time index `k` into the left group.
    pub fn push_left(&mut self, k: usize, failure: bool) {
        let below = self.count.prefix(k);
        let at_or_above = self.left_len as f64 - below;
        let cross = self.c_prefix[k] * at_or_above + self.c_sum.prefix(k);
        self.var += self.c_n_prefix[k] - 2.0 * cross;
        self.expected_total += self.expected[k];
        if failure {
            self.observed += 1.0;
        }
        self.count.add(k, 1.0);
        self.c_sum.add(k, self.c_prefix[k]);
        self.left_len += 1;
    }

    pub fn statistic(&self) -> f64 {
        let diff = self.observed - self.expected_total;
        if self.var > 1e-12 {
            diff * diff / self.var
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let s = logrank_statistic((&[1.0, 2.0], &[true, true]), (&[3.0, 4.0], &[true, true]));
        assert!((s - 49.0 / 17.0).abs() < 1e-12);
        let swapped =
            logrank_statistic((&[3.0, 4.0], &[true, true]), (&[1.0, 2.0], &[true, true]));
        assert!((s - swapped).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_zero() {
        let t = [1.0, 2.0, 3.0];
        let e = [true, false, true];
        assert!(logrank_statistic((&t, &e), (&t, &e)).abs() < 1e-15);
    }

    #[test]
    fn no_events_zero() {
        assert_eq!(logrank_statistic((&[1.0], &[false]), (&[2.0], &[false])), 0.0);
    }

    #[test]
    fn scanner_matches_direct() {
        let times = [5.0, 1.0, 3.0, 3.0, 8.0, 2.0, 7.0, 3.0, 6.0, 4.0];
        let fail = [true, true, false, true, false, true, true, true, false, true];
        let (mut sc, ks) = SplitScanner::new(&times, &fail);
        for split in 0..times.len() - 1 {
            sc.push_left(ks[split], fail[split]);
            let direct = logrank_statistic(
                (&times[..=split], &fail[..=split]),
                (&times[split + 1..], &fail[split + 1..]),
            );
            assert!(
                (sc.statistic() - direct).abs() < 1e-9 * (1.0 + direct),
                "split {split}: {} vs {direct}",
                sc.statistic()
            );
        }
    }
}
