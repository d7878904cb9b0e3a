//! Random survival forest with log-rank splitting and Nelson–Aalen leaves.
//!
//! Competing deaths are treated as censoring. Each tree draws its own
//! bootstrap sample from a generator seeded with `seed + tree_index`, so the
//! fitted forest does not depend on the number of worker threads.

mod logrank;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use logrank::logrank_statistic;
use logrank::SplitScanner;

use crate::cohort::{AugmentedRow, BiomarkerPanel, NormalizationStats};
use crate::error::{Error, Result};

pub const RSF_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsfConfig {
    pub n_estimators: usize,
    /// Nodes with fewer rows than this become leaves.
    pub min_samples_split: usize,
    /// The root has depth 1; a node at `max_depth` is always a leaf.
    pub max_depth: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Draw a bootstrap sample per tree; otherwise every tree sees all rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RsfConfig {
    fn default() -> Self {
        RsfConfig {
            n_estimators: 100,
            min_samples_split: 20,
            max_depth: 9,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RsfConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::config("n_estimators", "must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::config("min_samples_split", "must be at least 2"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("max_depth", "must be at least 1"));
        }
        if let Some(m) = self.mtry {
            if m == 0 || m > p {
                return Err(Error::config("mtry", format!("must lie in 1..={p}, got {m}")));
            }
        }
        Ok(())
    }

    fn mtry_for(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().ceil() as usize).clamp(1, p))
    }
}

/// Sparse Nelson–Aalen cumulative hazard of a leaf's in-bag rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub times: Vec<f64>,
    pub cumulative_hazard: Vec<f64>,
    /// Σ over the forest time grid of this leaf's cumulative hazard.
    pub mortality: f64,
    pub n_samples: usize,
}

impl Leaf {
    /// `times` ascending, `cumulative_hazard` nondecreasing; `grid` ascending.
    pub fn new(times: Vec<f64>, cumulative_hazard: Vec<f64>, n_samples: usize, grid: &[f64]) -> Self {
        let mut leaf = Leaf {
            times,
            cumulative_hazard,
            mortality: 0.0,
            n_samples,
        };
        leaf.mortality = grid.iter().map(|&g| leaf.chf_at(g)).sum();
        leaf
    }

    fn nelson_aalen(times: &[f64], failure: &[bool], grid: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut at_risk = times.len() as f64;
        let (mut ts, mut hs) = (Vec::new(), Vec::new());
        let mut h = 0.0;
        let mut i = 0;
        while i < order.len() {
            let t = times[order[i]];
            let (mut d, mut leaving) = (0.0, 0.0);
            while i < order.len() && times[order[i]] == t {
                if failure[order[i]] {
                    d += 1.0;
                }
                leaving += 1.0;
                i += 1;
            }
            if d > 0.0 {
                h += d / at_risk;
                ts.push(t);
                hs.push(h);
            }
            at_risk -= leaving;
        }
        Leaf::new(ts, hs, times.len(), grid)
    }

    /// Step-function value at `t` (0 before the first event).
    pub fn chf_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative_hazard[k - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf(Leaf),
}

impl Node {
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(l) => return l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Depth with the root counted as 1.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub normalization: Option<NormalizationStats>,
    pub config: RsfConfig,
    /// Distinct failure times of the training data, ascending.
    pub time_grid: Vec<f64>,
    pub trees: Vec<Node>,
}

struct TrainData<'a> {
    p: usize,
    x: &'a [f64],
    times: &'a [f64],
    failure: &'a [bool],
    grid: &'a [f64],
    config: &'a RsfConfig,
    mtry: usize,
}

impl TrainData<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.p + j]
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let t: Vec<f64> = rows.iter().map(|&i| self.times[i]).collect();
        let e: Vec<bool> = rows.iter().map(|&i| self.failure[i]).collect();
        Node::Leaf(Leaf::nelson_aalen(&t, &e, self.grid))
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let events = rows.iter().filter(|&&i| self.failure[i]).count();
        if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split || events == 0
        {
            return self.leaf(&rows);
        }
        let mut features: Vec<usize> = sample(rng, self.p, self.mtry).into_vec();
        features.sort_unstable();

        let times: Vec<f64> = rows.iter().map(|&i| self.times[i]).collect();
        let fails: Vec<bool> = rows.iter().map(|&i| self.failure[i]).collect();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for &j in &features {
            order.sort_by(|&a, &b| self.value(rows[a], j).total_cmp(&self.value(rows[b], j)));
            let (mut scanner, ks) = SplitScanner::new(&times, &fails);
            for w in 0..order.len() - 1 {
                let r = order[w];
                scanner.push_left(ks[r], fails[r]);
                let (lo, hi) = (self.value(rows[r], j), self.value(rows[order[w + 1]], j));
                if lo == hi {
                    continue;
                }
                let stat = scanner.statistic();
                if best.is_none_or(|(s, _, _)| stat > s) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((stat, j, threshold));
                }
            }
        }
        let Some((stat, feature, threshold)) = best else {
            return self.leaf(&rows);
        };
        if !(stat > 0.0) {
            return self.leaf(&rows);
        }
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.value(i, feature) <= threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(left, depth + 1, rng)),
            right: Box::new(self.grow(right, depth + 1, rng)),
        }
    }
}

/// Fits a forest on augmented rows. Covariates are used as given.
pub fn fit_rsf(rows: &[AugmentedRow], config: &RsfConfig) -> Result<RsfModel> {
    let p = rows.first().map_or(0, |r| r.covariates.len());
    fit_rsf_with(rows, config, (0..p).map(|j| format!("x{j}")).collect(), None)
}

pub fn fit_rsf_with(
    rows: &[AugmentedRow],
    config: &RsfConfig,
    feature_names: Vec<String>,
    normalization: Option<NormalizationStats>,
) -> Result<RsfModel> {
    if rows.is_empty() {
        return Err(Error::Data("no training rows".into()));
    }
    let p = rows[0].covariates.len();
    if p == 0 || feature_names.len() != p {
        return Err(Error::Data(format!(
            "{} feature names for {p} covariates",
            feature_names.len()
        )));
    }
    config.validate(p)?;
    let mut x = Vec::with_capacity(rows.len() * p);
    for r in rows {
        if r.covariates.len() != p {
            return Err(Error::Data("rows differ in covariate dimension".into()));
        }
        if r.covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite covariate for patient {}", r.patient_id)));
        }
        if !(r.time_to_event > 0.0 && r.time_to_event.is_finite()) {
            return Err(Error::Data(format!(
                "time to event must be positive for patient {}",
                r.patient_id
            )));
        }
        x.extend_from_slice(&r.covariates);
    }
    let times: Vec<f64> = rows.iter().map(|r| r.time_to_event).collect();
    let failure: Vec<bool> = rows.iter().map(|r| r.event.is_failure()).collect();
    if !failure.iter().any(|&f| f) {
        return Err(Error::NoEvents);
    }
    let mut grid: Vec<f64> = times
        .iter()
        .zip(&failure)
        .filter(|(_, &f)| f)
        .map(|(&t, _)| t)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let data = TrainData {
        p,
        x: &x,
        times: &times,
        failure: &failure,
        grid: &grid,
        config,
        mtry: config.mtry_for(p),
    };
    let n = rows.len();
    let trees: Vec<Node> = (0..config.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            let in_bag: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            data.grow(in_bag, 1, &mut rng)
        })
        .collect();

    Ok(RsfModel {
        format_version: RSF_FORMAT_VERSION,
        feature_names,
        normalization,
        config: *config,
        time_grid: grid,
        trees,
    })
}

impl RsfModel {
    /// Assembles a model from prebuilt trees.
    pub fn from_trees(feature_names: Vec<String>, time_grid: Vec<f64>, trees: Vec<Node>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::config("trees", "forest needs at least one tree"));
        }
        Ok(RsfModel {
            format_version: RSF_FORMAT_VERSION,
            config: RsfConfig {
                n_estimators: trees.len(),
                ..RsfConfig::default()
            },
            feature_names,
            normalization: None,
            time_grid,
            trees,
        })
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Data(format!(
                "expected {} covariates, got {}",
                self.feature_names.len(),
                x.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingCovariate(self.feature_names[j].clone()));
        }
        Ok(())
    }

    /// Expected mortality: the ensemble cumulative hazard summed over the time grid.
    ///
    /// Leaf contributions are summed in sorted order, so the value does not
    /// depend on tree order.
    pub fn risk(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let mut m: Vec<f64> = self.trees.iter().map(|t| t.leaf_for(x).mortality).collect();
        m.sort_by(f64::total_cmp);
        Ok(m.iter().sum::<f64>() / self.trees.len() as f64)
    }

    /// Ensemble cumulative hazard on `time_grid`.
    pub fn cumulative_hazard(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let leaves: Vec<&Leaf> = self.trees.iter().map(|t| t.leaf_for(x)).collect();
        let k = leaves.len() as f64;
        Ok(self
            .time_grid
            .iter()
            .map(|&g| leaves.iter().map(|l| l.chf_at(g)).sum::<f64>() / k)
            .collect())
    }

    /// Covariates for a raw panel via the stored normalization statistics.
    pub fn normalize_panel(&self, panel: &BiomarkerPanel) -> Result<Vec<f64>> {
        let stats = self.normalization.as_ref().ok_or_else(|| {
            Error::config("normalization", "model has no stored normalization for raw input")
        })?;
        self.feature_names
            .iter()
            .map(|name| {
                let b = crate::cohort::Biomarker::from_name(name)?;
                let j = stats.index_of(name)?;
                Ok(stats.z(j, panel.require(b)?))
            })
            .collect()
    }

    pub fn risk_raw(&self, panel: &BiomarkerPanel) -> Result<f64> {
        self.risk(&self.normalize_panel(panel)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::RowEvent;

    fn rows(data: &[(f64, bool, f64)]) -> Vec<AugmentedRow> {
        data.iter()
            .enumerate()
            .map(|(i, &(t, e, x))| AugmentedRow {
                patient_id: format!("p{i}"),
                time_to_event: t,
                event: if e { RowEvent::GraftFailure } else { RowEvent::None },
                covariates: vec![x],
            })
            .collect()
    }

    #[test]
    fn single_leaf_forest_risk() {
        let grid = vec![1.0, 2.0];
        let leaf = Leaf::new(vec![1.0, 2.0], vec![0.5, 1.0], 4, &grid);
        let trees = vec![Node::Leaf(leaf.clone()), Node::Leaf(leaf)];
        let m = RsfModel::from_trees(vec!["x".into()], grid, trees).unwrap();
        assert_eq!(m.risk(&[0.3]).unwrap(), 1.5);
    }

    #[test]
    fn depth_one_is_root_leaf() {
        let data = rows(&[(1.0, true, 0.0), (2.0, true, 1.0), (3.0, false, 2.0), (4.0, true, 3.0)]);
        let cfg = RsfConfig {
            n_estimators: 1,
            max_depth: 1,
            min_samples_split: 2,
            bootstrap: false,
            ..RsfConfig::default()
        };
        let m = fit_rsf(&data, &cfg).unwrap();
        assert_eq!(m.trees[0].n_leaves(), 1);
        // whole-sample Nelson–Aalen: 1/4, 1/4 + 1/3, then flat, then +1
        let h = [0.25, 0.25 + 1.0 / 3.0, 0.25 + 1.0 / 3.0 + 1.0];
        let expected: f64 = h.iter().sum();
        for x in [0.0, 1.5, 3.0] {
            assert!((m.risk(&[x]).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn separates_obvious_groups() {
        let mut d = Vec::new();
        for i in 0..20 {
            d.push((1.0 + i as f64 * 0.01, true, 5.0 + i as f64 * 0.1));
            d.push((10.0 + i as f64 * 0.01, i % 3 == 0, -5.0 - i as f64 * 0.1));
        }
        let cfg = RsfConfig {
            n_estimators: 10,
            min_samples_split: 5,
            max_depth: 3,
            seed: 3,
            ..RsfConfig::default()
        };
        let m = fit_rsf(&rows(&d), &cfg).unwrap();
        assert!(m.risk(&[6.0]).unwrap() > m.risk(&[-6.0]).unwrap());
        let chf = m.cumulative_hazard(&[6.0]).unwrap();
        assert!(chf.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn json_round_trip() {
        let d = rows(&[(1.0, true, 0.0), (2.0, true, 1.0), (3.0, false, 2.0), (4.0, true, 3.0)]);
        let cfg = RsfConfig {
            n_estimators: 3,
            min_samples_split: 2,
            ..RsfConfig::default()
        };
        let m = fit_rsf(&d, &cfg).unwrap();
        assert_eq!(RsfModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
