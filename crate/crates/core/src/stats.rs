//! Comparing several models over several datasets: Friedman test, pairwise
//! Wilcoxon signed-rank tests with Holm adjustment, and critical-difference
//! cliques.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const CD_FORMAT_VERSION: u32 = 1;

/// Largest sample size for which Wilcoxon p-values are exact.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// `scores[model][dataset]`; higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(models: Vec<String>, datasets: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if models.len() < 2 || datasets.len() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 models and 2 datasets, got {} and {}",
                models.len(),
                datasets.len()
            )));
        }
        if scores.len() != models.len() || scores.iter().any(|r| r.len() != datasets.len()) {
            return Err(Error::Data("score matrix shape does not match labels".into()));
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("score matrix has missing or non-finite cells".into()));
        }
        Ok(ScoreMatrix {
            models,
            datasets,
            scores,
        })
    }

    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn n(&self) -> usize {
        self.datasets.len()
    }

    /// Ranks of each model per dataset, `ranks[dataset][model]`; best is 1.
    pub fn ranks(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|d| {
                let col: Vec<f64> = self.scores.iter().map(|r| -r[d]).collect();
                average_ranks(&col)
            })
            .collect()
    }

    pub fn mean_ranks(&self) -> Vec<f64> {
        let ranks = self.ranks();
        (0..self.k())
            .map(|m| ranks.iter().map(|r| r[m]).sum::<f64>() / self.n() as f64)
            .collect()
    }
}

/// 1-based ranks in ascending order; ties share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Friedman χ² on within-dataset ranks, without tie correction.
pub fn friedman_test(m: &ScoreMatrix) -> Result<TestResult> {
    let (k, n) = (m.k() as f64, m.n() as f64);
    let sum_sq: f64 = m.mean_ranks().iter().map(|r| r * r).sum();
    let statistic = (12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0).powi(2) / 4.0)).max(0.0);
    let chi2 = ChiSquared::new(k - 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestResult {
        statistic,
        p_value: chi2.sf(statistic).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WilcoxonMethod {
    /// Exact up to [`WILCOXON_EXACT_MAX_N`] nonzero differences, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Nonzero differences used.
    pub n: usize,
    pub exact: bool,
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(x, y, WilcoxonMethod::Auto)
}

/// Two-sided signed-rank test on paired samples; zero differences are dropped.
pub fn wilcoxon_signed_rank_with(x: &[f64], y: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data(format!(
            "paired samples need equal lengths >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite paired difference".into()));
    }
    if d.is_empty() {
        return Err(Error::Data("all paired differences are zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    // doubled ranks are integers even with ties
    let ranks2: Vec<u64> = average_ranks(&abs).iter().map(|r| (2.0 * r) as u64).collect();
    let w_plus2: u64 = d.iter().zip(&ranks2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = ranks2.iter().sum();
    let statistic = w_plus2.min(total2 - w_plus2) as f64 / 2.0;

    let exact = match method {
        WilcoxonMethod::Auto => n <= WILCOXON_EXACT_MAX_N,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p_value = if exact {
        exact_p(&ranks2, w_plus2)
    } else {
        normal_p(&abs, w_plus2 as f64 / 2.0)
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        n,
        exact,
    })
}

/// `2·min(P(W+ <= w), P(W+ >= w))` over all sign assignments, via subset-sum counts.
fn exact_p(ranks2: &[u64], w_plus2: u64) -> f64 {
    let total: usize = ranks2.iter().sum::<u64>() as usize;
    let mut ways = vec![0f64; total + 1];
    ways[0] = 1.0;
    for &r in ranks2 {
        let r = r as usize;
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let w = w_plus2 as usize;
    let lower: f64 = ways[..=w].iter().sum();
    let upper: f64 = ways[w..].iter().sum();
    let all = 2f64.powi(ranks2.len() as i32);
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Normal approximation with tie-corrected variance and continuity correction.
fn normal_p(abs: &[f64], w_plus: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).min(1.0)
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_correction(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Data(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * pvals[i]).min(1.0));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdResult {
    pub format_version: u32,
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub friedman: TestResult,
    pub alpha: f64,
    /// Holm-adjusted pairwise p-values; absent when the Friedman test is not significant.
    pub pairwise_p: Option<Vec<Vec<f64>>>,
    /// Maximal groups of models with no significant internal difference.
    pub cliques: Vec<Vec<String>>,
}

pub fn critical_difference(m: &ScoreMatrix, alpha: f64) -> Result<CdResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", "must lie strictly between 0 and 1"));
    }
    let k = m.k();
    let friedman = friedman_test(m)?;
    let (pairwise_p, clique_idx) = if friedman.p_value >= alpha {
        (None, vec![(0..k).collect::<Vec<_>>()])
    } else {
        let mut pairs = Vec::new();
        let mut raw = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                pairs.push((a, b));
                let p = if m.scores[a] == m.scores[b] {
                    1.0
                } else {
                    wilcoxon_signed_rank(&m.scores[a], &m.scores[b])?.p_value
                };
                raw.push(p);
            }
        }
        let adj = holm_correction(&raw)?;
        let mut matrix = vec![vec![1.0; k]; k];
        for (&(a, b), &p) in pairs.iter().zip(&adj) {
            matrix[a][b] = p;
            matrix[b][a] = p;
        }
        let connected: Vec<Vec<bool>> = (0..k)
            .map(|a| (0..k).map(|b| a != b && matrix[a][b] >= alpha).collect())
            .collect();
        (Some(matrix), maximal_cliques(&connected))
    };
    Ok(CdResult {
        format_version: CD_FORMAT_VERSION,
        models: m.models.clone(),
        datasets: m.datasets.clone(),
        mean_ranks: m.mean_ranks(),
        friedman,
        alpha,
        pairwise_p,
        cliques: clique_idx
            .into_iter()
            .map(|c| c.into_iter().map(|i| m.models[i].clone()).collect())
            .collect(),
    })
}

/// All maximal cliques (Bron–Kerbosch), each ascending, listed in ascending order.
fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn expand(adj: &[Vec<bool>], r: Vec<usize>, mut p: Vec<usize>, mut x: Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if p.is_empty() && x.is_empty() {
            out.push(r);
            return;
        }
        while let Some(&v) = p.first() {
            let mut r2 = r.clone();
            r2.push(v);
            let p2 = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let x2 = x.iter().copied().filter(|&u| adj[v][u]).collect();
            expand(adj, r2, p2, x2, out);
            p.remove(0);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    expand(adj, Vec::new(), (0..adj.len()).collect(), Vec::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}

/// Minimal critical-difference diagram: rank axis, labelled models, clique bars.
pub fn render_cd_svg(cd: &CdResult) -> String {
    let k = cd.models.len();
    let (width, left, right) = (600.0, 60.0, 540.0);
    let axis_y = 40.0;
    let x_of = |rank: f64| left + (rank - 1.0) / ((k.max(2) - 1) as f64) * (right - left);
    let label_rows = k as f64 * 18.0;
    let height = axis_y + 30.0 + label_rows + cd.cliques.len() as f64 * 8.0 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<line x1="{left}" y1="{axis_y}" x2="{right}" y2="{axis_y}" stroke="black"/>"#);
    for r in 1..=k {
        let x = x_of(r as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{axis_y}" stroke="black"/><text x="{x:.1}" y="{}" text-anchor="middle">{r}</text>"#,
            axis_y - 5.0,
            axis_y - 10.0
        );
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| cd.mean_ranks[a].total_cmp(&cd.mean_ranks[b]).then(a.cmp(&b)));
    for (row, &m) in order.iter().enumerate() {
        let x = x_of(cd.mean_ranks[m]);
        let y = axis_y + 30.0 + row as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{axis_y}" x2="{x:.1}" y2="{y:.1}" stroke="gray"/><text x="{:.1}" y="{:.1}">{} ({:.2})</text>"#,
            x + 4.0,
            y + 4.0,
            escape(&cd.models[m]),
            cd.mean_ranks[m]
        );
    }
    let mut bar_y = axis_y + 12.0;
    for clique in cd.cliques.iter().filter(|c| c.len() > 1) {
        let ranks: Vec<f64> = clique
            .iter()
            .filter_map(|name| cd.models.iter().position(|m| m == name))
            .map(|i| cd.mean_ranks[i])
            .collect();
        let lo = ranks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{bar_y:.1}" x2="{:.1}" y2="{bar_y:.1}" stroke="black" stroke-width="4"/>"#,
            x_of(lo) - 3.0,
            x_of(hi) + 3.0
        );
        bar_y += 8.0;
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
