//! Elastic-net Cox fitting by penalized Newton–Raphson.
//!
//! Each iteration builds the quadratic model of the log partial likelihood at
//! the current coefficients and maximizes it plus the penalty. With no L1 part
//! that is a single linear solve; otherwise coordinate descent with
//! soft-thresholding. The step toward the maximizer is halved until the
//! penalized objective does not decrease.

use serde::{Deserialize, Serialize};

use super::baseline::BreslowBaseline;
use super::likelihood::{evaluate, CoxData, Order, TiesMethod};
use super::{CoxModel, FeatureSpace, FitDiagnostics, COX_FORMAT_VERSION};
use crate::cohort::IntervalRow;
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 20;
/// A converged step must also move no coefficient by more than this.
const STEP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Overall penalty strength λ.
    pub penalizer: f64,
    /// Share of the penalty on the L1 norm, α.
    pub l1_ratio: f64,
    pub max_iter: usize,
    /// Relative change of the penalized objective that ends iteration.
    pub tol: f64,
    pub ties: TiesMethod,
    /// Coefficient-norm bound that signals a monotone likelihood.
    pub divergence_bound: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            penalizer: 0.0,
            l1_ratio: 0.0,
            max_iter: 100,
            tol: 1e-7,
            ties: TiesMethod::Efron,
            divergence_bound: 50.0,
        }
    }
}

impl FitConfig {
    pub fn elastic_net(penalizer: f64, l1_ratio: f64) -> Self {
        FitConfig {
            penalizer,
            l1_ratio,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalizer >= 0.0 && self.penalizer.is_finite()) {
            return Err(Error::config("penalizer", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::config("l1_ratio", "must lie in [0, 1]"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol", "must be positive"));
        }
        Ok(())
    }

    fn l1(&self) -> f64 {
        self.penalizer * self.l1_ratio
    }

    fn l2(&self) -> f64 {
        self.penalizer * (1.0 - self.l1_ratio)
    }

    pub fn penalty(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.l1() * l1 + 0.5 * self.l2() * l2
    }
}

/// Penalty strengths searched by default.
pub const DEFAULT_PENALIZERS: [f64; 7] = [0.0, 0.01, 0.1, 0.2, 0.5, 1.0, 10.0];
/// L1 mixing ratios searched by default.
pub const DEFAULT_L1_RATIOS: [f64; 6] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9];

/// Cartesian product of penalizers and L1 ratios, penalizer-major.
pub fn elastic_net_grid(penalizers: &[f64], l1_ratios: &[f64]) -> Vec<FitConfig> {
    penalizers
        .iter()
        .flat_map(|&l| l1_ratios.iter().map(move |&a| FitConfig::elastic_net(l, a)))
        .collect()
}

pub fn default_grid() -> Vec<FitConfig> {
    elastic_net_grid(&DEFAULT_PENALIZERS, &DEFAULT_L1_RATIOS)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cholesky solve of a symmetric positive-definite system.
fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * p + k] * l[j * p + k]).sum();
            if i == j {
                let d = a[i * p + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * p + i] = d.sqrt();
            } else {
                l[i * p + j] = (a[i * p + j] - s) / l[j * p + j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let s: f64 = (0..i).map(|k| l[i * p + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| l[k * p + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * p + i];
    }
    Some(x)
}

/// Maximizer of the penalized quadratic model around `beta`.
fn solve_quadratic(
    beta: &[f64],
    grad: &[f64],
    info: &[f64],
    config: &FitConfig,
) -> Result<Vec<f64>> {
    let p = beta.len();
    let (l1, l2) = (config.l1(), config.l2());
    // r = g + I beta is the linear term of the model in absolute coordinates.
    let r: Vec<f64> = (0..p)
        .map(|j| grad[j] + (0..p).map(|k| info[j * p + k] * beta[k]).sum::<f64>())
        .collect();

    if l1 == 0.0 {
        let mut a = info.to_vec();
        for j in 0..p {
            a[j * p + j] += l2;
        }
        if let Some(b) = cholesky_solve(&a, &r, p) {
            return Ok(b);
        }
    }

    let mut b = beta.to_vec();
    for _ in 0..10_000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let cross: f64 = (0..p)
                .filter(|&k| k != j)
                .map(|k| info[j * p + k] * b[k])
                .sum();
            let denom = info[j * p + j] + l2;
            let z = r[j] - cross;
            let new = if denom > 0.0 {
                soft_threshold(z, l1) / denom
            } else if z.abs() <= l1 {
                0.0
            } else {
                return Err(Error::Numerical(
                    "quadratic subproblem is unbounded; information matrix is singular".into(),
                ));
            };
            max_change = max_change.max((new - b[j]).abs());
            b[j] = new;
        }
        let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_change <= 1e-13 * scale {
            break;
        }
    }
    Ok(b)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn fit_data(data: &CoxData, config: &FitConfig) -> Result<(Vec<f64>, FitDiagnostics)> {
    config.validate()?;
    if let Some(&j) = data.constant_columns().first() {
        return Err(Error::Data(format!("covariate column {j} is constant")));
    }
    let objective = |beta: &[f64]| {
        evaluate(data, beta, config.ties, Order::Value).loglik - config.penalty(beta)
    };

    let mut beta = vec![0.0; data.p];
    let mut obj = objective(&beta);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let d = evaluate(data, &beta, config.ties, Order::Hessian);
        let target = solve_quadratic(&beta, &d.gradient, &d.information, config)?;
        let delta: Vec<f64> = target.iter().zip(&beta).map(|(t, b)| t - b).collect();
        if delta.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
            let cand_obj = objective(&cand);
            if cand_obj.is_finite() && cand_obj >= obj {
                accepted = Some((cand, cand_obj, step));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_obj, step)) = accepted else {
            // No ascent left at working precision.
            converged = true;
            break;
        };
        let rel = (cand_obj - obj).abs() / obj.abs().max(f64::MIN_POSITIVE);
        let max_step = delta.iter().fold(0.0f64, |m, d| m.max((step * d).abs()));
        beta = cand;
        obj = cand_obj;
        trace.push(obj);

        let bn = norm(&beta);
        if bn > config.divergence_bound {
            return Err(Error::Divergence {
                norm: bn,
                bound: config.divergence_bound,
            });
        }
        if rel < config.tol && max_step < STEP_TOL {
            converged = true;
            break;
        }
    }

    let loglik = evaluate(data, &beta, config.ties, Order::Value).loglik;
    Ok((
        beta,
        FitDiagnostics {
            iterations,
            loglik,
            penalized_objective: obj,
            converged,
            objective_trace: trace,
        },
    ))
}

/// Fits an elastic-net Cox model; features are named `x0, x1, ...`.
pub fn fit_cox(data: &[IntervalRow], config: &FitConfig) -> Result<CoxModel> {
    let p = data.first().map_or(0, |r| r.covariates.len());
    fit_cox_with(data, config, &FeatureSpace::anonymous(p))
}

/// Fits an elastic-net Cox model over a named feature space.
///
/// Maximizes `ll(β) − λ(α‖β‖₁ + (1−α)/2‖β‖₂²)`. Competing deaths count as
/// censoring.
pub fn fit_cox_with(
    data: &[IntervalRow],
    config: &FitConfig,
    features: &FeatureSpace,
) -> Result<CoxModel> {
    let cox_data = CoxData::new(data)?;
    if features.names.len() != cox_data.p {
        return Err(Error::Data(format!(
            "{} feature names for {} covariates",
            features.names.len(),
            cox_data.p
        )));
    }
    let (beta, diagnostics) = fit_data(&cox_data, config)?;
    let baseline = BreslowBaseline::from_data(&cox_data, &beta);
    Ok(CoxModel {
        format_version: COX_FORMAT_VERSION,
        feature_names: features.names.clone(),
        coefficients: beta,
        normalization: features.normalization.clone(),
        baseline,
        config: *config,
        diagnostics,
    })
}
