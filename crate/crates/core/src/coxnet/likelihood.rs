//! Cox partial likelihood over counting-process data and its first two derivatives.
//!
//! The risk set at an event time `t` is every interval with `start < t <= stop`.
//! Event times are swept in descending order: an interval enters once
//! `stop >= t` and leaves once `start >= t`, so each row is added and removed
//! exactly once.

use serde::{Deserialize, Serialize};

use crate::cohort::IntervalRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TiesMethod {
    #[default]
    Efron,
    Breslow,
}

/// Interval data laid out for the risk-set sweep.
#[derive(Debug, Clone)]
pub(crate) struct CoxData {
    pub n: usize,
    pub p: usize,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
    pub failure: Vec<bool>,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    by_stop: Vec<usize>,
    by_start: Vec<usize>,
    /// Distinct failure times, descending.
    event_times: Vec<f64>,
}

impl CoxData {
    pub fn new(rows: &[IntervalRow]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.covariates.len());
        let mut x = Vec::with_capacity(n * p);
        for r in rows {
            if r.covariates.len() != p {
                return Err(Error::Data("rows differ in covariate dimension".into()));
            }
            if !(r.start < r.stop) {
                return Err(Error::Data(format!(
                    "interval ({}, {}] for patient {} is empty",
                    r.start, r.stop, r.patient_id
                )));
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite covariate for patient {}",
                    r.patient_id
                )));
            }
            x.extend_from_slice(&r.covariates);
        }
        let start: Vec<f64> = rows.iter().map(|r| r.start).collect();
        let stop: Vec<f64> = rows.iter().map(|r| r.stop).collect();
        let failure: Vec<bool> = rows.iter().map(|r| r.event.is_failure()).collect();

        let mut by_stop: Vec<usize> = (0..n).collect();
        by_stop.sort_by(|&a, &b| stop[b].total_cmp(&stop[a]).then(a.cmp(&b)));
        let mut by_start: Vec<usize> = (0..n).collect();
        by_start.sort_by(|&a, &b| start[b].total_cmp(&start[a]).then(a.cmp(&b)));

        let mut event_times: Vec<f64> = (0..n).filter(|&i| failure[i]).map(|i| stop[i]).collect();
        event_times.sort_by(|a, b| b.total_cmp(a));
        event_times.dedup();
        if event_times.is_empty() {
            return Err(Error::NoEvents);
        }
        Ok(CoxData {
            n,
            p,
            start,
            stop,
            failure,
            x,
            by_stop,
            by_start,
            event_times,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn linear_predictors(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), beta)).collect()
    }

    /// Indices of columns that never vary; such a fit is unidentifiable.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| {
                let first = self.x[j];
                (0..self.n).all(|i| self.x[i * self.p + j] == first)
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// What the sweep should accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone)]
pub(crate) struct Derivatives {
    pub loglik: f64,
    pub gradient: Vec<f64>,
    /// Observed information (negative Hessian), row-major `p x p`.
    pub information: Vec<f64>,
}

/// Running weighted sums over a set of rows.
struct Sums {
    count: usize,
    s0: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Sums {
    fn new(p: usize, order: Order) -> Self {
        Sums {
            count: 0,
            s0: 0.0,
            s1: if order == Order::Value { Vec::new() } else { vec![0.0; p] },
            s2: if order == Order::Hessian { vec![0.0; p * p] } else { Vec::new() },
        }
    }

    fn add(&mut self, w: f64, x: &[f64], sign: f64) {
        let sw = sign * w;
        self.s0 += sw;
        for (s, xi) in self.s1.iter_mut().zip(x) {
            *s += sw * xi;
        }
        if !self.s2.is_empty() {
            let p = x.len();
            for a in 0..p {
                let wa = sw * x[a];
                for b in 0..p {
                    self.s2[a * p + b] += wa * x[b];
                }
            }
        }
    }

    fn reset(&mut self) {
        self.s0 = 0.0;
        self.s1.iter_mut().for_each(|v| *v = 0.0);
        self.s2.iter_mut().for_each(|v| *v = 0.0);
    }
}

pub(crate) fn evaluate(data: &CoxData, beta: &[f64], ties: TiesMethod, order: Order) -> Derivatives {
    let p = data.p;
    let eta = data.linear_predictors(beta);
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut risk = Sums::new(p, order);
    let mut deaths = Sums::new(p, order);
    let mut loglik = 0.0;
    let mut gradient = vec![0.0; p];
    let mut information = vec![0.0; if order == Order::Hessian { p * p } else { 0 }];
    let mut mean = vec![0.0; p];

    let (mut add_ptr, mut rem_ptr) = (0, 0);
    for &t in &data.event_times {
        deaths.reset();
        deaths.count = 0;
        let mut death_eta = 0.0;
        while add_ptr < data.n && data.stop[data.by_stop[add_ptr]] >= t {
            let i = data.by_stop[add_ptr];
            risk.add(w[i], data.row(i), 1.0);
            risk.count += 1;
            if data.failure[i] && data.stop[i] == t {
                deaths.add(w[i], data.row(i), 1.0);
                deaths.count += 1;
                death_eta += eta[i];
                if order != Order::Value {
                    for (g, xi) in gradient.iter_mut().zip(data.row(i)) {
                        *g += xi;
                    }
                }
            }
            add_ptr += 1;
        }
        while rem_ptr < data.n && data.start[data.by_start[rem_ptr]] >= t {
            let i = data.by_start[rem_ptr];
            risk.add(w[i], data.row(i), -1.0);
            risk.count -= 1;
            rem_ptr += 1;
        }
        if risk.count == 0 {
            risk.reset();
        }

        let d = deaths.count;
        loglik += death_eta;
        for l in 0..d {
            let frac = match ties {
                TiesMethod::Breslow => 0.0,
                TiesMethod::Efron => l as f64 / d as f64,
            };
            let den = risk.s0 - frac * deaths.s0;
            loglik -= den.ln() + shift;
            if order == Order::Value {
                continue;
            }
            for j in 0..p {
                mean[j] = (risk.s1[j] - frac * deaths.s1[j]) / den;
                gradient[j] -= mean[j];
            }
            if order == Order::Hessian {
                for a in 0..p {
                    for b in 0..p {
                        let s2 = risk.s2[a * p + b] - frac * deaths.s2[a * p + b];
                        information[a * p + b] += s2 / den - mean[a] * mean[b];
                    }
                }
            }
        }
    }
    Derivatives {
        loglik,
        gradient,
        information,
    }
}

fn check_beta(data: &CoxData, beta: &[f64]) -> Result<()> {
    if beta.len() != data.p {
        return Err(Error::Data(format!(
            "coefficient length {} does not match covariate dimension {}",
            beta.len(),
            data.p
        )));
    }
    Ok(())
}

/// Log partial likelihood of `beta`.
pub fn partial_loglik(beta: &[f64], data: &[IntervalRow], ties: TiesMethod) -> Result<f64> {
    let data = CoxData::new(data)?;
    check_beta(&data, beta)?;
    Ok(evaluate(&data, beta, ties, Order::Value).loglik)
}

/// Analytic score vector of the log partial likelihood.
pub fn gradient(beta: &[f64], data: &[IntervalRow], ties: TiesMethod) -> Result<Vec<f64>> {
    let data = CoxData::new(data)?;
    check_beta(&data, beta)?;
    Ok(evaluate(&data, beta, ties, Order::Gradient).gradient)
}

/// Observed information matrix (negative Hessian), row-major.
pub fn information(beta: &[f64], data: &[IntervalRow], ties: TiesMethod) -> Result<Vec<f64>> {
    let data = CoxData::new(data)?;
    check_beta(&data, beta)?;
    Ok(evaluate(&data, beta, ties, Order::Hessian).information)
}

impl CoxData {
    /// Breslow hazard increments `d_k / Σ_{R(t_k)} exp(βᵀz)`, ascending in time.
    pub(crate) fn breslow_increments(&self, beta: &[f64]) -> Vec<(f64, f64)> {
        let eta = self.linear_predictors(beta);
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
        let (mut add_ptr, mut rem_ptr) = (0, 0);
        let (mut s0, mut count) = (0.0, 0usize);
        let mut out = Vec::with_capacity(self.event_times.len());
        for &t in &self.event_times {
            let mut d = 0usize;
            while add_ptr < self.n && self.stop[self.by_stop[add_ptr]] >= t {
                let i = self.by_stop[add_ptr];
                s0 += w[i];
                count += 1;
                if self.failure[i] && self.stop[i] == t {
                    d += 1;
                }
                add_ptr += 1;
            }
            while rem_ptr < self.n && self.start[self.by_start[rem_ptr]] >= t {
                s0 -= w[self.by_start[rem_ptr]];
                count -= 1;
                rem_ptr += 1;
            }
            if count == 0 {
                s0 = 0.0;
            }
            // exp(shift) factored back in: d / (s0 * e^shift)
            out.push((t, d as f64 / s0 * (-shift).exp()));
        }
        out.reverse();
        out
    }
}
