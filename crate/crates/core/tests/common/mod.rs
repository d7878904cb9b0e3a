#![allow(dead_code)]

use graftsurv::metrics::{EvalPatient, Observation};
use proptest::prelude::*;

/// Pair-enumeration Harrell's C; `None` without valid pairs.
pub fn harrell_oracle(times: &[f64], events: &[bool], risks: &[f64]) -> Option<f64> {
    let n = times.len();
    let (mut conc, mut tied, mut valid) = (0u64, 0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            if events[i] && times[i] < times[j] {
                valid += 1;
                if risks[i] > risks[j] {
                    conc += 1;
                } else if risks[i] == risks[j] {
                    tied += 1;
                }
            }
        }
    }
    (valid > 0).then(|| (conc as f64 + 0.5 * tied as f64) / valid as f64)
}

/// Pair-enumeration TDCI with a per-patient static risk, written straight
/// from the pair definition.
pub fn tdci_oracle(patients: &[EvalPatient], risks: &[f64], t: f64, window: f64) -> Option<f64> {
    let at_risk = |p: &EvalPatient| p.time > t && p.observations.iter().any(|o| o.time <= t);
    let (mut conc, mut tied, mut valid) = (0u64, 0u64, 0u64);
    for (i, a) in patients.iter().enumerate() {
        for (j, b) in patients.iter().enumerate() {
            if !(at_risk(a) && at_risk(b)) {
                continue;
            }
            if a.event && a.time < b.time && a.time < t + window {
                valid += 1;
                if risks[i] > risks[j] {
                    conc += 1;
                } else if risks[i] == risks[j] {
                    tied += 1;
                }
            }
        }
    }
    (valid > 0).then(|| (conc as f64 + 0.5 * tied as f64) / valid as f64)
}

/// A patient with a visit at each given time and one dummy covariate.
pub fn eval_patient(id: usize, time: f64, event: bool, visits: &[f64]) -> EvalPatient {
    EvalPatient {
        patient_id: format!("p{id}"),
        time,
        event,
        observations: visits
            .iter()
            .map(|&v| Observation {
                time: v,
                covariates: vec![v],
            })
            .collect(),
    }
}

/// Survival instance with deliberately coarse times and risks so ties occur.
#[derive(Debug, Clone)]
pub struct Instance {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub risks: Vec<f64>,
    pub first_visit: Vec<f64>,
}

impl Instance {
    pub fn patients(&self) -> Vec<EvalPatient> {
        (0..self.times.len())
            .map(|i| {
                let v = self.first_visit[i];
                eval_patient(i, self.times[i], self.events[i], &[v, v + 1.0])
            })
            .collect()
    }
}

pub fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (2..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(1u32..=40, n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-6i32..=6, n),
            prop::collection::vec(0u32..=6, n),
        )
            .prop_map(|(t, e, r, v)| Instance {
                times: t.into_iter().map(|x| f64::from(x) / 4.0).collect(),
                events: e,
                risks: r.into_iter().map(|x| f64::from(x) / 2.0).collect(),
                first_visit: v.into_iter().map(|x| f64::from(x) / 2.0).collect(),
            })
    })
}
