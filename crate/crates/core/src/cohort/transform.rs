use serde::{Deserialize, Serialize};

use super::types::{
    AugmentedRow, Biomarker, BiomarkerPanel, IntervalRow, Outcome, PatientRecord, RowEvent,
};
use crate::error::{Error, Result};

/// Per-feature training statistics for z-scoring and mean imputation.
///
/// Standard deviations use the population denominator `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Imputation value when a patient has no earlier observation.
    pub impute_fallback: Vec<f64>,
}

impl NormalizationStats {
    /// Builds stats from explicit values; every `std` must be positive.
    pub fn new(features: Vec<String>, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if features.len() != mean.len() || features.len() != std.len() {
            return Err(Error::Data("normalization vectors differ in length".into()));
        }
        if let Some((name, _)) = features
            .iter()
            .zip(std.iter())
            .find(|(_, s)| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::ConstantFeature(name.clone()));
        }
        Ok(NormalizationStats {
            features,
            impute_fallback: mean.clone(),
            mean,
            std,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn z(&self, feature: usize, x: f64) -> f64 {
        (x - self.mean[feature]) / self.std[feature]
    }

    pub fn raw(&self, feature: usize, z: f64) -> f64 {
        z * self.std[feature] + self.mean[feature]
    }

    /// Z-scores a dense vector aligned with `features`.
    pub fn normalize_values(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().enumerate().map(|(j, &x)| self.z(j, x)).collect()
    }

    pub fn denormalize_values(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(j, &v)| self.raw(j, v)).collect()
    }

    /// Z-scores a complete six-feature panel. Stats must cover the biomarkers
    /// in canonical order.
    pub fn normalize_panel(&self, panel: &BiomarkerPanel) -> Result<Vec<f64>> {
        Biomarker::ALL
            .iter()
            .map(|&b| {
                let j = self.index_of(b.name())?;
                Ok(self.z(j, panel.require(b)?))
            })
            .collect()
    }
}

/// Fits mean and population std over every observed training follow-up value.
pub fn fit_normalization(train: &[PatientRecord]) -> Result<NormalizationStats> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit normalization on an empty cohort".into()));
    }
    let mut mean = Vec::with_capacity(Biomarker::COUNT);
    let mut std = Vec::with_capacity(Biomarker::COUNT);
    for b in Biomarker::ALL {
        let values: Vec<f64> = train
            .iter()
            .flat_map(|p| p.follow_ups.iter().filter_map(|f| f.panel.get(b)))
            .collect();
        let first = values.first().copied();
        if values.len() < 2 || values.iter().all(|&v| Some(v) == first) {
            return Err(Error::ConstantFeature(b.name().to_string()));
        }
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(var.sqrt());
    }
    NormalizationStats::new(
        Biomarker::ALL.iter().map(|b| b.name().to_string()).collect(),
        mean,
        std,
    )
}

/// Forward-fills missing values within each patient, falling back to the training mean.
///
/// Observed values are never altered.
pub fn impute(cohort: &[PatientRecord], stats: &NormalizationStats) -> Result<Vec<PatientRecord>> {
    let fallback: Vec<f64> = Biomarker::ALL
        .iter()
        .map(|b| stats.index_of(b.name()).map(|j| stats.impute_fallback[j]))
        .collect::<Result<_>>()?;
    Ok(cohort
        .iter()
        .map(|p| {
            let mut p = p.clone();
            let mut last: [Option<f64>; Biomarker::COUNT] = [None; Biomarker::COUNT];
            for f in &mut p.follow_ups {
                for b in Biomarker::ALL {
                    let j = b.index();
                    match f.panel.get(b) {
                        Some(v) => last[j] = Some(v),
                        None => f.panel.set(b, last[j].unwrap_or(fallback[j])),
                    }
                }
            }
            p
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFollowUp {
    pub day: u32,
    pub z: Vec<f64>,
}

/// A patient whose follow-ups have been imputed and z-scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPatient {
    pub patient_id: String,
    pub region: String,
    pub follow_ups: Vec<NormalizedFollowUp>,
    pub outcome: Outcome,
}

/// Applies fixed training statistics; panels must already be complete.
pub fn normalize(
    cohort: &[PatientRecord],
    stats: &NormalizationStats,
) -> Result<Vec<NormalizedPatient>> {
    cohort
        .iter()
        .map(|p| {
            let follow_ups = p
                .follow_ups
                .iter()
                .map(|f| {
                    Ok(NormalizedFollowUp {
                        day: f.day,
                        z: stats.normalize_panel(&f.panel)?,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(NormalizedPatient {
                patient_id: p.patient_id.clone(),
                region: p.region.clone(),
                follow_ups,
                outcome: p.outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub rows: Vec<AugmentedRow>,
    /// Follow-ups measured at or after the event time.
    pub dropped: usize,
}

/// Turns every follow-up into a sample whose time runs from the visit to the outcome.
pub fn augment(cohort: &[NormalizedPatient]) -> Augmented {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for p in cohort {
        let event = RowEvent::from(p.outcome.event_type);
        for f in &p.follow_ups {
            let tte = f64::from(p.outcome.event_day) - f64::from(f.day);
            if tte <= 0.0 {
                dropped += 1;
                continue;
            }
            rows.push(AugmentedRow {
                patient_id: p.patient_id.clone(),
                time_to_event: tte,
                event,
                covariates: f.z.clone(),
            });
        }
    }
    Augmented { rows, dropped }
}

/// Builds `(start, stop]` intervals between consecutive follow-ups.
///
/// Each interval carries the covariates measured at its start. The last one
/// ends at the outcome day and carries the outcome. Follow-ups on or after the
/// outcome day open no interval.
pub fn to_counting_process(cohort: &[NormalizedPatient]) -> Vec<IntervalRow> {
    let mut rows = Vec::new();
    for p in cohort {
        let end = p.outcome.event_day;
        let usable: Vec<&NormalizedFollowUp> =
            p.follow_ups.iter().filter(|f| f.day < end).collect();
        for (k, f) in usable.iter().enumerate() {
            let (stop, event) = match usable.get(k + 1) {
                Some(next) => (next.day, RowEvent::None),
                None => (end, RowEvent::from(p.outcome.event_type)),
            };
            rows.push(IntervalRow {
                patient_id: p.patient_id.clone(),
                start: f64::from(f.day),
                stop: f64::from(stop),
                event,
                covariates: f.z.clone(),
            });
        }
    }
    rows
}
