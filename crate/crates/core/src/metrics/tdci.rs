use serde::{Deserialize, Serialize};

use super::concordance::{ConcordanceCounts, RankedSample};
use crate::cohort::{days_to_years, EventType, PatientRecord};
use crate::error::{Error, Result};

pub const DEFAULT_PREDICTION_TIMES: [f64; 4] = [0.5, 1.0, 3.0, 5.0];
pub const DEFAULT_WINDOWS: [f64; 4] = [1.0, 3.0, 5.0, 7.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Years since transplant.
    pub time: f64,
    pub covariates: Vec<f64>,
}

/// One patient as seen by the evaluation: outcome in years plus visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPatient {
    pub patient_id: String,
    /// Years to graft failure or censoring.
    pub time: f64,
    /// Graft failure; competing deaths count as censored.
    pub event: bool,
    /// Ascending in time.
    pub observations: Vec<Observation>,
}

impl EvalPatient {
    /// Raw six-biomarker covariates per visit; missing values become NaN.
    pub fn from_record(p: &PatientRecord) -> Self {
        EvalPatient {
            patient_id: p.patient_id.clone(),
            time: days_to_years(f64::from(p.outcome.event_day)),
            event: p.outcome.event_type == EventType::GraftFailure,
            observations: p
                .follow_ups
                .iter()
                .map(|f| Observation {
                    time: days_to_years(f64::from(f.day)),
                    covariates: f.panel.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                })
                .collect(),
        }
    }

    /// Covariates of the last visit at or before `t`.
    pub fn covariates_at(&self, t: f64) -> Option<&[f64]> {
        let k = self.observations.partition_point(|o| o.time <= t);
        (k > 0).then(|| self.observations[k - 1].covariates.as_slice())
    }
}

/// What a risk function sees for one patient in one grid cell.
#[derive(Debug, Clone, Copy)]
pub struct RiskContext<'a> {
    /// Position of the patient in the evaluated dataset.
    pub patient: usize,
    pub patient_id: &'a str,
    pub covariates: &'a [f64],
    pub t: f64,
    pub window: f64,
}

/// Risk function that ignores covariates and reads a precomputed per-patient score.
pub fn static_risk(risks: &[f64]) -> impl Fn(&RiskContext<'_>) -> Result<f64> + Sync + '_ {
    move |ctx| {
        risks
            .get(ctx.patient)
            .copied()
            .ok_or_else(|| Error::Data(format!("no risk for patient {}", ctx.patient_id)))
    }
}

fn check_cell(t: f64, window: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config("prediction_time", format!("must be >= 0, got {t}")));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::config("window", format!("must be > 0, got {window}")));
    }
    Ok(())
}

/// One `(t, Δt)` cell with risks already evaluated.
#[derive(Debug, Clone)]
pub(crate) struct PreparedCell {
    sample: RankedSample,
}

impl PreparedCell {
    /// Eligible patients are event-free beyond `t` with a visit at or before `t`.
    /// Earlier pair members must fail before `t + window`.
    pub fn new<F>(patients: &[EvalPatient], risk: &F, t: f64, window: f64) -> Result<Self>
    where
        F: Fn(&RiskContext<'_>) -> Result<f64> + Sync + ?Sized,
    {
        check_cell(t, window)?;
        let (mut ids, mut times, mut comparable, mut risks) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, p) in patients.iter().enumerate() {
            if !(p.time > t) {
                continue;
            }
            let Some(x) = p.covariates_at(t) else { continue };
            let r = risk(&RiskContext {
                patient: i,
                patient_id: &p.patient_id,
                covariates: x,
                t,
                window,
            })?;
            ids.push(i);
            times.push(p.time);
            comparable.push(p.event && p.time < t + window);
            risks.push(r);
        }
        Ok(PreparedCell {
            sample: RankedSample::new(&times, &comparable, &risks)?.with_ids(&ids),
        })
    }

    pub fn counts(&self, weights: Option<&[u32]>) -> ConcordanceCounts {
        self.sample.counts(weights)
    }
}

/// Time-dependent concordance at prediction time `t` over window `window` (years).
///
/// `Ok(None)` marks a cell without valid pairs.
pub fn tdci<F>(patients: &[EvalPatient], risk: &F, t: f64, window: f64) -> Result<Option<f64>>
where
    F: Fn(&RiskContext<'_>) -> Result<f64> + Sync + ?Sized,
{
    Ok(PreparedCell::new(patients, risk, t, window)?.counts(None).index())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdciGrid {
    pub prediction_times: Vec<f64>,
    pub windows: Vec<f64>,
    /// `values[a][b]` for `prediction_times[a]`, `windows[b]`; `None` where undefined.
    pub values: Vec<Vec<Option<f64>>>,
    /// Mean over defined cells.
    pub mean: f64,
}

impl TdciGrid {
    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.values
            .iter()
            .map(|row| row.iter().map(Option::is_some).collect())
            .collect()
    }

    pub fn n_defined(&self) -> usize {
        self.values.iter().flatten().filter(|v| v.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.n_defined() == self.prediction_times.len() * self.windows.len()
    }
}

/// Every cell of a `(t, Δt)` grid, prepared once and re-countable under weights.
#[derive(Debug, Clone)]
pub(crate) struct PreparedGrid {
    pub prediction_times: Vec<f64>,
    pub windows: Vec<f64>,
    cells: Vec<PreparedCell>,
}

impl PreparedGrid {
    pub fn new<F>(patients: &[EvalPatient], risk: &F, times: &[f64], windows: &[f64]) -> Result<Self>
    where
        F: Fn(&RiskContext<'_>) -> Result<f64> + Sync + ?Sized,
    {
        if times.is_empty() || windows.is_empty() {
            return Err(Error::config("tdci_grid", "prediction times and windows must be non-empty"));
        }
        let mut cells = Vec::with_capacity(times.len() * windows.len());
        for &t in times {
            for &w in windows {
                cells.push(PreparedCell::new(patients, risk, t, w)?);
            }
        }
        Ok(PreparedGrid {
            prediction_times: times.to_vec(),
            windows: windows.to_vec(),
            cells,
        })
    }

    /// Flat row-major cell values.
    pub fn values(&self, weights: Option<&[u32]>) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.counts(weights).index()).collect()
    }

    pub fn to_grid(&self, flat: &[Option<f64>]) -> Result<TdciGrid> {
        let mean = mean_defined(flat).ok_or_else(|| {
            Error::Data("no cell of the TDCI grid has a valid pair".into())
        })?;
        Ok(TdciGrid {
            prediction_times: self.prediction_times.clone(),
            windows: self.windows.clone(),
            values: flat.chunks(self.windows.len()).map(<[_]>::to_vec).collect(),
            mean,
        })
    }
}

pub(crate) fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// TDCI over a grid of prediction times and windows; undefined cells are masked.
pub fn mean_tdci<F>(
    patients: &[EvalPatient],
    risk: &F,
    prediction_times: &[f64],
    windows: &[f64],
) -> Result<TdciGrid>
where
    F: Fn(&RiskContext<'_>) -> Result<f64> + Sync + ?Sized,
{
    let grid = PreparedGrid::new(patients, risk, prediction_times, windows)?;
    grid.to_grid(&grid.values(None))
}
