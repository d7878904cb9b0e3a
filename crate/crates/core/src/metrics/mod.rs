//! Concordance metrics and bootstrap intervals.
//!
//! Concordance is computed by sorting on time and counting lower-ranked
//! risks in a Fenwick tree. Counts are integers, so the index equals the
//! pair-enumeration value bit for bit.

mod bootstrap;
mod concordance;
mod tdci;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bootstrap::{
    bootstrap_ci, quantile, resample_indices, resample_weights, BootstrapConfig, CiResult,
};
pub use concordance::{harrell_c, harrell_counts, ConcordanceCounts};
pub use tdci::{
    mean_tdci, static_risk, tdci, EvalPatient, Observation, RiskContext, TdciGrid,
    DEFAULT_PREDICTION_TIMES, DEFAULT_WINDOWS,
};

use crate::error::{Error, Result};
use tdci::{mean_defined, PreparedGrid};

pub const EVAL_FORMAT_VERSION: u32 = 1;

/// A TDCI grid with bootstrap intervals per cell and for the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEvaluation {
    pub grid: TdciGrid,
    /// `[lower, upper]` per cell; `None` where undefined or too often undefined.
    pub cell_ci: Vec<Vec<Option<[f64; 2]>>>,
    pub mean_ci: CiResult,
}

/// Mean TDCI with patient-level bootstrap intervals.
///
/// Risks are evaluated once; each resample only re-weights patients.
pub fn evaluate_grid<F>(
    patients: &[EvalPatient],
    risk: &F,
    prediction_times: &[f64],
    windows: &[f64],
    config: &BootstrapConfig,
) -> Result<GridEvaluation>
where
    F: Fn(&RiskContext<'_>) -> Result<f64> + Sync + ?Sized,
{
    config.validate()?;
    let prepared = PreparedGrid::new(patients, risk, prediction_times, windows)?;
    let point = prepared.values(None);
    let grid = prepared.to_grid(&point)?;
    let n = patients.len();

    let resampled: Vec<Vec<Option<f64>>> = (0..config.n_resamples)
        .into_par_iter()
        .map(|b| prepared.values(Some(&resample_weights(n, config.seed, b))))
        .collect();

    let means: Vec<Option<f64>> = resampled.iter().map(|v| mean_defined(v)).collect();
    let mean_ci = bootstrap::summarize(grid.mean, &means, config)?;

    let cell_ci = point
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let p = (*p)?;
            let samples: Vec<Option<f64>> = resampled.iter().map(|v| v[c]).collect();
            bootstrap::summarize(p, &samples, config)
                .ok()
                .map(|ci| [ci.lower, ci.upper])
        })
        .collect::<Vec<_>>()
        .chunks(windows.len())
        .map(<[_]>::to_vec)
        .collect();
    Ok(GridEvaluation {
        grid,
        cell_ci,
        mean_ci,
    })
}

/// Evaluation of one model on one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub format_version: u32,
    pub model: String,
    pub site: String,
    pub n_patients: usize,
    pub prediction_times: Vec<f64>,
    pub windows: Vec<f64>,
    pub tdci: Vec<Vec<Option<f64>>>,
    pub mask: Vec<Vec<bool>>,
    pub cell_ci: Vec<Vec<Option<[f64; 2]>>>,
    pub mean_tdci: f64,
    pub ci: CiResult,
}

impl EvalResult {
    pub fn new(model: &str, site: &str, n_patients: usize, eval: GridEvaluation) -> Self {
        EvalResult {
            format_version: EVAL_FORMAT_VERSION,
            model: model.to_string(),
            site: site.to_string(),
            n_patients,
            mask: eval.grid.mask(),
            prediction_times: eval.grid.prediction_times,
            windows: eval.grid.windows,
            tdci: eval.grid.values,
            cell_ci: eval.cell_ci,
            mean_tdci: eval.grid.mean,
            ci: eval.mean_ci,
        }
    }
}

/// One CSV row per (model, site, prediction time, window); empty fields where undefined.
pub fn write_eval_csv<W: Write>(writer: W, results: &[EvalResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "site", "prediction_time", "window", "tdci", "ci_lo", "ci_hi"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        for (a, t) in r.prediction_times.iter().enumerate() {
            for (b, dt) in r.windows.iter().enumerate() {
                let ci = r.cell_ci[a][b];
                w.write_record([
                    r.model.clone(),
                    r.site.clone(),
                    t.to_string(),
                    dt.to_string(),
                    opt(r.tdci[a][b]),
                    opt(ci.map(|c| c[0])),
                    opt(ci.map(|c| c[1])),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
