//! Elastic-net Cox proportional hazards on counting-process data.

mod baseline;
mod fit;
mod grid;
mod likelihood;

use serde::{Deserialize, Serialize};

pub use baseline::BreslowBaseline;
pub use fit::{
    default_grid, elastic_net_grid, fit_cox, fit_cox_with, FitConfig, DEFAULT_L1_RATIOS,
    DEFAULT_PENALIZERS,
};
pub use grid::{grid_search, GridEntry, GridSearch};
pub use likelihood::{gradient, information, partial_loglik, TiesMethod};

use crate::cohort::{Biomarker, BiomarkerPanel, NormalizationStats};
use crate::error::{Error, Result};

pub const COX_FORMAT_VERSION: u32 = 1;

/// Feature names plus the statistics that map raw values onto them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSpace {
    pub names: Vec<String>,
    pub normalization: Option<NormalizationStats>,
}

impl FeatureSpace {
    pub fn anonymous(p: usize) -> Self {
        FeatureSpace {
            names: (0..p).map(|j| format!("x{j}")).collect(),
            normalization: None,
        }
    }

    pub fn new(names: Vec<String>, normalization: Option<NormalizationStats>) -> Self {
        FeatureSpace {
            names,
            normalization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Unpenalized log partial likelihood at the solution.
    pub loglik: f64,
    pub penalized_objective: f64,
    pub converged: bool,
    /// Penalized objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Covariates offered to a model: raw lab values or ready z-scores.
#[derive(Debug, Clone, Copy)]
pub enum Covariates<'a> {
    Raw(&'a BiomarkerPanel),
    /// Z-scores aligned with the model's feature names.
    Normalized(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub normalization: Option<NormalizationStats>,
    pub baseline: BreslowBaseline,
    pub config: FitConfig,
    pub diagnostics: FitDiagnostics,
}

impl CoxModel {
    /// Z-scores for this model's features from a raw panel.
    pub fn normalize_panel(&self, panel: &BiomarkerPanel) -> Result<Vec<f64>> {
        let stats = self.normalization.as_ref().ok_or_else(|| {
            Error::config("normalization", "model has no stored normalization for raw input")
        })?;
        self.feature_names
            .iter()
            .map(|name| {
                let b = Biomarker::from_name(name)?;
                let j = stats.index_of(name)?;
                Ok(stats.z(j, panel.require(b)?))
            })
            .collect()
    }

    /// `βᵀz`, normalizing raw panels with the stored statistics.
    pub fn linear_risk(&self, covariates: Covariates<'_>) -> Result<f64> {
        match covariates {
            Covariates::Normalized(z) => {
                if z.len() != self.coefficients.len() {
                    return Err(Error::Data(format!(
                        "expected {} covariates, got {}",
                        self.coefficients.len(),
                        z.len()
                    )));
                }
                if let Some(j) = z.iter().position(|v| !v.is_finite()) {
                    return Err(Error::MissingCovariate(self.feature_names[j].clone()));
                }
                Ok(likelihood::dot(&self.coefficients, z))
            }
            Covariates::Raw(panel) => {
                let z = self.normalize_panel(panel)?;
                Ok(likelihood::dot(&self.coefficients, &z))
            }
        }
    }

    /// `S(t|z) = exp(−H0(t)·exp(βᵀz))`, with `t` in the training time unit.
    pub fn predict_survival(&self, covariates: Covariates<'_>, t: f64) -> Result<f64> {
        let h0 = self.baseline.at(t)?;
        if h0 == 0.0 {
            return Ok(1.0);
        }
        let eta = self.linear_risk(covariates)?;
        Ok((-h0 * eta.exp()).exp())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{IntervalRow, RowEvent};

    fn three_subjects() -> Vec<IntervalRow> {
        [(0.0, 1.0), (1.0, 2.0), (0.0, 3.0)]
            .iter()
            .map(|&(x, t)| IntervalRow {
                patient_id: format!("p{t}"),
                start: 0.0,
                stop: t,
                event: RowEvent::GraftFailure,
                covariates: vec![x],
            })
            .collect()
    }

    #[test]
    fn null_loglik_breslow() {
        let ll = partial_loglik(&[0.0], &three_subjects(), TiesMethod::Breslow).unwrap();
        assert!((ll - (-(3f64.ln()) - 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn loglik_at_half_log_two() {
        let b = 2f64.sqrt().ln();
        let ll = partial_loglik(&[b], &three_subjects(), TiesMethod::Breslow).unwrap();
        let expected = -(b.exp() + 2.0).ln() + b - (b.exp() + 1.0).ln();
        assert!((ll - expected).abs() < 1e-12);
        assert!((ll - (-1.762747)).abs() < 1e-6);
    }

    #[test]
    fn gradient_at_zero_is_one_sixth() {
        let g = gradient(&[0.0], &three_subjects(), TiesMethod::Breslow).unwrap();
        assert!((g[0] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn no_events_is_an_error() {
        let mut rows = three_subjects();
        rows.iter_mut().for_each(|r| r.event = RowEvent::CompetingDeath);
        assert!(matches!(
            partial_loglik(&[0.0], &rows, TiesMethod::Breslow),
            Err(Error::NoEvents)
        ));
    }

    #[test]
    fn analytic_fit() {
        let cfg = FitConfig {
            ties: TiesMethod::Breslow,
            ..FitConfig::default()
        };
        let m = fit_cox(&three_subjects(), &cfg).unwrap();
        assert!(m.diagnostics.converged);
        assert!((m.coefficients[0] - 2f64.sqrt().ln()).abs() < 1e-4);
        let g = gradient(&m.coefficients, &three_subjects(), TiesMethod::Breslow).unwrap();
        assert!(g[0].abs() < 1e-6);
    }

    #[test]
    fn huge_l1_penalty_zeroes_everything() {
        let m = fit_cox(&three_subjects(), &FitConfig::elastic_net(1e6, 1.0)).unwrap();
        assert_eq!(m.coefficients, vec![0.0]);
    }

    #[test]
    fn null_baseline_is_nelson_aalen() {
        let m = fit_cox(&three_subjects(), &FitConfig::elastic_net(1e6, 1.0)).unwrap();
        let h = &m.baseline.cumulative_hazard;
        assert!((h[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((h[1] - (1.0 / 3.0 + 0.5)).abs() < 1e-12);
        assert!((h[2] - (1.0 / 3.0 + 0.5 + 1.0)).abs() < 1e-12);
        assert_eq!(m.baseline.at(0.5).unwrap(), 0.0);
        assert!(m.baseline.at(-1.0).is_err());
    }

    #[test]
    fn survival_limits() {
        let m = fit_cox(&three_subjects(), &FitConfig::default()).unwrap();
        assert_eq!(m.predict_survival(Covariates::Normalized(&[5.0]), 0.0).unwrap(), 1.0);
        let s = m.predict_survival(Covariates::Normalized(&[1e6]), 2.0).unwrap();
        assert_eq!(s, 0.0);
        assert!(m.predict_survival(Covariates::Normalized(&[0.0]), -0.1).is_err());
    }

    #[test]
    fn linear_risk_dot_product() {
        let mut m = fit_cox(&three_subjects(), &FitConfig::default()).unwrap();
        m.coefficients = vec![2.0, -1.0];
        m.feature_names = vec!["a".into(), "b".into()];
        assert_eq!(m.linear_risk(Covariates::Normalized(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(m.linear_risk(Covariates::Normalized(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(m.linear_risk(Covariates::Normalized(&[f64::NAN, 0.0])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = fit_cox(&three_subjects(), &FitConfig::default()).unwrap();
        let back = CoxModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
