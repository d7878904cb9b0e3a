//! Fixed risk scores (MAS, MELD, ALBI) and Cox models restricted to the
//! biomarker sets of existing clinical scores.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cohort::{Biomarker, BiomarkerPanel, IntervalRow, NormalizationStats};
use crate::coxnet::{fit_cox_with, CoxModel, FeatureSpace, FitConfig};
use crate::error::{Error, Result};

/// MAS weights on z-scored labs, canonical feature order.
pub const MAS_COEFFICIENTS: [(Biomarker, f64); 6] = [
    (Biomarker::Bilirubin, 20.42),
    (Biomarker::Albumin, -5.69),
    (Biomarker::Creatinine, 2.88),
    (Biomarker::Inr, 1.55),
    (Biomarker::Alt, 5.05),
    (Biomarker::Ast, 2.14),
];

/// MAS on a z-scored panel given in canonical order
/// (bilirubin, creatinine, albumin, AST, ALT, INR).
pub fn mas_score(z: &[f64]) -> Result<f64> {
    if z.len() != Biomarker::COUNT {
        return Err(Error::Data(format!(
            "MAS needs {} z-scores, got {}",
            Biomarker::COUNT,
            z.len()
        )));
    }
    let mut score = 0.0;
    for (b, w) in MAS_COEFFICIENTS {
        let v = z[b.index()];
        if !v.is_finite() {
            return Err(Error::MissingCovariate(b.name().to_string()));
        }
        score += w * v;
    }
    Ok(score)
}

/// Continuous MELD: labs floored at 1.0, creatinine capped at 4.0.
pub fn meld_score(panel: &BiomarkerPanel) -> Result<f64> {
    let bili = panel.require(Biomarker::Bilirubin)?;
    let inr = panel.require(Biomarker::Inr)?;
    let creat = panel.require(Biomarker::Creatinine)?;
    for (name, v) in [("bilirubin", bili), ("inr", inr), ("creatinine", creat)] {
        if !(v > 0.0) {
            return Err(Error::Data(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(3.78 * bili.max(1.0).ln()
        + 11.2 * inr.max(1.0).ln()
        + 9.57 * creat.clamp(1.0, 4.0).ln()
        + 6.43)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Albi {
    pub score: f64,
    pub grade: u8,
}

/// mg/dL bilirubin to µmol/L.
const BILIRUBIN_UMOL_PER_MG_DL: f64 = 17.1;

/// ALBI from bilirubin (mg/dL) and albumin (g/dL).
///
/// Grade 1 at or below −2.60, grade 2 up to and including −1.39, else grade 3.
pub fn albi_score(panel: &BiomarkerPanel) -> Result<Albi> {
    let bili = panel.require(Biomarker::Bilirubin)?;
    let alb = panel.require(Biomarker::Albumin)?;
    if !(bili > 0.0 && alb > 0.0) {
        return Err(Error::Data("ALBI inputs must be positive".into()));
    }
    let score = 0.66 * (bili * BILIRUBIN_UMOL_PER_MG_DL).log10() - 0.0852 * (alb * 10.0);
    Ok(Albi {
        score,
        grade: albi_grade(score),
    })
}

pub fn albi_grade(score: f64) -> u8 {
    if score <= -2.60 {
        1
    } else if score <= -1.39 {
        2
    } else {
        3
    }
}

/// Direction of a score. Every score here ranks higher as riskier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    HigherIsRiskier,
}

type ScoreFn = dyn Fn(&BiomarkerPanel) -> Result<f64> + Send + Sync;

/// A named, deterministic risk score on complete raw panels.
#[derive(Clone)]
pub struct RiskScoreDef {
    pub name: String,
    pub required_features: Vec<Biomarker>,
    pub orientation: Orientation,
    compute: Arc<ScoreFn>,
}

impl std::fmt::Debug for RiskScoreDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RiskScoreDef")
            .field("name", &self.name)
            .field("required_features", &self.required_features)
            .finish()
    }
}

impl RiskScoreDef {
    pub fn new<F>(name: impl Into<String>, required_features: Vec<Biomarker>, compute: F) -> Self
    where
        F: Fn(&BiomarkerPanel) -> Result<f64> + Send + Sync + 'static,
    {
        RiskScoreDef {
            name: name.into(),
            required_features,
            orientation: Orientation::HigherIsRiskier,
            compute: Arc::new(compute),
        }
    }

    pub fn compute(&self, panel: &BiomarkerPanel) -> Result<f64> {
        (self.compute)(panel)
    }

    /// MAS with z-scores taken from the given training statistics.
    pub fn mas(stats: NormalizationStats) -> Self {
        RiskScoreDef::new("mas", Biomarker::ALL.to_vec(), move |panel| {
            mas_score(&stats.normalize_panel(panel)?)
        })
    }

    pub fn meld() -> Self {
        RiskScoreDef::new(
            "meld",
            vec![Biomarker::Bilirubin, Biomarker::Creatinine, Biomarker::Inr],
            meld_score,
        )
    }

    /// Continuous ALBI score, not the grade.
    pub fn albi() -> Self {
        RiskScoreDef::new(
            "albi",
            vec![Biomarker::Bilirubin, Biomarker::Albumin],
            |p| albi_score(p).map(|a| a.score),
        )
    }

    pub fn from_cox(model: CoxModel) -> Result<Self> {
        let features = model
            .feature_names
            .iter()
            .map(|n| Biomarker::from_name(n))
            .collect::<Result<Vec<_>>>()?;
        let name = "cox".to_string();
        Ok(RiskScoreDef::new(name, features, move |panel| {
            model.linear_risk(crate::coxnet::Covariates::Raw(panel))
        }))
    }
}

/// Cox models fitted on the biomarkers used by an existing clinical score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictedVariant {
    CoxMeaf,
    CoxMeld,
    CoxAlbi,
}

impl RestrictedVariant {
    pub const ALL: [RestrictedVariant; 3] = [
        RestrictedVariant::CoxMeaf,
        RestrictedVariant::CoxMeld,
        RestrictedVariant::CoxAlbi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RestrictedVariant::CoxMeaf => "cox_meaf",
            RestrictedVariant::CoxMeld => "cox_meld",
            RestrictedVariant::CoxAlbi => "cox_albi",
        }
    }

    pub fn features(self) -> Vec<Biomarker> {
        use Biomarker::*;
        match self {
            RestrictedVariant::CoxMeaf => vec![Bilirubin, Alt, Inr],
            RestrictedVariant::CoxMeld => vec![Bilirubin, Creatinine, Inr],
            RestrictedVariant::CoxAlbi => vec![Albumin, Bilirubin],
        }
    }
}

/// Keeps only the named biomarker columns of six-feature rows, in subset order.
pub fn project_rows(rows: &[IntervalRow], subset: &[Biomarker]) -> Result<Vec<IntervalRow>> {
    if subset.is_empty() {
        return Err(Error::config("feature_subset", "must name at least one biomarker"));
    }
    rows.iter()
        .map(|r| {
            if r.covariates.len() != Biomarker::COUNT {
                return Err(Error::Data(format!(
                    "expected {} covariates, got {}",
                    Biomarker::COUNT,
                    r.covariates.len()
                )));
            }
            Ok(IntervalRow {
                covariates: subset.iter().map(|b| r.covariates[b.index()]).collect(),
                ..r.clone()
            })
        })
        .collect()
}

/// Resolves names to biomarkers, rejecting unknown names and empty subsets.
pub fn parse_subset(names: &[&str]) -> Result<Vec<Biomarker>> {
    if names.is_empty() {
        return Err(Error::config("feature_subset", "must name at least one biomarker"));
    }
    names.iter().map(|n| Biomarker::from_name(n)).collect()
}

/// Feature space for a biomarker subset sharing full-panel statistics.
pub fn subset_space(subset: &[Biomarker], stats: Option<&NormalizationStats>) -> FeatureSpace {
    FeatureSpace::new(
        subset.iter().map(|b| b.name().to_string()).collect(),
        stats.cloned(),
    )
}

/// Fits a Cox model on a biomarker subset of six-feature counting-process rows.
pub fn train_restricted_cox(
    feature_subset: &[&str],
    data: &[IntervalRow],
    config: &FitConfig,
    stats: Option<&NormalizationStats>,
) -> Result<CoxModel> {
    let subset = parse_subset(feature_subset)?;
    let rows = project_rows(data, &subset)?;
    fit_cox_with(&rows, config, &subset_space(&subset, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(bili: f64, creat: f64, alb: f64, inr: f64) -> BiomarkerPanel {
        BiomarkerPanel::complete([bili, creat, alb, 30.0, 30.0, inr]).unwrap()
    }

    #[test]
    fn mas_published_examples() {
        assert_eq!(mas_score(&[0.0; 6]).unwrap(), 0.0);
        assert_eq!(mas_score(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 20.42);
        assert_eq!(mas_score(&[1.0; 6]).unwrap(), 26.35);
        assert!(mas_score(&[1.0; 5]).is_err());
        assert!(matches!(
            mas_score(&[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::MissingCovariate(name)) if name == "creatinine"
        ));
    }

    #[test]
    fn meld_examples() {
        assert_eq!(meld_score(&panel(1.0, 1.0, 4.0, 1.0)).unwrap(), 6.43);
        let m = meld_score(&panel(2.0, 1.0, 4.0, 1.0)).unwrap();
        assert!((m - (6.43 + 3.78 * 2f64.ln())).abs() < 1e-12);
        assert!((m - 9.050096).abs() < 1e-6);
        assert_eq!(
            meld_score(&panel(1.0, 6.0, 4.0, 1.0)).unwrap(),
            meld_score(&panel(1.0, 4.0, 4.0, 1.0)).unwrap()
        );
        // values below 1 floor at 1
        assert_eq!(meld_score(&panel(0.3, 0.5, 4.0, 0.9)).unwrap(), 6.43);
    }

    #[test]
    fn albi_examples() {
        let a = albi_score(&panel(1.0, 1.0, 4.0, 1.0)).unwrap();
        let expected = 0.66 * 17.1f64.log10() - 0.0852 * 40.0;
        assert!((a.score - expected).abs() < 1e-12);
        assert!((a.score + 2.5942).abs() < 1e-4);
        assert_eq!(a.grade, 2);
        assert_eq!(albi_grade(-2.60), 1);
        assert_eq!(albi_grade(-1.39), 2);
        assert_eq!(albi_grade(-1.0), 3);
        let hi = albi_score(&panel(1.0, 1.0, 5.0, 1.0)).unwrap();
        assert!(hi.score < a.score);
    }

    #[test]
    fn missing_inputs_error() {
        let p = BiomarkerPanel::new([Some(1.0), None, Some(4.0), None, None, Some(1.0)]).unwrap();
        assert!(meld_score(&p).is_err());
        assert!(albi_score(&p).is_ok());
    }

    #[test]
    fn subsets() {
        assert!(parse_subset(&[]).is_err());
        assert!(parse_subset(&["bilirubin", "sodium"]).is_err());
        assert_eq!(
            RestrictedVariant::CoxAlbi.features(),
            vec![Biomarker::Albumin, Biomarker::Bilirubin]
        );
    }
}
