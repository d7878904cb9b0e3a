use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::types::PatientRecord;
use crate::error::{Error, Result};

/// One inclusion rule. Patients failing it are removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum ExclusionCriterion {
    /// Keep patients at least this old at transplant.
    MinAge { years: f64 },
    /// Drop patients with any previous transplant.
    FirstTransplantOnly,
    /// Drop multi-organ recipients.
    SingleOrganOnly,
    /// Keep transplants dated within `[start, end]`.
    DateWindow { start: NaiveDate, end: NaiveDate },
    /// Drop patients without longitudinal follow-up.
    RequiresFollowUp,
}

impl ExclusionCriterion {
    pub fn name(&self) -> String {
        match self {
            ExclusionCriterion::MinAge { years } => format!("min_age({years})"),
            ExclusionCriterion::FirstTransplantOnly => "first_transplant_only".into(),
            ExclusionCriterion::SingleOrganOnly => "single_organ_only".into(),
            ExclusionCriterion::DateWindow { start, end } => {
                format!("date_window({start}..{end})")
            }
            ExclusionCriterion::RequiresFollowUp => "requires_follow_up".into(),
        }
    }

    pub fn keeps(&self, p: &PatientRecord) -> bool {
        match self {
            ExclusionCriterion::MinAge { years } => p.age_at_transplant >= *years,
            ExclusionCriterion::FirstTransplantOnly => p.transplant_count == 1,
            ExclusionCriterion::SingleOrganOnly => p.organ_count == 1,
            ExclusionCriterion::DateWindow { start, end } => {
                p.transplant_date >= *start && p.transplant_date <= *end
            }
            ExclusionCriterion::RequiresFollowUp => !p.follow_ups.is_empty(),
        }
    }

    /// Registry-style selection: date window, prior transplants, multi-organ,
    /// minors, then patients without follow-up.
    pub fn registry_defaults() -> Vec<ExclusionCriterion> {
        vec![
            ExclusionCriterion::DateWindow {
                start: NaiveDate::from_ymd_opt(2002, 2, 27).expect("valid date"),
                end: NaiveDate::from_ymd_opt(2021, 12, 1).expect("valid date"),
            },
            ExclusionCriterion::FirstTransplantOnly,
            ExclusionCriterion::SingleOrganOnly,
            ExclusionCriterion::MinAge { years: 18.0 },
            ExclusionCriterion::RequiresFollowUp,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionStep {
    pub criterion: String,
    pub n_excluded: usize,
    pub n_remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub format_version: u32,
    pub initial: usize,
    pub steps: Vec<ExclusionStep>,
}

impl ExclusionReport {
    pub fn final_size(&self) -> usize {
        self.steps.last().map_or(self.initial, |s| s.n_remaining)
    }
}

/// Applies criteria in order; each patient is charged to the first criterion that removes them.
pub fn apply_exclusions(
    cohort: Vec<PatientRecord>,
    criteria: &[ExclusionCriterion],
) -> Result<(Vec<PatientRecord>, ExclusionReport)> {
    if criteria.is_empty() {
        return Err(Error::config("exclusions", "criteria list must be non-empty"));
    }
    let initial = cohort.len();
    let mut remaining = cohort;
    let mut steps = Vec::with_capacity(criteria.len());
    for c in criteria {
        let before = remaining.len();
        remaining.retain(|p| c.keeps(p));
        steps.push(ExclusionStep {
            criterion: c.name(),
            n_excluded: before - remaining.len(),
            n_remaining: remaining.len(),
        });
    }
    Ok((
        remaining,
        ExclusionReport {
            format_version: 1,
            initial,
            steps,
        },
    ))
}
