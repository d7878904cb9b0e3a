use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Days per year used for every day/year conversion.
pub const DAYS_PER_YEAR: f64 = 365.25;

pub fn days_to_years(days: f64) -> f64 {
    days / DAYS_PER_YEAR
}

pub fn years_to_days(years: f64) -> f64 {
    years * DAYS_PER_YEAR
}

/// The six laboratory features, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Biomarker {
    Bilirubin,
    Creatinine,
    Albumin,
    Ast,
    Alt,
    Inr,
}

impl Biomarker {
    pub const ALL: [Biomarker; 6] = [
        Biomarker::Bilirubin,
        Biomarker::Creatinine,
        Biomarker::Albumin,
        Biomarker::Ast,
        Biomarker::Alt,
        Biomarker::Inr,
    ];

    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Biomarker::Bilirubin => "bilirubin",
            Biomarker::Creatinine => "creatinine",
            Biomarker::Albumin => "albumin",
            Biomarker::Ast => "ast",
            Biomarker::Alt => "alt",
            Biomarker::Inr => "inr",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Biomarker::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn unit(self) -> &'static str {
        match self {
            Biomarker::Bilirubin | Biomarker::Creatinine => "mg/dL",
            Biomarker::Albumin => "g/dL",
            Biomarker::Ast | Biomarker::Alt => "U/L",
            Biomarker::Inr => "1",
        }
    }
}

impl std::fmt::Display for Biomarker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Names of all six features in canonical order.
pub fn feature_names() -> Vec<String> {
    Biomarker::ALL.iter().map(|b| b.name().to_string()).collect()
}

/// Raw laboratory values at one visit. Any value may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiomarkerPanel {
    values: [Option<f64>; Biomarker::COUNT],
}

impl BiomarkerPanel {
    /// Builds a panel, rejecting non-finite or non-positive lab values.
    pub fn new(values: [Option<f64>; Biomarker::COUNT]) -> Result<Self> {
        for (b, v) in Biomarker::ALL.iter().zip(values.iter()) {
            if let Some(v) = v {
                if !v.is_finite() || *v <= 0.0 {
                    return Err(Error::Data(format!(
                        "{} must be finite and positive, got {v}",
                        b.name()
                    )));
                }
            }
        }
        Ok(BiomarkerPanel { values })
    }

    pub fn complete(values: [f64; Biomarker::COUNT]) -> Result<Self> {
        BiomarkerPanel::new(values.map(Some))
    }

    pub fn get(&self, b: Biomarker) -> Option<f64> {
        self.values[b.index()]
    }

    /// Fetches a value or fails with the missing covariate's name.
    pub fn require(&self, b: Biomarker) -> Result<f64> {
        self.get(b)
            .ok_or_else(|| Error::MissingCovariate(b.name().to_string()))
    }

    pub fn values(&self) -> &[Option<f64>; Biomarker::COUNT] {
        &self.values
    }

    pub(crate) fn set(&mut self, b: Biomarker, v: f64) {
        self.values[b.index()] = Some(v);
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Dense values in canonical order, if nothing is missing.
    pub fn to_dense(&self) -> Option<[f64; Biomarker::COUNT]> {
        let mut out = [0.0; Biomarker::COUNT];
        for (o, v) in out.iter_mut().zip(self.values.iter()) {
            *o = (*v)?;
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUpRecord {
    /// Days since transplant.
    pub day: u32,
    pub panel: BiomarkerPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventType {
    Censored,
    GraftFailure,
    CompetingDeath,
}

impl EventType {
    /// CSV code: 0 censored, 1 graft failure, 2 competing death.
    pub fn code(self) -> u8 {
        match self {
            EventType::Censored => 0,
            EventType::GraftFailure => 1,
            EventType::CompetingDeath => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EventType::Censored),
            1 => Some(EventType::GraftFailure),
            2 => Some(EventType::CompetingDeath),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub event_type: EventType,
    /// Day of the event, or of last contact when censored.
    pub event_day: u32,
}

/// Event marker carried by counting-process and augmented rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowEvent {
    None,
    GraftFailure,
    CompetingDeath,
}

impl RowEvent {
    /// Competing deaths count as censoring for every model here.
    pub fn is_failure(self) -> bool {
        self == RowEvent::GraftFailure
    }
}

impl From<EventType> for RowEvent {
    fn from(e: EventType) -> Self {
        match e {
            EventType::Censored => RowEvent::None,
            EventType::GraftFailure => RowEvent::GraftFailure,
            EventType::CompetingDeath => RowEvent::CompetingDeath,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub region: String,
    pub age_at_transplant: f64,
    pub transplant_count: u32,
    pub organ_count: u32,
    pub transplant_date: NaiveDate,
    /// Strictly increasing in `day`.
    pub follow_ups: Vec<FollowUpRecord>,
    pub outcome: Outcome,
}

impl PatientRecord {
    pub fn last_follow_up_day(&self) -> Option<u32> {
        self.follow_ups.last().map(|f| f.day)
    }

    /// Checks the per-patient ordering and outcome invariants.
    pub fn validate(&self) -> Result<()> {
        for w in self.follow_ups.windows(2) {
            if w[1].day <= w[0].day {
                return Err(Error::Data(format!(
                    "patient {}: follow-ups not strictly increasing ({} then {})",
                    self.patient_id, w[0].day, w[1].day
                )));
            }
        }
        if self.outcome.event_day == 0 {
            return Err(Error::Data(format!(
                "patient {}: event_day must be positive",
                self.patient_id
            )));
        }
        if let Some(last) = self.last_follow_up_day() {
            if self.outcome.event_day < last {
                return Err(Error::Data(format!(
                    "patient {}: event_day {} precedes last follow-up {}",
                    self.patient_id, self.outcome.event_day, last
                )));
            }
        }
        Ok(())
    }
}

/// One counting-process interval `(start, stop]` in days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub patient_id: String,
    pub start: f64,
    pub stop: f64,
    pub event: RowEvent,
    pub covariates: Vec<f64>,
}

/// One follow-up turned into an independent sample, time measured from the visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRow {
    pub patient_id: String,
    /// Days from measurement to event or censoring; always positive.
    pub time_to_event: f64,
    pub event: RowEvent,
    pub covariates: Vec<f64>,
}
