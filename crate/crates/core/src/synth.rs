//! Synthetic multi-region transplant cohorts with a known hazard.
//!
//! Each patient has a latent z-scale biomarker level drawn around the region
//! mean and an AR(1) deviation across scheduled visits. The failure time is
//! exponential given the patient's visit-averaged linear predictor, and
//! censoring and competing deaths are independent exponentials. Raw lab
//! values are linear in z through per-biomarker anchors.

use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{
    Biomarker, BiomarkerPanel, EventType, FollowUpRecord, Outcome, PatientRecord, DAYS_PER_YEAR,
};
use crate::error::{Error, Result};

const P: usize = Biomarker::COUNT;

/// Latent visits are generated at most this far out when there is no horizon.
const MAX_SCHEDULE_YEARS: f64 = 30.0;

/// Raw value = `mean + sd * z`, floored at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAnchor {
    pub mean: f64,
    pub sd: f64,
    pub floor: f64,
}

/// Physiological anchors in canonical order (mg/dL, mg/dL, g/dL, U/L, U/L, ratio).
pub const DEFAULT_ANCHORS: [RawAnchor; P] = [
    RawAnchor { mean: 1.0, sd: 0.2, floor: 0.01 },
    RawAnchor { mean: 1.2, sd: 0.24, floor: 0.01 },
    RawAnchor { mean: 3.8, sd: 0.5, floor: 0.1 },
    RawAnchor { mean: 40.0, sd: 8.0, floor: 1.0 },
    RawAnchor { mean: 40.0, sd: 8.0, floor: 1.0 },
    RawAnchor { mean: 1.1, sd: 0.15, floor: 0.1 },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardShape {
    /// `η = βᵀz̄`
    Linear,
    /// `η = βᵀz̄ + scale · z̄[feature]²`
    Quadratic { feature: usize, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisitSchedule {
    /// First visit, in years.
    pub first_visit_years: f64,
    /// Later visits at every multiple of this interval.
    pub interval_years: f64,
}

impl Default for VisitSchedule {
    fn default() -> Self {
        VisitSchedule {
            first_visit_years: 0.5,
            interval_years: 1.0,
        }
    }
}

impl VisitSchedule {
    /// Visit times strictly before `until`, ascending.
    pub fn times(&self, until: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.first_visit_years < until {
            out.push(self.first_visit_years);
        }
        let mut k = 1.0;
        loop {
            let t = k * self.interval_years;
            if t >= until {
                break;
            }
            if t > self.first_visit_years {
                out.push(t);
            }
            k += 1.0;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    pub label: String,
    pub n_patients: usize,
    /// Added to the latent mean, z units.
    #[serde(default)]
    pub mean_shift: [f64; P],
    /// Multiplies the between-patient spread of the latent mean.
    #[serde(default = "ones")]
    pub scale: [f64; P],
    /// Added to the true coefficients for this region.
    #[serde(default)]
    pub delta_beta: [f64; P],
    /// Never used for training; evaluated as an external site.
    #[serde(default)]
    pub held_out: bool,
}

fn ones() -> [f64; P] {
    [1.0; P]
}

impl RegionProfile {
    pub fn new(label: &str, n_patients: usize) -> Self {
        RegionProfile {
            label: label.to_string(),
            n_patients,
            mean_shift: [0.0; P],
            scale: [1.0; P],
            delta_beta: [0.0; P],
            held_out: false,
        }
    }

    pub fn mean_shifted(&self) -> bool {
        self.mean_shift.iter().any(|v| *v != 0.0) || self.scale.iter().any(|v| *v != 1.0)
    }

    pub fn concept_shifted(&self) -> bool {
        self.delta_beta.iter().any(|v| *v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Hazard coefficients on latent z, canonical biomarker order.
    pub beta_true: [f64; P],
    /// Per year.
    pub baseline_hazard: f64,
    pub censoring_rate: f64,
    pub competing_rate: f64,
    pub schedule: VisitSchedule,
    /// AR(1) parameter of within-patient deviations, in `[0, 1)`.
    pub autocorrelation: f64,
    /// Stationary sd of within-patient deviations.
    pub within_patient_sd: f64,
    /// Administrative censoring; `None` means unlimited.
    pub horizon_years: Option<f64>,
    /// Probability that a lab value is missing at a visit.
    pub missing_rate: f64,
    /// Probability that a patient is a minor, a retransplant, or multi-organ.
    pub ineligible_rate: f64,
    pub anchors: [RawAnchor; P],
    pub hazard_shape: HazardShape,
    pub regions: Vec<RegionProfile>,
    pub seed: u64,
}

impl Default for SimConfig {
    /// One training region and one held-out region whose bilirubin and
    /// albumin both sit beyond the training support. The two shifts pull the
    /// hazard in opposite directions so the external site keeps enough
    /// follow-up to evaluate.
    fn default() -> Self {
        let mut external = RegionProfile::new("EXT", 1000);
        external.held_out = true;
        external.mean_shift[Biomarker::Bilirubin.index()] = 2.5;
        external.mean_shift[Biomarker::Albumin.index()] = 2.5;
        SimConfig {
            beta_true: [1.2, 0.4, -0.6, 0.2, 0.4, 0.5],
            baseline_hazard: 0.03,
            censoring_rate: 0.03,
            competing_rate: 0.01,
            schedule: VisitSchedule::default(),
            autocorrelation: 0.7,
            within_patient_sd: 0.2,
            horizon_years: Some(12.0),
            missing_rate: 0.02,
            ineligible_rate: 0.05,
            anchors: DEFAULT_ANCHORS,
            hazard_shape: HazardShape::Linear,
            regions: vec![RegionProfile::new("A", 1000), external],
            seed: 1,
        }
    }
}

impl SimConfig {
    /// A single unshifted region of `n` patients.
    pub fn single_region(n: usize, beta_true: [f64; P], seed: u64) -> Self {
        SimConfig {
            beta_true,
            regions: vec![RegionProfile::new("A", n)],
            seed,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and >= 0, got {v}")))
            }
        };
        let prob = |field: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(field, format!("must lie in [0, 1), got {v}")))
            }
        };
        if !(self.baseline_hazard > 0.0 && self.baseline_hazard.is_finite()) {
            return Err(Error::config("baseline_hazard", "must be finite and > 0"));
        }
        rate("censoring_rate", self.censoring_rate)?;
        rate("competing_rate", self.competing_rate)?;
        prob("autocorrelation", self.autocorrelation)?;
        rate("within_patient_sd", self.within_patient_sd)?;
        prob("missing_rate", self.missing_rate)?;
        prob("ineligible_rate", self.ineligible_rate)?;
        if let Some(h) = self.horizon_years {
            if !(h > 0.0) {
                return Err(Error::config("horizon_years", "must be > 0"));
            }
        }
        let s = self.schedule;
        if !(s.first_visit_years > 0.0 && s.interval_years > 0.0) {
            return Err(Error::config("schedule", "visit times must be positive"));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("beta_true", "must be finite"));
        }
        for a in &self.anchors {
            if !(a.sd > 0.0 && a.floor > 0.0 && a.mean.is_finite()) {
                return Err(Error::config("anchors", "need sd > 0 and floor > 0"));
            }
        }
        if let HazardShape::Quadratic { feature, scale } = self.hazard_shape {
            if feature >= P || !scale.is_finite() {
                return Err(Error::config("hazard_shape", "feature index or scale out of range"));
            }
        }
        if self.regions.is_empty() || self.regions.iter().all(|r| r.n_patients == 0) {
            return Err(Error::config("regions", "at least one patient is required"));
        }
        for r in &self.regions {
            if r.scale.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::config("regions.scale", format!("region {} has a non-positive scale", r.label)));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: SimConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn linear_predictor(&self, region: &RegionProfile, zbar: &[f64; P]) -> f64 {
        let mut eta: f64 = (0..P).map(|j| (self.beta_true[j] + region.delta_beta[j]) * zbar[j]).sum();
        if let HazardShape::Quadratic { feature, scale } = self.hazard_shape {
            eta += scale * zbar[feature] * zbar[feature];
        }
        eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub patient_id: String,
    pub region: String,
    pub linear_predictor: f64,
    pub mean_shifted: bool,
    pub concept_shifted: bool,
    pub held_out: bool,
}

/// Hidden per-patient ground truth, in generation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthTable {
    pub rows: Vec<TruthRow>,
}

impl TruthTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<truth>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(TruthTable { rows })
    }

    pub fn get(&self, patient_id: &str) -> Option<&TruthRow> {
        self.rows.iter().find(|r| r.patient_id == patient_id)
    }
}

/// The true linear predictor behind a patient's failure-time draw.
pub fn oracle_risk(truth: &TruthTable, patient_id: &str) -> Result<f64> {
    truth
        .get(patient_id)
        .map(|r| r.linear_predictor)
        .ok_or_else(|| Error::Data(format!("patient {patient_id} is not in the truth table")))
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub patients: Vec<PatientRecord>,
    pub truth: TruthTable,
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    if rate == 0.0 {
        f64::INFINITY
    } else {
        -u.ln() / rate
    }
}

fn window_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2002, 2, 27).expect("valid date")
}

const WINDOW_DAYS: i64 = 7217; // 2002-02-27 to 2021-12-01

fn generate_patient(
    config: &SimConfig,
    region_index: usize,
    region: &RegionProfile,
    index: usize,
) -> Result<(PatientRecord, TruthRow)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(index as u64));
    rng.set_stream(region_index as u64);
    let mut age = 18.0 + (rng.sample::<f64, _>(StandardNormal) * 12.0 + 34.0).clamp(0.0, 62.0);
    let (mut transplant_count, mut organ_count) = (1, 1);
    if rng.random::<f64>() < config.ineligible_rate {
        match rng.random_range(0..3) {
            0 => age = rng.random_range(1.0..17.0),
            1 => transplant_count = 2,
            _ => organ_count = 2,
        }
    }
    let transplant_date = window_start() + Duration::days(rng.random_range(0..=WINDOW_DAYS));

    let mut mu = [0.0; P];
    for j in 0..P {
        mu[j] = region.mean_shift[j] + region.scale[j] * rng.sample::<f64, _>(StandardNormal);
    }
    let until = config.horizon_years.unwrap_or(MAX_SCHEDULE_YEARS).min(MAX_SCHEDULE_YEARS);
    let visits = config.schedule.times(until);
    let rho = config.autocorrelation;
    let sd = config.within_patient_sd;
    let innovation = sd * (1.0 - rho * rho).sqrt();
    let mut dev = [0.0; P];
    let mut latent: Vec<[f64; P]> = Vec::with_capacity(visits.len());
    for k in 0..visits.len() {
        let mut z = [0.0; P];
        for j in 0..P {
            let e: f64 = rng.sample(StandardNormal);
            dev[j] = if k == 0 { sd * e } else { rho * dev[j] + innovation * e };
            z[j] = mu[j] + dev[j];
        }
        latent.push(z);
    }
    let mut zbar = mu;
    if !latent.is_empty() {
        for j in 0..P {
            zbar[j] = latent.iter().map(|z| z[j]).sum::<f64>() / latent.len() as f64;
        }
    }
    let eta = config.linear_predictor(region, &zbar);

    let t_fail = exponential(&mut rng, config.baseline_hazard * eta.exp());
    let t_cens = exponential(&mut rng, config.censoring_rate);
    let t_comp = exponential(&mut rng, config.competing_rate);
    let horizon = config.horizon_years.unwrap_or(f64::INFINITY);
    let (mut time, mut event_type) = (horizon, EventType::Censored);
    for (t, e) in [
        (t_fail, EventType::GraftFailure),
        (t_comp, EventType::CompetingDeath),
        (t_cens, EventType::Censored),
    ] {
        if t < time {
            time = t;
            event_type = e;
        }
    }
    if !time.is_finite() {
        return Err(Error::config(
            "horizon_years",
            "no censoring, competing risk, or horizon and an infinite failure time",
        ));
    }
    let event_day = ((time * DAYS_PER_YEAR).ceil() as u32).max(1);

    let mut follow_ups = Vec::new();
    for (v, z) in visits.iter().zip(&latent) {
        let day = (v * DAYS_PER_YEAR).floor() as u32;
        let mut values = [None; P];
        for j in 0..P {
            let missing = rng.random::<f64>() < config.missing_rate;
            let a = config.anchors[j];
            values[j] = (!missing).then(|| (a.mean + a.sd * z[j]).max(a.floor));
        }
        if day < event_day {
            follow_ups.push(FollowUpRecord {
                day,
                panel: BiomarkerPanel::new(values)?,
            });
        }
    }

    let patient_id = format!("{}-{index:05}", region.label);
    let record = PatientRecord {
        patient_id: patient_id.clone(),
        region: region.label.clone(),
        age_at_transplant: age,
        transplant_count,
        organ_count,
        transplant_date,
        follow_ups,
        outcome: Outcome {
            event_type,
            event_day,
        },
    };
    let truth = TruthRow {
        patient_id,
        region: region.label.clone(),
        linear_predictor: eta,
        mean_shifted: region.mean_shifted(),
        concept_shifted: region.concept_shifted(),
        held_out: region.held_out,
    };
    Ok((record, truth))
}

/// Generates every region's patients; identical configs give identical cohorts.
pub fn generate_cohort(config: &SimConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .regions
        .iter()
        .enumerate()
        .flat_map(|(r, region)| (0..region.n_patients).map(move |i| (r, i)))
        .collect();
    let generated: Vec<(PatientRecord, TruthRow)> = jobs
        .par_iter()
        .map(|&(r, i)| generate_patient(config, r, &config.regions[r], i))
        .collect::<Result<_>>()?;
    let (patients, rows) = generated.into_iter().unzip();
    Ok(SyntheticCohort {
        patients,
        truth: TruthTable { rows },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_half_then_annual() {
        let s = VisitSchedule::default();
        assert_eq!(s.times(3.5), vec![0.5, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_autocorrelation() {
        let c = SimConfig {
            autocorrelation: 1.2,
            ..SimConfig::default()
        };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("autocorrelation"), "{err}");
    }

    #[test]
    fn no_competing_or_censoring_all_fail() {
        let c = SimConfig {
            censoring_rate: 0.0,
            competing_rate: 0.0,
            horizon_years: None,
            ..SimConfig::single_region(200, [0.5, 0.0, 0.0, 0.0, 0.0, 0.0], 4)
        };
        let cohort = generate_cohort(&c).unwrap();
        assert!(cohort
            .patients
            .iter()
            .all(|p| p.outcome.event_type == EventType::GraftFailure));
    }

    #[test]
    fn oracle_lookup() {
        let cohort = generate_cohort(&SimConfig::single_region(5, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2)).unwrap();
        let id = &cohort.patients[3].patient_id;
        assert_eq!(oracle_risk(&cohort.truth, id).unwrap(), cohort.truth.rows[3].linear_predictor);
        assert!(oracle_risk(&cohort.truth, "nobody").is_err());
    }

    #[test]
    fn visits_precede_outcome_and_records_validate() {
        let cohort = generate_cohort(&SimConfig::default()).unwrap();
        for p in &cohort.patients {
            p.validate().unwrap();
            assert!(p.follow_ups.iter().all(|f| f.day < p.outcome.event_day));
        }
    }
}
