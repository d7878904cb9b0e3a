//! Long-format cohort CSV: one row per follow-up, static columns repeated.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;
use serde::{Deserialize, Serialize};

use super::types::{
    Biomarker, BiomarkerPanel, EventType, FollowUpRecord, Outcome, PatientRecord,
};
use crate::error::{Error, Result};

/// Maps logical fields to CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSchema {
    pub patient_id: String,
    pub region: String,
    pub transplant_date: String,
    pub age_at_transplant: String,
    pub transplant_count: String,
    pub organ_count: String,
    pub followup_day: String,
    pub bilirubin: String,
    pub creatinine: String,
    pub albumin: String,
    pub ast: String,
    pub alt: String,
    pub inr: String,
    pub event_type: String,
    pub event_day: String,
}

impl Default for CohortSchema {
    fn default() -> Self {
        CohortSchema {
            patient_id: "patient_id".into(),
            region: "region".into(),
            transplant_date: "transplant_date".into(),
            age_at_transplant: "age_at_transplant".into(),
            transplant_count: "transplant_count".into(),
            organ_count: "organ_count".into(),
            followup_day: "followup_day".into(),
            bilirubin: "bilirubin".into(),
            creatinine: "creatinine".into(),
            albumin: "albumin".into(),
            ast: "ast".into(),
            alt: "alt".into(),
            inr: "inr".into(),
            event_type: "event_type".into(),
            event_day: "event_day".into(),
        }
    }
}

impl CohortSchema {
    fn biomarker_column(&self, b: Biomarker) -> &str {
        match b {
            Biomarker::Bilirubin => &self.bilirubin,
            Biomarker::Creatinine => &self.creatinine,
            Biomarker::Albumin => &self.albumin,
            Biomarker::Ast => &self.ast,
            Biomarker::Alt => &self.alt,
            Biomarker::Inr => &self.inr,
        }
    }
}

struct Columns {
    patient_id: usize,
    region: usize,
    transplant_date: usize,
    age: usize,
    transplant_count: usize,
    organ_count: usize,
    followup_day: usize,
    biomarkers: [usize; Biomarker::COUNT],
    event_type: usize,
    event_day: usize,
}

impl Columns {
    fn resolve(headers: &StringRecord, schema: &CohortSchema, path: &Path) -> Result<Self> {
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
        };
        let mut biomarkers = [0; Biomarker::COUNT];
        for b in Biomarker::ALL {
            biomarkers[b.index()] = find(schema.biomarker_column(b))?;
        }
        Ok(Columns {
            patient_id: find(&schema.patient_id)?,
            region: find(&schema.region)?,
            transplant_date: find(&schema.transplant_date)?,
            age: find(&schema.age_at_transplant)?,
            transplant_count: find(&schema.transplant_count)?,
            organ_count: find(&schema.organ_count)?,
            followup_day: find(&schema.followup_day)?,
            biomarkers,
            event_type: find(&schema.event_type)?,
            event_day: find(&schema.event_day)?,
        })
    }
}

/// Static fields that must agree across all of a patient's rows.
#[derive(PartialEq)]
struct StaticFields {
    region: String,
    transplant_date: NaiveDate,
    age: f64,
    transplant_count: u32,
    organ_count: u32,
    outcome: Outcome,
}

struct RowParser<'a> {
    path: &'a Path,
    line: u64,
    record: &'a StringRecord,
}

impl RowParser<'_> {
    fn err(&self, message: String) -> Error {
        Error::Row {
            path: self.path.to_path_buf(),
            line: self.line,
            message,
        }
    }

    fn field(&self, idx: usize) -> &str {
        self.record.get(idx).map(str::trim).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, idx: usize, what: &str) -> Result<T> {
        let raw = self.field(idx);
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse {what} from {raw:?}")))
    }

    fn optional_f64(&self, idx: usize, what: &str) -> Result<Option<f64>> {
        if self.field(idx).is_empty() {
            return Ok(None);
        }
        self.parse::<f64>(idx, what).map(Some)
    }
}

/// Reads a long-format cohort CSV into one record per patient.
///
/// Patients appear in order of first occurrence; follow-ups are sorted by day.
/// A row with an empty `followup_day` contributes static fields only, which is
/// how patients without any follow-up are represented.
pub fn load_cohort(path: impl AsRef<Path>, schema: &CohortSchema) -> Result<Vec<PatientRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let cols = Columns::resolve(&headers, schema, path)?;

    let mut order: Vec<String> = Vec::new();
    let mut statics: BTreeMap<String, StaticFields> = BTreeMap::new();
    let mut visits: BTreeMap<String, BTreeMap<u32, FollowUpRecord>> = BTreeMap::new();

    let mut record = StringRecord::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = RowParser {
            path,
            line,
            record: &record,
        };
        let id = row.field(cols.patient_id).to_string();
        if id.is_empty() {
            return Err(row.err("empty patient_id".into()));
        }
        let date_raw = row.field(cols.transplant_date);
        let transplant_date = NaiveDate::parse_from_str(date_raw, "%Y-%m-%d")
            .map_err(|_| row.err(format!("cannot parse transplant_date from {date_raw:?}")))?;
        let code: u8 = row.parse(cols.event_type, "event_type")?;
        let event_type = EventType::from_code(code)
            .ok_or_else(|| row.err(format!("event_type must be 0, 1 or 2, got {code}")))?;
        let fields = StaticFields {
            region: row.field(cols.region).to_string(),
            transplant_date,
            age: row.parse(cols.age, "age_at_transplant")?,
            transplant_count: row.parse(cols.transplant_count, "transplant_count")?,
            organ_count: row.parse(cols.organ_count, "organ_count")?,
            outcome: Outcome {
                event_type,
                event_day: row.parse(cols.event_day, "event_day")?,
            },
        };
        if fields.transplant_count < 1 || fields.organ_count < 1 {
            return Err(row.err("transplant_count and organ_count must be >= 1".into()));
        }
        match statics.get(&id) {
            Some(existing) if *existing != fields => {
                return Err(row.err(format!(
                    "static columns differ from earlier rows of patient {id}"
                )));
            }
            Some(_) => {}
            None => {
                order.push(id.clone());
                statics.insert(id.clone(), fields);
            }
        }

        if row.field(cols.followup_day).is_empty() {
            continue;
        }
        let day: u32 = row.parse(cols.followup_day, "followup_day")?;
        let mut values = [None; Biomarker::COUNT];
        for b in Biomarker::ALL {
            values[b.index()] = row.optional_f64(cols.biomarkers[b.index()], b.name())?;
        }
        let panel = BiomarkerPanel::new(values).map_err(|e| row.err(e.to_string()))?;
        let patient_visits = visits.entry(id.clone()).or_default();
        if patient_visits.contains_key(&day) {
            return Err(row.err(format!(
                "duplicate follow-up at day {day} for patient {id}"
            )));
        }
        patient_visits.insert(day, FollowUpRecord { day, panel });
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let s = statics.remove(&id).expect("static fields recorded for every id");
        let follow_ups = visits
            .remove(&id)
            .map(|m| m.into_values().collect())
            .unwrap_or_default();
        let patient = PatientRecord {
            patient_id: id,
            region: s.region,
            age_at_transplant: s.age,
            transplant_count: s.transplant_count,
            organ_count: s.organ_count,
            transplant_date: s.transplant_date,
            follow_ups,
            outcome: s.outcome,
        };
        patient.validate()?;
        out.push(patient);
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes patients in the long format accepted by [`load_cohort`] with the default schema.
pub fn write_cohort<W: Write>(writer: W, cohort: &[PatientRecord]) -> Result<()> {
    let schema = CohortSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        &schema.patient_id,
        &schema.region,
        &schema.transplant_date,
        &schema.age_at_transplant,
        &schema.transplant_count,
        &schema.organ_count,
        &schema.followup_day,
        &schema.bilirubin,
        &schema.creatinine,
        &schema.albumin,
        &schema.ast,
        &schema.alt,
        &schema.inr,
        &schema.event_type,
        &schema.event_day,
    ])?;
    for p in cohort {
        let statics = [
            p.patient_id.clone(),
            p.region.clone(),
            p.transplant_date.format("%Y-%m-%d").to_string(),
            p.age_at_transplant.to_string(),
            p.transplant_count.to_string(),
            p.organ_count.to_string(),
        ];
        let tail = [
            p.outcome.event_type.code().to_string(),
            p.outcome.event_day.to_string(),
        ];
        if p.follow_ups.is_empty() {
            let empty = vec![String::new(); 1 + Biomarker::COUNT];
            w.write_record(statics.iter().chain(empty.iter()).chain(tail.iter()))?;
            continue;
        }
        for f in &p.follow_ups {
            let mut row: Vec<String> = statics.to_vec();
            row.push(f.day.to_string());
            row.extend(f.panel.values().iter().map(|v| fmt_opt(*v)));
            row.extend(tail.iter().cloned());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<cohort writer>", e))?;
    Ok(())
}

pub fn write_cohort_file(path: impl AsRef<Path>, cohort: &[PatientRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cohort(std::io::BufWriter::new(file), cohort)
}
