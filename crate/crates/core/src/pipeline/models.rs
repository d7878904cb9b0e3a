use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::{Biomarker, BiomarkerPanel};
use crate::coxnet::{CoxModel, Covariates};
use crate::error::{Error, Result};
use crate::forest::RsfModel;
use crate::scores::RiskScoreDef;
use crate::synth::TruthTable;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FittedModel {
    Cox(CoxModel),
    Rsf(RsfModel),
}

/// A fitted model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub name: String,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn new(name: &str, model: FittedModel) -> Self {
        ModelFile {
            format_version: MODEL_FILE_VERSION,
            name: name.to_string(),
            model,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ModelFile = serde_json::from_str(&s)?;
        if m.format_version != MODEL_FILE_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported model format version {}",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn into_scorer(self) -> Scorer {
        match self.model {
            FittedModel::Cox(m) => Scorer::Cox(m),
            FittedModel::Rsf(m) => Scorer::Rsf(m),
        }
    }
}

/// Complete raw panel from six canonical values.
pub fn panel_from(raw: &[f64]) -> Result<BiomarkerPanel> {
    let values: [f64; Biomarker::COUNT] = raw.try_into().map_err(|_| {
        Error::Data(format!("expected {} biomarkers, got {}", Biomarker::COUNT, raw.len()))
    })?;
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::MissingCovariate(Biomarker::ALL[j].name().to_string()));
    }
    BiomarkerPanel::complete(values)
}

/// Anything that turns a raw panel (and patient identity) into a risk.
#[derive(Debug, Clone)]
pub enum Scorer {
    Fixed(RiskScoreDef),
    Cox(CoxModel),
    Rsf(RsfModel),
    /// True linear predictors by patient id.
    Oracle(HashMap<String, f64>),
    /// Uniform noise keyed by seed and patient id.
    Random(u64),
}

impl Scorer {
    pub fn oracle(truth: &TruthTable) -> Self {
        Scorer::Oracle(
            truth
                .rows
                .iter()
                .map(|r| (r.patient_id.clone(), r.linear_predictor))
                .collect(),
        )
    }

    pub fn risk(&self, patient_id: &str, raw: &[f64]) -> Result<f64> {
        match self {
            Scorer::Fixed(def) => def.compute(&panel_from(raw)?),
            Scorer::Cox(m) => m.linear_risk(Covariates::Raw(&panel_from(raw)?)),
            Scorer::Rsf(m) => m.risk_raw(&panel_from(raw)?),
            Scorer::Oracle(table) => table
                .get(patient_id)
                .copied()
                .ok_or_else(|| Error::Data(format!("patient {patient_id} is not in the truth table"))),
            Scorer::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(patient_id.as_bytes()));
                Ok(rng.random::<f64>())
            }
        }
    }
}

/// 64-bit FNV-1a; stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
