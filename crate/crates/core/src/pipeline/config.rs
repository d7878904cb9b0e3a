use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortSchema, ExclusionCriterion, SplitFractions};
use crate::coxnet::{elastic_net_grid, FitConfig, TiesMethod, DEFAULT_L1_RATIOS, DEFAULT_PENALIZERS};
use crate::error::{Error, Result};
use crate::forest::RsfConfig;
use crate::metrics::{BootstrapConfig, DEFAULT_PREDICTION_TIMES, DEFAULT_WINDOWS};
use crate::synth::SimConfig;

pub const RUN_FORMAT_VERSION: u32 = 1;

/// Where patients come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        synth: SimConfig,
    },
    Files {
        cohort: PathBuf,
        /// Truth table enabling the oracle reference.
        #[serde(default)]
        truth: Option<PathBuf>,
        /// Regions evaluated as external sites and never trained on.
        #[serde(default)]
        held_out_regions: Vec<String>,
        #[serde(default)]
        schema: CohortSchema,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            synth: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mas,
    Meld,
    Albi,
    CoxMeaf,
    CoxMeld,
    CoxAlbi,
    Cox,
    Rsf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Mas,
        ModelKind::Meld,
        ModelKind::Albi,
        ModelKind::CoxMeaf,
        ModelKind::CoxMeld,
        ModelKind::CoxAlbi,
        ModelKind::Cox,
        ModelKind::Rsf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mas => "mas",
            ModelKind::Meld => "meld",
            ModelKind::Albi => "albi",
            ModelKind::CoxMeaf => "cox_meaf",
            ModelKind::CoxMeld => "cox_meld",
            ModelKind::CoxAlbi => "cox_albi",
            ModelKind::Cox => "cox",
            ModelKind::Rsf => "rsf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoxGrid {
    pub penalizers: Vec<f64>,
    pub l1_ratios: Vec<f64>,
    pub ties: TiesMethod,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CoxGrid {
    fn default() -> Self {
        CoxGrid {
            penalizers: DEFAULT_PENALIZERS.to_vec(),
            l1_ratios: DEFAULT_L1_RATIOS.to_vec(),
            ties: TiesMethod::Efron,
            max_iter: 100,
            tol: 1e-7,
        }
    }
}

impl CoxGrid {
    pub fn configs(&self) -> Vec<FitConfig> {
        elastic_net_grid(&self.penalizers, &self.l1_ratios)
            .into_iter()
            .map(|c| FitConfig {
                ties: self.ties,
                max_iter: self.max_iter,
                tol: self.tol,
                ..c
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RsfGrid {
    pub n_estimators: usize,
    pub min_samples_split: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub mtry: Option<usize>,
}

impl Default for RsfGrid {
    fn default() -> Self {
        RsfGrid {
            n_estimators: 100,
            min_samples_split: vec![5, 13, 20],
            max_depth: vec![3, 6, 9],
            mtry: None,
        }
    }
}

impl RsfGrid {
    pub fn configs(&self, seed: u64) -> Vec<RsfConfig> {
        self.min_samples_split
            .iter()
            .flat_map(|&m| {
                self.max_depth.iter().map(move |&d| RsfConfig {
                    n_estimators: self.n_estimators,
                    min_samples_split: m,
                    max_depth: d,
                    mtry: self.mtry,
                    bootstrap: true,
                    seed,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSettings {
    pub n_resamples: usize,
    pub level: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            n_resamples: 1000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub data: DataSource,
    pub exclusions: Vec<ExclusionCriterion>,
    pub split: SplitFractions,
    pub cox_grid: CoxGrid,
    pub rsf_grid: RsfGrid,
    pub prediction_times: Vec<f64>,
    pub windows: Vec<f64>,
    pub bootstrap: BootstrapSettings,
    pub models: Vec<ModelKind>,
    /// Add oracle and random reference scores when ground truth is available.
    pub references: bool,
    /// Significance level of the model comparison.
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: RUN_FORMAT_VERSION,
            seed: 1,
            data: DataSource::default(),
            exclusions: ExclusionCriterion::registry_defaults(),
            split: SplitFractions::default(),
            cox_grid: CoxGrid::default(),
            rsf_grid: RsfGrid::default(),
            prediction_times: DEFAULT_PREDICTION_TIMES.to_vec(),
            windows: DEFAULT_WINDOWS.to_vec(),
            bootstrap: BootstrapSettings::default(),
            models: ModelKind::ALL.to_vec(),
            references: true,
            alpha: 0.05,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s).map_err(|e| Error::config("config", e.to_string()))?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Overrides the run seed and, for synthetic data, the generator seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let DataSource::Synthetic { synth } = &mut self.data {
            synth.seed = seed;
        }
        self
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_resamples: self.bootstrap.n_resamples,
            seed: self.seed,
            level: self.bootstrap.level,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != RUN_FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!("unsupported version {}", self.format_version),
            ));
        }
        match &self.data {
            DataSource::Synthetic { synth } => synth.validate()?,
            DataSource::Files { cohort, truth, .. } => {
                for p in std::iter::once(cohort).chain(truth.as_ref()) {
                    if !p.is_file() {
                        return Err(Error::config("data", format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        if self.exclusions.is_empty() {
            return Err(Error::config("exclusions", "must list at least one criterion"));
        }
        self.split.validate()?;
        if self.cox_grid.penalizers.is_empty() || self.cox_grid.l1_ratios.is_empty() {
            return Err(Error::config("cox_grid", "grids must be non-empty"));
        }
        for c in self.cox_grid.configs() {
            c.validate()?;
        }
        if self.rsf_grid.min_samples_split.is_empty() || self.rsf_grid.max_depth.is_empty() {
            return Err(Error::config("rsf_grid", "grids must be non-empty"));
        }
        for c in self.rsf_grid.configs(self.seed) {
            c.validate(crate::cohort::Biomarker::COUNT)?;
        }
        if self.prediction_times.is_empty() || self.windows.is_empty() {
            return Err(Error::config("tdci_grid", "prediction times and windows must be non-empty"));
        }
        if self.prediction_times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::config("prediction_times", "must be finite and >= 0"));
        }
        if self.windows.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config("windows", "must be finite and > 0"));
        }
        self.bootstrap_config().validate()?;
        if self.models.is_empty() {
            return Err(Error::config("models", "must select at least one model"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie strictly between 0 and 1"));
        }
        Ok(())
    }
}
