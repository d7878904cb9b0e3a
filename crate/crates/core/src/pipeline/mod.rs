//! End-to-end workflow: data, exclusions, split, normalization, model
//! selection on the validation split, per-site evaluation with bootstrap
//! intervals, and the cross-site model comparison.
//!
//! Every stage error is tagged with the stage name. Outputs are written to a
//! staging directory and moved into place only when the whole run succeeds.

mod config;
mod models;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    BootstrapSettings, CoxGrid, DataSource, ModelKind, RsfGrid, RunConfig, RUN_FORMAT_VERSION,
};
pub use models::{panel_from, FittedModel, ModelFile, Scorer, MODEL_FILE_VERSION};

use crate::cohort::{
    apply_exclusions, augment, feature_names, fit_normalization, impute, load_cohort, normalize,
    split, to_counting_process, write_cohort_file, ExclusionReport, NormalizationStats,
    PatientRecord,
};
use crate::coxnet::{grid_search, GridEntry};
use crate::error::{Error, Result};
use crate::forest::{fit_rsf_with, RsfConfig};
use crate::metrics::{
    evaluate_grid, mean_tdci, write_eval_csv, EvalPatient, EvalResult, RiskContext,
};
use crate::scores::{project_rows, subset_space, RestrictedVariant, RiskScoreDef};
use crate::stats::{critical_difference, render_cd_svg, CdResult, ScoreMatrix};
use crate::synth::{generate_cohort, TruthTable};

/// Site label for the union of in-distribution test sets.
pub const POOLED_SITE: &str = "pooled";
pub const ORACLE: &str = "oracle";
pub const RANDOM: &str = "random";

/// Imputed patient sets with the statistics learned on the training split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub exclusions: ExclusionReport,
    pub stats: NormalizationStats,
    pub train: Vec<PatientRecord>,
    pub val: Vec<PatientRecord>,
    pub test: Vec<PatientRecord>,
    /// Held-out regions in first-seen order.
    pub external: Vec<(String, Vec<PatientRecord>)>,
    pub truth: Option<TruthTable>,
}

fn load(config: &RunConfig) -> Result<(Vec<PatientRecord>, Option<TruthTable>, BTreeSet<String>)> {
    match &config.data {
        DataSource::Synthetic { synth } => {
            let cohort = generate_cohort(synth)?;
            let held_out = synth
                .regions
                .iter()
                .filter(|r| r.held_out)
                .map(|r| r.label.clone())
                .collect();
            Ok((cohort.patients, Some(cohort.truth), held_out))
        }
        DataSource::Files {
            cohort,
            truth,
            held_out_regions,
            schema,
        } => {
            let patients = load_cohort(cohort, schema)?;
            let truth = truth.as_ref().map(TruthTable::read_csv_file).transpose()?;
            Ok((patients, truth, held_out_regions.iter().cloned().collect()))
        }
    }
}

pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    config.validate()?;
    let (patients, truth, held_out) = load(config).map_err(|e| e.in_stage("load"))?;
    let (kept, exclusions) =
        apply_exclusions(patients, &config.exclusions).map_err(|e| e.in_stage("exclusions"))?;

    let (in_dist, outside): (Vec<PatientRecord>, Vec<PatientRecord>) =
        kept.into_iter().partition(|p| !held_out.contains(&p.region));
    let parts = split(&in_dist, config.split, config.seed).map_err(|e| e.in_stage("split"))?;

    let stats = fit_normalization(&parts.train).map_err(|e| e.in_stage("normalize"))?;
    let imp = |c: &[PatientRecord]| impute(c, &stats).map_err(|e| e.in_stage("impute"));
    let mut external: Vec<(String, Vec<PatientRecord>)> = Vec::new();
    for p in imp(&outside)? {
        match external.iter_mut().find(|(r, _)| *r == p.region) {
            Some((_, v)) => v.push(p),
            None => external.push((p.region.clone(), vec![p])),
        }
    }
    Ok(PreparedData {
        train: imp(&parts.train)?,
        val: imp(&parts.val)?,
        test: imp(&parts.test)?,
        external,
        exclusions,
        stats,
        truth,
    })
}

/// One RSF grid cell and its validation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfGridEntry {
    pub min_samples_split: usize,
    pub max_depth: usize,
    pub metric: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub model: String,
    pub selected: serde_json::Value,
    pub cox_entries: Vec<GridEntry>,
    pub rsf_entries: Vec<RsfGridEntry>,
}

#[derive(Debug, Clone)]
pub struct FittedModels {
    pub files: Vec<ModelFile>,
    pub grids: Vec<GridReport>,
}

fn eval_patients(records: &[PatientRecord]) -> Vec<EvalPatient> {
    records.iter().map(EvalPatient::from_record).collect()
}

fn scorer_risk(scorer: &Scorer) -> impl Fn(&RiskContext<'_>) -> Result<f64> + Sync + '_ {
    move |ctx| scorer.risk(ctx.patient_id, ctx.covariates)
}

fn validation_score(scorer: &Scorer, val: &[EvalPatient], config: &RunConfig) -> Result<f64> {
    Ok(mean_tdci(val, &scorer_risk(scorer), &config.prediction_times, &config.windows)?.mean)
}

/// Selects every fitted model family on validation mean TDCI.
pub fn fit_models(config: &RunConfig, data: &PreparedData) -> Result<FittedModels> {
    let stage = |e: Error| e.in_stage("fit");
    let normalized = normalize(&data.train, &data.stats).map_err(stage)?;
    let val = eval_patients(&data.val);
    let mut files = Vec::new();
    let mut grids = Vec::new();

    let cox_kinds: Vec<(ModelKind, Vec<crate::cohort::Biomarker>)> = config
        .models
        .iter()
        .filter_map(|&k| {
            let subset = match k {
                ModelKind::Cox => crate::cohort::Biomarker::ALL.to_vec(),
                ModelKind::CoxMeaf => RestrictedVariant::CoxMeaf.features(),
                ModelKind::CoxMeld => RestrictedVariant::CoxMeld.features(),
                ModelKind::CoxAlbi => RestrictedVariant::CoxAlbi.features(),
                _ => return None,
            };
            Some((k, subset))
        })
        .collect();
    if !cox_kinds.is_empty() {
        let rows = to_counting_process(&normalized);
        let grid = config.cox_grid.configs();
        for (kind, subset) in cox_kinds {
            let projected = project_rows(&rows, &subset).map_err(stage)?;
            let space = subset_space(&subset, Some(&data.stats));
            let search = grid_search(&projected, val.as_slice(), &grid, &space, |model, val| {
                validation_score(&Scorer::Cox(model.clone()), val, config)
            })
            .map_err(stage)?;
            grids.push(GridReport {
                model: kind.name().to_string(),
                selected: serde_json::to_value(search.best_config)?,
                cox_entries: search.entries,
                rsf_entries: Vec::new(),
            });
            files.push(ModelFile::new(kind.name(), FittedModel::Cox(search.model)));
        }
    }

    if config.models.contains(&ModelKind::Rsf) {
        let aug = augment(&normalized);
        let mut entries = Vec::new();
        let mut best: Option<(f64, RsfConfig, crate::forest::RsfModel)> = None;
        for cfg in config.rsf_grid.configs(config.seed) {
            let scored = fit_rsf_with(&aug.rows, &cfg, feature_names(), Some(data.stats.clone()))
                .and_then(|m| {
                    let s = validation_score(&Scorer::Rsf(m.clone()), &val, config)?;
                    Ok((s, m))
                });
            let (metric, error) = match scored {
                Ok((s, m)) => {
                    if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                        best = Some((s, cfg, m));
                    }
                    (Some(s), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            entries.push(RsfGridEntry {
                min_samples_split: cfg.min_samples_split,
                max_depth: cfg.max_depth,
                metric,
                error,
            });
        }
        let Some((_, cfg, model)) = best else {
            let msg = entries
                .iter()
                .filter_map(|e| e.error.clone())
                .collect::<Vec<_>>()
                .join("; ");
            return Err(stage(Error::GridFailed(msg)));
        };
        grids.push(GridReport {
            model: ModelKind::Rsf.name().to_string(),
            selected: serde_json::to_value(cfg)?,
            cox_entries: Vec::new(),
            rsf_entries: entries,
        });
        files.push(ModelFile::new(ModelKind::Rsf.name(), FittedModel::Rsf(model)));
    }
    Ok(FittedModels { files, grids })
}

/// Fixed scores, fitted models, and (with ground truth) the references, in
/// the configured model order.
pub fn assemble_scorers(
    config: &RunConfig,
    data: &PreparedData,
    fitted: Vec<ModelFile>,
) -> Result<Vec<(String, Scorer)>> {
    let mut out = Vec::new();
    for &kind in &config.models {
        let scorer = match kind {
            ModelKind::Mas => Scorer::Fixed(RiskScoreDef::mas(data.stats.clone())),
            ModelKind::Meld => Scorer::Fixed(RiskScoreDef::meld()),
            ModelKind::Albi => Scorer::Fixed(RiskScoreDef::albi()),
            _ => fitted
                .iter()
                .find(|f| f.name == kind.name())
                .cloned()
                .ok_or_else(|| Error::Data(format!("no fitted model named {}", kind.name())))?
                .into_scorer(),
        };
        out.push((kind.name().to_string(), scorer));
    }
    if config.references {
        if let Some(truth) = &data.truth {
            out.push((ORACLE.to_string(), Scorer::oracle(truth)));
            out.push((RANDOM.to_string(), Scorer::Random(config.seed)));
        }
    }
    Ok(out)
}

/// In-distribution test sets per region, their union, and held-out regions.
pub fn evaluation_sites(data: &PreparedData) -> Vec<(String, Vec<PatientRecord>)> {
    let mut regions: Vec<String> = Vec::new();
    for p in &data.test {
        if !regions.contains(&p.region) {
            regions.push(p.region.clone());
        }
    }
    let mut sites: Vec<(String, Vec<PatientRecord>)> = regions
        .iter()
        .map(|r| {
            (
                r.clone(),
                data.test.iter().filter(|p| &p.region == r).cloned().collect(),
            )
        })
        .collect();
    if regions.len() > 1 {
        sites.push((POOLED_SITE.to_string(), data.test.clone()));
    }
    sites.extend(data.external.iter().cloned());
    sites
}

pub fn evaluate(
    config: &RunConfig,
    sites: &[(String, Vec<PatientRecord>)],
    scorers: &[(String, Scorer)],
) -> Result<Vec<EvalResult>> {
    let boot = config.bootstrap_config();
    let mut results = Vec::new();
    for (site, records) in sites {
        let patients = eval_patients(records);
        for (name, scorer) in scorers {
            let eval = evaluate_grid(
                &patients,
                &scorer_risk(scorer),
                &config.prediction_times,
                &config.windows,
                &boot,
            )
            .map_err(|e| Error::Data(format!("{name} on {site}: {e}")).in_stage("evaluate"))?;
            results.push(EvalResult::new(name, site, patients.len(), eval));
        }
    }
    Ok(results)
}

/// Critical-difference analysis over models (references excluded) and sites.
pub fn compare(results: &[EvalResult], alpha: f64) -> Result<Option<CdResult>> {
    let mut models: Vec<String> = Vec::new();
    let mut sites: Vec<String> = Vec::new();
    for r in results {
        if r.model == ORACLE || r.model == RANDOM {
            continue;
        }
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
        if !sites.contains(&r.site) {
            sites.push(r.site.clone());
        }
    }
    if models.len() < 2 || sites.len() < 2 {
        return Ok(None);
    }
    let scores = models
        .iter()
        .map(|m| {
            sites
                .iter()
                .map(|s| {
                    results
                        .iter()
                        .find(|r| &r.model == m && &r.site == s)
                        .map(|r| r.mean_tdci)
                        .ok_or_else(|| Error::Data(format!("no result for {m} on {s}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = ScoreMatrix::new(models, sites, scores)?;
    Ok(Some(critical_difference(&matrix, alpha)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub results: Vec<EvalResult>,
}

impl EvalReport {
    pub fn new(results: Vec<EvalResult>) -> Self {
        EvalReport {
            format_version: crate::metrics::EVAL_FORMAT_VERSION,
            results,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Outputs of a full run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub data: PreparedData,
    pub models: FittedModels,
    pub results: Vec<EvalResult>,
    pub cd: Option<CdResult>,
}

impl PipelineOutput {
    pub fn result(&self, model: &str, site: &str) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.model == model && r.site == site)
    }
}

/// Directory that is renamed into place on success and deleted on failure.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Self> {
        fs::create_dir_all(target).map_err(|e| Error::io(target, e))?;
        let dir = target.join(".staging");
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n")
    }

    /// Moves every staged entry into the target, replacing existing ones.
    pub fn commit(self) -> Result<()> {
        let entries = fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let dest = self.target.join(entry.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
            }
            fs::rename(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
        fs::remove_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Runs `f` against the staging area, committing on success.
    pub fn run<T>(target: &Path, f: impl FnOnce(&Staging) -> Result<T>) -> Result<T> {
        let staging = Staging::new(target)?;
        match f(&staging) {
            Ok(v) => {
                staging.commit()?;
                Ok(v)
            }
            Err(e) => {
                let _ = fs::remove_dir_all(&staging.dir);
                Err(e)
            }
        }
    }
}

pub fn write_split_outputs(staging: &Staging, data: &PreparedData) -> Result<()> {
    staging.write_json("exclusions.json", &data.exclusions)?;
    staging.write_json("normalization.json", &data.stats)?;
    for (name, part) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
        write_cohort_file(staging.path(&format!("{name}.csv")), part)?;
    }
    for (region, part) in &data.external {
        write_cohort_file(staging.path(&format!("external_{region}.csv")), part)?;
    }
    Ok(())
}

pub fn write_model_outputs(staging: &Staging, fitted: &FittedModels) -> Result<()> {
    staging.write_json("grid_search.json", &fitted.grids)?;
    let mut csv = String::from("model,feature,coefficient\n");
    for f in &fitted.files {
        if let FittedModel::Cox(m) = &f.model {
            for (name, b) in m.feature_names.iter().zip(&m.coefficients) {
                csv.push_str(&format!("{},{name},{b}\n", f.name));
            }
        }
    }
    staging.write("coefficients.csv", csv)?;
    fs::create_dir_all(staging.path("models")).map_err(|e| Error::io(staging.path("models"), e))?;
    for f in &fitted.files {
        f.write(staging.path(&format!("models/{}.json", f.name)))?;
    }
    Ok(())
}

pub fn write_eval_outputs(staging: &Staging, results: &[EvalResult]) -> Result<()> {
    staging.write_json("eval_results.json", &EvalReport::new(results.to_vec()))?;
    let mut buf = Vec::new();
    write_eval_csv(&mut buf, results)?;
    staging.write("tdci_grid.csv", buf)
}

pub fn write_cd_outputs(staging: &Staging, cd: &CdResult) -> Result<()> {
    staging.write_json("cd.json", cd)?;
    staging.write("cd.svg", render_cd_svg(cd))
}

/// Runs every stage and writes all outputs under `out_dir`.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> Result<PipelineOutput> {
    Staging::run(out_dir, |staging| {
        let data = prepare_data(config)?;
        let models = fit_models(config, &data)?;
        let scorers = assemble_scorers(config, &data, models.files.clone()).map_err(|e| e.in_stage("evaluate"))?;
        let results = evaluate(config, &evaluation_sites(&data), &scorers)?;
        let cd = compare(&results, config.alpha).map_err(|e| e.in_stage("compare"))?;

        staging.write_json("run_config.json", config)?;
        write_split_outputs(staging, &data)?;
        write_model_outputs(staging, &models)?;
        write_eval_outputs(staging, &results)?;
        if let Some(cd) = &cd {
            write_cd_outputs(staging, cd)?;
        }
        Ok(PipelineOutput {
            data,
            models,
            results,
            cd,
        })
    })
}
