//! Command-line front end. Exit codes: 0 success, 1 usage or configuration,
//! 2 data, 3 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cohort::{Biomarker, BiomarkerPanel, NormalizationStats};
use crate::error::{Error, Result};
use crate::pipeline::{
    assemble_scorers, compare, evaluate, evaluation_sites, fit_models, prepare_data, run_pipeline,
    write_cd_outputs, write_eval_outputs, write_model_outputs, write_split_outputs, EvalReport,
    ModelFile, RunConfig, Scorer, Staging,
};
use crate::scores::{albi_score, mas_score, meld_score};
use crate::synth::{generate_cohort, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "graftsurv", version, about = "Graft-failure risk modeling and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort and its truth table.
    Synth,
    /// Apply exclusions, split, and fit normalization statistics.
    Cohort,
    /// Select and fit every configured model family.
    Fit,
    /// Score raw lab panels with fixed scores and saved models.
    Score {
        /// CSV with patient_id, followup_day and the six biomarker columns.
        #[arg(long)]
        panels: PathBuf,
        /// Normalization statistics JSON; enables MAS and imputation.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Saved model files.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Evaluate saved models on the test sites.
    Eval {
        /// Directory of saved models (default: <out-dir>/models).
        #[arg(long)]
        models_dir: Option<PathBuf>,
    },
    /// Critical-difference comparison of evaluation results.
    Compare {
        /// Evaluation results JSON (default: <out-dir>/eval_results.json).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run every stage end to end.
    Pipeline,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

fn run_config(common: &CommonArgs) -> Result<RunConfig> {
    let config = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    Ok(match common.seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn sim_config(common: &CommonArgs) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(p) => read_json::<SimConfig>(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_synth(common: &CommonArgs) -> Result<String> {
    let config = sim_config(common)?;
    let cohort = generate_cohort(&config)?;
    Staging::run(&common.out_dir, |s| {
        crate::cohort::write_cohort_file(s.path("cohort.csv"), &cohort.patients)?;
        cohort.truth.write_csv_file(s.path("truth.csv"))?;
        s.write_json("sim_config.json", &config)
    })?;
    Ok(format!(
        "wrote {} patients to {}",
        cohort.patients.len(),
        common.out_dir.join("cohort.csv").display()
    ))
}

fn cmd_cohort(common: &CommonArgs) -> Result<String> {
    let config = run_config(common)?;
    let data = prepare_data(&config)?;
    Staging::run(&common.out_dir, |s| write_split_outputs(s, &data))?;
    Ok(format!(
        "kept {} of {} patients: train {}, val {}, test {}, external {}",
        data.exclusions.final_size(),
        data.exclusions.initial,
        data.train.len(),
        data.val.len(),
        data.test.len(),
        data.external.iter().map(|(_, v)| v.len()).sum::<usize>()
    ))
}

fn cmd_fit(common: &CommonArgs) -> Result<String> {
    let config = run_config(common)?;
    let data = prepare_data(&config)?;
    let fitted = fit_models(&config, &data)?;
    Staging::run(&common.out_dir, |s| {
        s.write_json("normalization.json", &data.stats)?;
        write_model_outputs(s, &fitted)
    })?;
    Ok(format!("fitted {} models", fitted.files.len()))
}

fn cmd_eval(common: &CommonArgs, models_dir: Option<&Path>) -> Result<String> {
    let config = run_config(common)?;
    let data = prepare_data(&config)?;
    let dir = models_dir.map_or_else(|| common.out_dir.join("models"), Path::to_path_buf);
    let mut files = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    for p in entries {
        files.push(ModelFile::read(p)?);
    }
    let scorers = assemble_scorers(&config, &data, files).map_err(|e| e.in_stage("evaluate"))?;
    let results = evaluate(&config, &evaluation_sites(&data), &scorers)?;
    Staging::run(&common.out_dir, |s| write_eval_outputs(s, &results))?;
    Ok(format!("{} evaluations written", results.len()))
}

fn cmd_compare(common: &CommonArgs, input: Option<&Path>, alpha: f64) -> Result<String> {
    let path = input.map_or_else(|| common.out_dir.join("eval_results.json"), Path::to_path_buf);
    let report = EvalReport::read(&path)?;
    let cd = compare(&report.results, alpha)?.ok_or_else(|| {
        Error::Data("comparison needs at least two models and two sites".into())
    })?;
    Staging::run(&common.out_dir, |s| write_cd_outputs(s, &cd))?;
    Ok(format!(
        "Friedman statistic {:.4}, p = {:.4}; {} cliques",
        cd.friedman.statistic,
        cd.friedman.p_value,
        cd.cliques.len()
    ))
}

fn cmd_pipeline(common: &CommonArgs) -> Result<String> {
    let config = run_config(common)?;
    let out = run_pipeline(&config, &common.out_dir)?;
    let mut lines = vec![format!("{:<10} {:<8} {:>9}  95% CI", "model", "site", "mean TDCI")];
    for r in &out.results {
        lines.push(format!(
            "{:<10} {:<8} {:>9.4}  [{:.4}, {:.4}]",
            r.model, r.site, r.mean_tdci, r.ci.lower, r.ci.upper
        ));
    }
    Ok(lines.join("\n"))
}

/// One row of a panel CSV.
fn parse_panel(
    record: &csv::StringRecord,
    cols: &[usize],
    stats: Option<&NormalizationStats>,
) -> std::result::Result<BiomarkerPanel, String> {
    let mut values = [None; Biomarker::COUNT];
    for (b, &c) in Biomarker::ALL.iter().zip(cols) {
        let field = record.get(c).unwrap_or("").trim();
        if field.is_empty() {
            let Some(s) = stats else {
                return Err(format!("{} is missing and no statistics were given", b.name()));
            };
            let j = s.index_of(b.name()).map_err(|e| e.to_string())?;
            values[b.index()] = Some(s.impute_fallback[j]);
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| format!("{} is not a number: {field:?}", b.name()))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("{} must be positive, got {v}", b.name()));
        }
        values[b.index()] = Some(v);
    }
    BiomarkerPanel::new(values).map_err(|e| e.to_string())
}

fn cmd_score(common: &CommonArgs, panels: &Path, stats: Option<&Path>, models: &[PathBuf]) -> Result<String> {
    let stats: Option<NormalizationStats> = stats.map(read_json).transpose()?;
    let loaded: Vec<ModelFile> = models.iter().map(ModelFile::read).collect::<Result<_>>()?;
    let scorers: Vec<(String, Scorer)> = loaded.into_iter().map(|m| (m.name.clone(), m.into_scorer())).collect();

    let mut reader = csv::Reader::from_path(panels)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: panels.to_path_buf(),
            column: name.to_string(),
        })
    };
    let id_col = col("patient_id")?;
    let day_col = col("followup_day")?;
    let cols: Vec<usize> = Biomarker::ALL.iter().map(|b| col(b.name())).collect::<Result<_>>()?;

    let mut header = vec!["patient_id".to_string(), "followup_day".into(), "mas".into(), "meld".into(), "albi".into()];
    header.extend(scorers.iter().map(|(n, _)| n.clone()));
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(&header)?;
    let mut errors = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let row = parse_panel(&rec, &cols, stats.as_ref()).and_then(|panel| {
            let mut fields = vec![
                rec.get(id_col).unwrap_or("").to_string(),
                rec.get(day_col).unwrap_or("").to_string(),
            ];
            let mas = match &stats {
                Some(s) => s
                    .normalize_panel(&panel)
                    .and_then(|z| mas_score(&z))
                    .map(|v| v.to_string())
                    .map_err(|e| e.to_string())?,
                None => String::new(),
            };
            fields.push(mas);
            fields.push(meld_score(&panel).map_err(|e| e.to_string())?.to_string());
            fields.push(albi_score(&panel).map_err(|e| e.to_string())?.score.to_string());
            let raw: Vec<f64> = panel.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            for (_, s) in &scorers {
                fields.push(s.risk(&fields[0], &raw).map_err(|e| e.to_string())?.to_string());
            }
            Ok(fields)
        });
        match row {
            Ok(fields) => out.write_record(&fields)?,
            Err(msg) => errors.push(format!("line {line}: {msg}")),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Data(format!(
            "{} invalid rows in {}: {}",
            errors.len(),
            panels.display(),
            errors.join("; ")
        )));
    }
    let bytes = out.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Staging::run(&common.out_dir, |s| s.write("scores.csv", &bytes))?;
    Ok(format!("scores written to {}", common.out_dir.join("scores.csv").display()))
}

pub fn execute(cli: &Cli) -> Result<String> {
    let common = &cli.common;
    match &cli.command {
        Command::Synth => cmd_synth(common),
        Command::Cohort => cmd_cohort(common),
        Command::Fit => cmd_fit(common),
        Command::Score {
            panels,
            stats,
            models,
        } => cmd_score(common, panels, stats.as_deref(), models),
        Command::Eval { models_dir } => cmd_eval(common, models_dir.as_deref()),
        Command::Compare { input, alpha } => cmd_compare(common, input.as_deref(), *alpha),
        Command::Pipeline => cmd_pipeline(common),
    }
}

/// Parses arguments, runs the command, prints the outcome, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.common.threads {
        Some(0) => Err(Error::config("threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
