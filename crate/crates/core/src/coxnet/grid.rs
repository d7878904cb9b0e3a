use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_data, FitConfig};
use super::likelihood::CoxData;
use super::{BreslowBaseline, CoxModel, FeatureSpace, COX_FORMAT_VERSION};
use crate::cohort::IntervalRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: FitConfig,
    pub metric: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridSearch {
    pub best_config: FitConfig,
    pub model: CoxModel,
    pub entries: Vec<GridEntry>,
}

/// True when `a` should be preferred over `b` at equal metric.
fn simpler(a: &FitConfig, b: &FitConfig) -> bool {
    (a.penalizer, a.l1_ratio) < (b.penalizer, b.l1_ratio)
}

/// Fits every configuration on `train` and keeps the one scoring highest on `val`.
///
/// Equal scores go to the smaller penalizer, then the smaller L1 ratio.
/// Fits run in parallel; the result does not depend on thread count.
pub fn grid_search<V, F>(
    train: &[IntervalRow],
    val: &V,
    grid: &[FitConfig],
    features: &FeatureSpace,
    metric: F,
) -> Result<GridSearch>
where
    V: Sync + ?Sized,
    F: Fn(&CoxModel, &V) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::config("grid", "must contain at least one configuration"));
    }
    let data = CoxData::new(train)?;
    if features.names.len() != data.p {
        return Err(Error::Data(format!(
            "{} feature names for {} covariates",
            features.names.len(),
            data.p
        )));
    }

    let results: Vec<(GridEntry, Option<CoxModel>)> = grid
        .par_iter()
        .map(|config| {
            let fitted = fit_data(&data, config).and_then(|(beta, diagnostics)| {
                let model = CoxModel {
                    format_version: COX_FORMAT_VERSION,
                    feature_names: features.names.clone(),
                    baseline: BreslowBaseline::from_data(&data, &beta),
                    coefficients: beta,
                    normalization: features.normalization.clone(),
                    config: *config,
                    diagnostics,
                };
                let score = metric(&model, val)?;
                if !score.is_finite() {
                    return Err(Error::Numerical(format!("metric evaluated to {score}")));
                }
                Ok((model, score))
            });
            match fitted {
                Ok((model, score)) => (
                    GridEntry {
                        config: *config,
                        metric: Some(score),
                        error: None,
                    },
                    Some(model),
                ),
                Err(e) => (
                    GridEntry {
                        config: *config,
                        metric: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for (k, (entry, _)) in results.iter().enumerate() {
        let Some(score) = entry.metric else { continue };
        let better = match best {
            None => true,
            Some((b, bk)) => {
                score > b || (score == b && simpler(&entry.config, &results[bk].0.config))
            }
        };
        if better {
            best = Some((score, k));
        }
    }
    let entries: Vec<GridEntry> = results.iter().map(|(e, _)| e.clone()).collect();
    let Some((_, k)) = best else {
        let msg = entries
            .iter()
            .map(|e| {
                format!(
                    "(λ={}, α={}): {}",
                    e.config.penalizer,
                    e.config.l1_ratio,
                    e.error.as_deref().unwrap_or("unknown")
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::GridFailed(msg));
    };
    let model = results
        .into_iter()
        .nth(k)
        .and_then(|(_, m)| m)
        .expect("best entry has a model");
    Ok(GridSearch {
        best_config: entries[k].config,
        model,
        entries,
    })
}
