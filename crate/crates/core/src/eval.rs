//! Comparing a zoo of models against one prior.
//!
//! For every model the closed-form alignment statistics and the sampled-task
//! probe accuracies are computed against the same prior, then correlated
//! across models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::{DataError, DatasetManifest, FeatureMatrix};
use crate::kernel::{centered_cosine_kernel, KernelError};
use crate::prior::{PriorError, TaskPrior, TaskStats};
use crate::probe::{evaluate_over_tasks, ProbeError, ProbeReport};

/// Two-sided 95% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prior model {0:?} is not in the manifest")]
    MissingModel(String),
    #[error("no models to compare")]
    Empty,
    #[error("{model} has {rows} samples but the prior has {expected}")]
    SampleMismatch {
        model: String,
        rows: usize,
        expected: usize,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{model}: {source}")]
    Kernel {
        model: String,
        #[source]
        source: KernelError,
    },
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("{model}: {source}")]
    Probe {
        model: String,
        #[source]
        source: ProbeError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// 95% interval from the Fisher z-transform; absent below 4 points.
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub estimate: Option<Correlation>,
    /// Why `estimate` is missing.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub mean_vs_probe_mean: CorrelationResult,
    pub variance_vs_probe_variance: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_id: String,
    /// The prior's own model; excluded from the correlations.
    pub is_prior: bool,
    pub stats: TaskStats,
    pub stats_off_diagonal: TaskStats,
    pub probe: ProbeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prior_model_id: String,
    pub temperature: f64,
    pub q: usize,
    pub n_tasks: usize,
    pub split: f64,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
    pub correlations: Correlations,
}

impl ComparisonReport {
    /// One line per model, for plotting tools.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model_id,is_prior,mean,variance,mean_off_diagonal,variance_off_diagonal,\
             probe_mean_accuracy,probe_accuracy_variance,valid_tasks\n",
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{}\n",
                row.model_id,
                row.is_prior,
                row.stats.mean,
                row.stats.variance,
                row.stats_off_diagonal.mean,
                row.stats_off_diagonal.variance,
                row.probe.mean_accuracy,
                row.probe.accuracy_variance,
                row.probe.per_task_accuracy.len(),
            ));
        }
        out
    }
}

/// Pearson correlation with a Fisher-z 95% interval.
pub fn pearson(x: &[f64], y: &[f64]) -> CorrelationResult {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let missing = |reason: &str| CorrelationResult {
        n,
        estimate: None,
        reason: Some(reason.to_string()),
    };
    if n < 3 {
        return missing("need at least 3 models besides the prior");
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return missing("one of the inputs is constant across models");
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let ci = (n > 3).then(|| {
        let z = r.atanh();
        let half = Z_95 / ((n - 3) as f64).sqrt();
        ((z - half).tanh(), (z + half).tanh())
    });
    CorrelationResult {
        n,
        estimate: Some(Correlation { r, ci }),
        reason: None,
    }
}

/// Runs the comparison on already-loaded feature sets that share sample order.
#[allow(clippy::too_many_arguments)]
pub fn compare_feature_sets(
    models: &[FeatureMatrix],
    prior_model_id: &str,
    temperature: f64,
    q: usize,
    n_tasks: usize,
    split: f64,
    seed: u64,
) -> Result<ComparisonReport, EvalError> {
    if models.is_empty() {
        return Err(EvalError::Empty);
    }
    let prior_features = models
        .iter()
        .find(|m| m.model_id() == prior_model_id)
        .ok_or_else(|| EvalError::MissingModel(prior_model_id.to_string()))?;
    let kernel_err = |model: &str| {
        let model = model.to_string();
        move |source| EvalError::Kernel { model, source }
    };
    let prior_kernel = centered_cosine_kernel(prior_features).map_err(kernel_err(prior_model_id))?;
    let prior = TaskPrior::new(prior_kernel, temperature)?;
    for m in models {
        if m.n_samples() != prior.n() {
            return Err(EvalError::SampleMismatch {
                model: m.model_id().to_string(),
                rows: m.n_samples(),
                expected: prior.n(),
            });
        }
    }

    let rows = models
        .par_iter()
        .map(|features| -> Result<ComparisonRow, EvalError> {
            let id = features.model_id();
            let m = centered_cosine_kernel(features).map_err(kernel_err(id))?;
            let stats = prior.task_stats(&m, true)?;
            let stats_off_diagonal = prior.task_stats(&m, false)?;
            let probe = evaluate_over_tasks(features, &prior, q, n_tasks, split, seed).map_err(|source| {
                EvalError::Probe {
                    model: id.to_string(),
                    source,
                }
            })?;
            Ok(ComparisonRow {
                model_id: id.to_string(),
                is_prior: id == prior_model_id,
                stats,
                stats_off_diagonal,
                probe,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let others: Vec<&ComparisonRow> = rows.iter().filter(|r| !r.is_prior).collect();
    let pick = |f: fn(&ComparisonRow) -> f64| others.iter().map(|r| f(r)).collect::<Vec<_>>();
    let correlations = Correlations {
        mean_vs_probe_mean: pearson(&pick(|r| r.stats.mean), &pick(|r| r.probe.mean_accuracy)),
        variance_vs_probe_variance: pearson(
            &pick(|r| r.stats.variance),
            &pick(|r| r.probe.accuracy_variance),
        ),
    };

    Ok(ComparisonReport {
        prior_model_id: prior_model_id.to_string(),
        temperature,
        q,
        n_tasks,
        split,
        seed,
        rows,
        correlations,
    })
}

/// Loads every model in `manifest` and compares them against the prior built
/// from `prior_model_id`'s features.
pub fn compare_models(
    manifest: &DatasetManifest,
    prior_model_id: &str,
    temperature: f64,
    q: usize,
    n_tasks: usize,
    split: f64,
    seed: u64,
) -> Result<ComparisonReport, EvalError> {
    if !manifest.models.iter().any(|e| e.model_id == prior_model_id) {
        return Err(EvalError::MissingModel(prior_model_id.to_string()));
    }
    let models = manifest.load_all()?;
    compare_feature_sets(&models, prior_model_id, temperature, q, n_tasks, split, seed)
}
