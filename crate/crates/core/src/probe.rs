//! Least-squares linear probes.
//!
//! For features `F` (`N x D`, samples as rows) and targets `Y` (`N x C`), the
//! probe `ŷ_n = W f_n + b` minimizing `(1/N) ‖F Wᵀ + 1 bᵀ - Y‖²_F` has optimal
//! loss
//!
//! ```text
//! L* = (1/N) ‖H Y‖²_F - (1/N) Tr(Vᵀ Y Yᵀ V)
//! ```
//!
//! where `H = I - 11ᵀ/N` and `V` holds the left singular vectors of the
//! centered features `H F` (the sample-side singular vectors). The loss thus
//! depends on the labels only through the graph `G = YYᵀ`, and on the
//! features only through `K = VVᵀ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_io::FeatureMatrix;
use crate::kernel::center_columns;
use crate::linalg::thin_svd;
use crate::prior::TaskPrior;
use crate::rng::{derive_seed, domain, stream};
use crate::sampler::{one_hot, prefix_sample, Labeling, SamplerError};

/// Singular values `<= SVD_CUTOFF * σ_max` are treated as zero.
pub const SVD_CUTOFF: f64 = 1e-10;

pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("features have {features} rows but targets have {targets}")]
    ShapeMismatch { features: usize, targets: usize },
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidSplit(f64),
    #[error("degenerate task: {0}")]
    DegenerateTask(String),
    #[error("number of tasks must be at least 1")]
    InvalidTaskCount,
    #[error("every sampled task was degenerate")]
    NoValidTasks,
    #[error("singular value decomposition did not converge")]
    NoConvergence,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSolution {
    /// `C x D`
    pub weights: DMatrix<f64>,
    /// length `C`
    pub bias: DVector<f64>,
    pub train_loss: f64,
    pub rank_used: usize,
}

impl ProbeSolution {
    /// `W f + b` for one feature row.
    pub fn scores(&self, row: &[f64]) -> DVector<f64> {
        &self.weights * DVector::from_column_slice(row) + &self.bias
    }

    /// Highest-scoring class; ties go to the lowest index.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(self.scores(row).as_slice())
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean squared error `(1/N) ‖F Wᵀ + 1 bᵀ - Y‖²_F` of a given probe.
pub fn probe_loss(features: &DMatrix<f64>, targets: &DMatrix<f64>, weights: &DMatrix<f64>, bias: &DVector<f64>) -> f64 {
    let n = features.nrows();
    let mut pred = features * weights.transpose();
    for mut row in pred.row_iter_mut() {
        row += bias.transpose();
    }
    (pred - targets).norm_squared() / n as f64
}

type Svd = (DMatrix<f64>, Vec<f64>, DMatrix<f64>);

/// Truncated SVD of the centered features: returns `(U_r, σ_r, V_rᵀ)` with
/// `H F ≈ U_r diag(σ_r) V_rᵀ`.
fn centered_svd(features: &DMatrix<f64>) -> Result<Svd, ProbeError> {
    let (u, s, v_t) = thin_svd(&center_columns(features)).ok_or(ProbeError::NoConvergence)?;
    let sigma_max = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().take_while(|&&x| sigma_max > 0.0 && x > SVD_CUTOFF * sigma_max).count();
    Ok((u.columns(0, rank).into_owned(), s[..rank].to_vec(), v_t.rows(0, rank).into_owned()))
}

fn check_rows(features: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<(), ProbeError> {
    if features.nrows() != targets.nrows() {
        return Err(ProbeError::ShapeMismatch {
            features: features.nrows(),
            targets: targets.nrows(),
        });
    }
    Ok(())
}

/// Optimal probe loss computed from the SVD alone, without forming `W`.
pub fn closed_form_probe_loss(features: &FeatureMatrix, targets: &DMatrix<f64>) -> Result<f64, ProbeError> {
    closed_form_loss_matrix(features.data(), targets)
}

pub fn closed_form_loss_matrix(features: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<f64, ProbeError> {
    check_rows(features, targets)?;
    let n = features.nrows() as f64;
    let (v, _, _) = centered_svd(features)?;
    let yh = center_columns(targets);
    let projected = v.transpose() * targets;
    Ok((yh.norm_squared() - projected.norm_squared()) / n)
}

/// Explicit optimal `(W, b)`, using the pseudo-inverse when the centered
/// feature covariance is singular.
pub fn fit_probe(features: &FeatureMatrix, targets: &DMatrix<f64>) -> Result<ProbeSolution, ProbeError> {
    fit_probe_matrix(features.data(), targets)
}

pub fn fit_probe_matrix(features: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<ProbeSolution, ProbeError> {
    check_rows(features, targets)?;
    let n = features.nrows() as f64;
    let (u, sigma, v_t) = centered_svd(features)?;
    // W = (HY)ᵀ U S⁻¹ Vᵀ, i.e. Yᵀ H F (Fᵀ H F)⁺ written through the SVD.
    let yh = center_columns(targets);
    let mut proj = yh.transpose() * &u;
    for (mut col, s) in proj.column_iter_mut().zip(&sigma) {
        col /= *s;
    }
    let weights = proj * v_t;
    let y_mean = targets.row_sum().transpose() / n;
    let f_mean = features.row_sum().transpose() / n;
    let bias = y_mean - &weights * f_mean;
    let train_loss = probe_loss(features, targets, &weights, &bias);
    Ok(ProbeSolution {
        weights,
        bias,
        train_loss,
        rank_used: sigma.len(),
    })
}

/// Stratified train/held-out split: within each class, a seeded shuffle and
/// `round(split * count)` samples go to train. The shuffle of a class is keyed
/// by its first row, so renaming classes does not change the split. Returns
/// `(train, test)` row indices in ascending order.
pub fn stratified_split(labels: &[usize], q: usize, split: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ProbeError> {
    use rand::seq::SliceRandom;

    if !(split > 0.0 && split < 1.0) {
        return Err(ProbeError::InvalidSplit(split));
    }
    let mut by_class = vec![Vec::new(); q];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let key = members[0] as u64;
        members.shuffle(&mut stream(seed, domain::TASK_SPLIT, key));
        let n_train = (split * members.len() as f64).round() as usize;
        if n_train == 0 {
            return Err(ProbeError::DegenerateTask(format!(
                "class {c} has {} sample(s) and none land in the train split",
                members.len()
            )));
        }
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if test.is_empty() {
        return Err(ProbeError::DegenerateTask("held-out split is empty".into()));
    }
    if train.len() < 2 {
        return Err(ProbeError::DegenerateTask("fewer than two training samples".into()));
    }
    Ok((train, test))
}

/// Held-out accuracy of a least-squares probe trained on a stratified split.
pub fn probe_accuracy(features: &FeatureMatrix, labeling: &Labeling, split: f64, seed: u64) -> Result<f64, ProbeError> {
    let data = features.data();
    if labeling.len() != data.nrows() {
        return Err(ProbeError::ShapeMismatch {
            features: data.nrows(),
            targets: labeling.len(),
        });
    }
    let (train, test) = stratified_split(&labeling.labels, labeling.q, split, seed)?;
    let x_train = data.select_rows(train.iter());
    let y_train = one_hot(
        &train.iter().map(|&i| labeling.labels[i]).collect::<Vec<_>>(),
        labeling.q,
    );
    let probe = fit_probe_matrix(&x_train, &y_train)?;
    let correct = test
        .iter()
        .filter(|&&i| {
            let row: Vec<f64> = data.row(i).iter().cloned().collect();
            probe.predict(&row) == labeling.labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Probe accuracies over many tasks drawn from one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Accuracies of the non-degenerate tasks, in task order.
    pub per_task_accuracy: Vec<f64>,
    /// Indices of tasks skipped as degenerate.
    pub skipped_tasks: Vec<usize>,
    pub mean_accuracy: f64,
    /// Population variance of `per_task_accuracy`.
    pub accuracy_variance: f64,
    pub n_tasks: usize,
    pub q: usize,
    pub temperature: f64,
    pub split: f64,
    pub seed: u64,
    pub model_id: Option<String>,
    pub prior_model_id: Option<String>,
}

/// Mean and population variance.
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Draws `n_tasks` labelings with the prefix sampler and probes each.
///
/// Task `t` uses seeds derived from `(seed, t)`, so the report does not
/// depend on how tasks are scheduled across threads.
pub fn evaluate_over_tasks(
    features: &FeatureMatrix,
    prior: &TaskPrior,
    q: usize,
    n_tasks: usize,
    split: f64,
    seed: u64,
) -> Result<ProbeReport, ProbeError> {
    if n_tasks == 0 {
        return Err(ProbeError::InvalidTaskCount);
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(ProbeError::InvalidSplit(split));
    }
    if prior.n() != features.n_samples() {
        return Err(ProbeError::ShapeMismatch {
            features: features.n_samples(),
            targets: prior.n(),
        });
    }
    let outcomes: Vec<Result<f64, ProbeError>> = (0..n_tasks)
        .into_par_iter()
        .map(|t| {
            let label_seed = derive_seed(seed, domain::TASK_LABELS, t as u64);
            let split_seed = derive_seed(seed, domain::TASK_SPLIT, t as u64);
            let labeling = prefix_sample(prior, q, label_seed, false)?;
            probe_accuracy(features, &labeling, split, split_seed)
        })
        .collect();

    let mut per_task_accuracy = Vec::new();
    let mut skipped_tasks = Vec::new();
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(acc) => per_task_accuracy.push(acc),
            Err(ProbeError::DegenerateTask(_)) => skipped_tasks.push(t),
            Err(e) => return Err(e),
        }
    }
    if per_task_accuracy.is_empty() {
        return Err(ProbeError::NoValidTasks);
    }
    let (mean_accuracy, accuracy_variance) = moments(&per_task_accuracy);
    Ok(ProbeReport {
        per_task_accuracy,
        skipped_tasks,
        mean_accuracy,
        accuracy_variance,
        n_tasks,
        q,
        temperature: prior.temperature(),
        split,
        seed,
        model_id: Some(features.model_id().to_string()),
        prior_model_id: prior.kernel().source_model_id().map(str::to_string),
    })
}
