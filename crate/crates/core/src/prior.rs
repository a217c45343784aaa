//! The Gibbs task prior `μ_K(G) ∝ exp(Tr(GK)/T)` over binary `N x N` graphs.
//!
//! The energy is linear in the entries of `G`, so the measure factorizes into
//! independent Bernoulli edges with `P(G_ij = 1) = σ(K_ij / T)`. Everything
//! here follows from that: the partition function is never formed.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelMatrix;

pub const DEFAULT_TEMPERATURE: f64 = 0.01;

/// Largest `N` accepted by [`TaskPrior::enumerate_measure`] (`2^16` graphs).
pub const MAX_ENUMERATED_N: usize = 4;

/// Largest labeling table built by [`TaskPrior::restricted_measure`].
pub const MAX_LABELINGS: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("edge ({i}, {j}) out of range for N = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("pair probability needs two distinct edges; use edge_probability for ({0}, {1})")]
    SameEdge(usize, usize),
    #[error("prior has N = {prior} but model kernel has N = {model}")]
    ShapeMismatch { prior: usize, model: usize },
    #[error("exact enumeration too large: {0}")]
    TooLarge(String),
    #[error("class count must be at least 1")]
    InvalidClassCount,
}

/// Logistic function evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPrior {
    kernel: KernelMatrix,
    temperature: f64,
}

/// Closed-form moments of `Tr(MG)` under the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
    pub temperature: f64,
    pub include_diagonal: bool,
    /// `mean / N`
    pub mean_per_n: f64,
    /// `mean / N²`
    pub mean_per_n2: f64,
}

impl TaskPrior {
    pub fn new(kernel: KernelMatrix, temperature: f64) -> Result<Self, PriorError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(PriorError::InvalidTemperature(temperature));
        }
        Ok(Self {
            kernel,
            temperature,
        })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    /// Same kernel with a PSD factor attached (see [`crate::kernel::factorize`]).
    pub fn with_factor(self) -> Self {
        Self {
            kernel: self.kernel.with_factor(),
            temperature: self.temperature,
        }
    }

    fn check_index(&self, i: usize, j: usize) -> Result<(), PriorError> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(PriorError::IndexOutOfRange { i, j, n });
        }
        Ok(())
    }

    /// `P(G_ij = 1) = σ(K_ij / T)`.
    pub fn edge_probability(&self, i: usize, j: usize) -> Result<f64, PriorError> {
        self.check_index(i, j)?;
        Ok(sigmoid(self.kernel.data()[(i, j)] / self.temperature))
    }

    /// Joint probability of two distinct edges, which are independent.
    pub fn pair_probability(
        &self,
        (i, j): (usize, usize),
        (l, k): (usize, usize),
    ) -> Result<f64, PriorError> {
        self.check_index(i, j)?;
        self.check_index(l, k)?;
        if (i, j) == (l, k) {
            return Err(PriorError::SameEdge(i, j));
        }
        Ok(self.edge_probability(i, j)? * self.edge_probability(l, k)?)
    }

    fn check_model(&self, m: &KernelMatrix) -> Result<(), PriorError> {
        if m.n() != self.n() {
            return Err(PriorError::ShapeMismatch {
                prior: self.n(),
                model: m.n(),
            });
        }
        Ok(())
    }

    /// Row-parallel reduction of `f(M_ij, K_ij / T)`; rows are summed in order
    /// so the result does not depend on thread count.
    fn reduce(&self, m: &DMatrix<f64>, include_diagonal: bool, f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let k = self.kernel.data();
        let n = self.n();
        let inv_t = 1.0 / self.temperature;
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    if include_diagonal || i != j {
                        acc += f(m[(i, j)], k[(i, j)] * inv_t);
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }

    /// `E[Tr(MG)] = Σ M_ij σ(K_ij/T)`, in `O(N²)`.
    pub fn expected_trace(&self, m: &KernelMatrix, include_diagonal: bool) -> Result<f64, PriorError> {
        self.check_model(m)?;
        Ok(self.reduce(m.data(), include_diagonal, |mij, x| mij * sigmoid(x)))
    }

    /// `Var[Tr(MG)] = Σ M_ij² σ(K_ij/T)(1 - σ(K_ij/T))`.
    pub fn trace_variance(&self, m: &KernelMatrix, include_diagonal: bool) -> Result<f64, PriorError> {
        self.check_model(m)?;
        // σ(x)σ(-x) keeps the complement exact where 1 - σ(x) would cancel.
        Ok(self.reduce(m.data(), include_diagonal, |mij, x| {
            mij * mij * sigmoid(x) * sigmoid(-x)
        }))
    }

    pub fn task_stats(&self, m: &KernelMatrix, include_diagonal: bool) -> Result<TaskStats, PriorError> {
        let mean = self.expected_trace(m, include_diagonal)?;
        let variance = self.trace_variance(m, include_diagonal)?;
        let n = self.n();
        Ok(TaskStats {
            mean,
            variance,
            n,
            temperature: self.temperature,
            include_diagonal,
            mean_per_n: mean / n as f64,
            mean_per_n2: mean / (n * n) as f64,
        })
    }

    /// Exact probabilities of all `2^(N²)` graphs, for `N <= 4`.
    pub fn enumerate_measure(&self) -> Result<GraphDistribution, PriorError> {
        let n = self.n();
        if n > MAX_ENUMERATED_N {
            return Err(PriorError::TooLarge(format!(
                "2^{} graphs for N = {n} (limit N = {MAX_ENUMERATED_N})",
                n * n
            )));
        }
        let k = self.kernel.data();
        let cells = n * n;
        let log_weights: Vec<f64> = (0..1usize << cells)
            .map(|g| {
                // Tr(GK) = Σ_i Σ_j G_ij K_ji
                let mut tr = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if g >> (i * n + j) & 1 == 1 {
                            tr += k[(j, i)];
                        }
                    }
                }
                tr / self.temperature
            })
            .collect();
        Ok(GraphDistribution {
            n,
            probs: normalize_log_weights(&log_weights),
        })
    }

    /// Exact measure restricted to graphs `G = YYᵀ` of `q`-class labelings.
    pub fn restricted_measure(&self, q: usize) -> Result<LabelingDistribution, PriorError> {
        if q == 0 {
            return Err(PriorError::InvalidClassCount);
        }
        let n = self.n();
        let states = (q as u64)
            .checked_pow(n as u32)
            .filter(|&s| s <= MAX_LABELINGS)
            .ok_or_else(|| PriorError::TooLarge(format!("{q}^{n} labelings exceeds 2^20")))?;
        let k = self.kernel.data();
        let mut labels = vec![0usize; n];
        let log_weights: Vec<f64> = (0..states)
            .map(|idx| {
                decode_labeling(idx, q, &mut labels);
                let mut tr = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if labels[i] == labels[j] {
                            tr += k[(i, j)];
                        }
                    }
                }
                tr / self.temperature
            })
            .collect();
        Ok(LabelingDistribution {
            n,
            q,
            probs: normalize_log_weights(&log_weights),
        })
    }
}

pub(crate) fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Labeling with index `idx` in base `q`, sample 0 as the least significant digit.
pub fn decode_labeling(mut idx: u64, q: usize, out: &mut [usize]) {
    for slot in out.iter_mut() {
        *slot = (idx % q as u64) as usize;
        idx /= q as u64;
    }
}

pub fn encode_labeling(labels: &[usize], q: usize) -> u64 {
    labels
        .iter()
        .rev()
        .fold(0u64, |acc, &l| acc * q as u64 + l as u64)
}

/// Exact table over all binary `N x N` graphs; graph `g` has `G_ij` at bit
/// `i * N + j`.
#[derive(Debug, Clone)]
pub struct GraphDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl GraphDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn edge(&self, graph: usize, i: usize, j: usize) -> bool {
        graph >> (i * self.n + j) & 1 == 1
    }

    pub fn marginal(&self, i: usize, j: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(g, _)| self.edge(*g, i, j))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn joint(&self, (i, j): (usize, usize), (l, k): (usize, usize)) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(g, _)| self.edge(*g, i, j) && self.edge(*g, l, k))
            .map(|(_, p)| p)
            .sum()
    }

    /// Exact mean and variance of `Tr(MG) = Σ_i Σ_j M_ij G_ji`.
    pub fn trace_moments(&self, m: &DMatrix<f64>, include_diagonal: bool) -> (f64, f64) {
        let n = self.n;
        let (mut s1, mut s2) = (0.0, 0.0);
        for (g, p) in self.probs.iter().enumerate() {
            let mut tr = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if (include_diagonal || i != j) && self.edge(g, j, i) {
                        tr += m[(i, j)];
                    }
                }
            }
            s1 += p * tr;
            s2 += p * tr * tr;
        }
        (s1, s2 - s1 * s1)
    }
}

/// Exact table over the `q^N` labelings (see [`decode_labeling`]).
#[derive(Debug, Clone)]
pub struct LabelingDistribution {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

impl LabelingDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, labels: &[usize]) -> f64 {
        self.probs[encode_labeling(labels, self.q) as usize]
    }

    pub fn labels(&self, idx: u64) -> Vec<usize> {
        let mut out = vec![0; self.n];
        decode_labeling(idx, self.q, &mut out);
        out
    }
}

/// Total-variation distance `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
