//! Drawing tasks from the prior.
//!
//! [`prefix_sample`] labels samples one at a time, in row order, with
//! `p(y_i = c | y_<i) ∝ exp((1/T) Σ_{j<i} K_ij 1{y_j = c})`. With `K = ZZᵀ` the
//! inner sum is `Z_i · U_c`, where `U_c` is the running sum of the factor rows
//! already assigned to class `c`, so a full labeling costs `O(N r q)`.
//!
//! This is a sequential approximation of the restricted (Potts) measure, not
//! an exact sampler. [`MetropolisChain`] targets the restricted measure exactly
//! and is meant for small validation runs.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prior::{sigmoid, TaskPrior};
use crate::rng::{domain, stream};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("prior kernel has no factor; call kernel::factorize or TaskPrior::with_factor first")]
    MissingFactor,
    #[error("class count {q} is invalid (need at least {min})")]
    InvalidClassCount { q: usize, min: usize },
    #[error("factor has {rows} rows but the prior has N = {n}")]
    FactorShape { rows: usize, n: usize },
    #[error("number of MCMC steps must be at least 1")]
    InvalidSteps,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
}

/// A sampled classification task: one class id per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<usize>,
    pub q: usize,
    pub seed: u64,
    pub temperature: f64,
    pub shuffle: bool,
}

impl Labeling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `N x q` indicator matrix `Y`.
    pub fn one_hot(&self) -> DMatrix<f64> {
        one_hot(&self.labels, self.q)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.q];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Number of classes that actually occur.
    pub fn distinct_classes(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }
}

pub fn one_hot(labels: &[usize], q: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(labels.len(), q);
    for (i, &l) in labels.iter().enumerate() {
        y[(i, l)] = 1.0;
    }
    y
}

/// Binary `N x N` adjacency matrix drawn from the unrestricted prior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGraph {
    n: usize,
    entries: Vec<u8>,
}

impl LabelGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j] == 1
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entries[i * self.n + j] as f64)
    }

    /// `Tr(MG) = Σ_i Σ_j M_ij G_ji`, optionally skipping the diagonal.
    pub fn trace_with(&self, m: &DMatrix<f64>, include_diagonal: bool) -> f64 {
        let mut tr = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if (include_diagonal || i != j) && self.get(j, i) {
                    tr += m[(i, j)];
                }
            }
        }
        tr
    }

    /// Graph of a labeling, `G = YYᵀ`.
    pub fn from_labels(labels: &[usize]) -> Self {
        let n = labels.len();
        let entries = (0..n * n)
            .map(|idx| u8::from(labels[idx / n] == labels[idx % n]))
            .collect();
        Self { n, entries }
    }
}

/// Inverse-CDF draw from a normalized probability vector.
pub fn categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, &pc) in p.iter().enumerate() {
        acc += pc;
        if u < acc {
            return c;
        }
    }
    // u landed in the rounding gap above the last partial sum.
    p.iter().rposition(|&pc| pc > 0.0).unwrap_or(0)
}

/// Class-wise prefix sums `U`: column `c` is the sum of factor rows assigned
/// to class `c` so far.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixState {
    rank: usize,
    q: usize,
    sums: Vec<f64>,
}

impl PrefixState {
    fn new(rank: usize, q: usize) -> Self {
        Self {
            rank,
            q,
            sums: vec![0.0; rank * q],
        }
    }

    pub fn class_sum(&self, c: usize) -> &[f64] {
        &self.sums[c * self.rank..(c + 1) * self.rank]
    }

    /// `U` as an `r x q` matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rank, self.q, &self.sums)
    }
}

/// Step-by-step prefix sampler. Exposes the conditional distribution before
/// each assignment, which is what [`prefix_sample`] draws from.
#[derive(Debug, Clone)]
pub struct PrefixSampler {
    rows: Vec<f64>,
    rank: usize,
    inv_t: f64,
    state: PrefixState,
    next: usize,
    n: usize,
}

impl PrefixSampler {
    pub fn new(factor: &DMatrix<f64>, temperature: f64, q: usize) -> Result<Self, SamplerError> {
        if q == 0 {
            return Err(SamplerError::InvalidClassCount { q, min: 1 });
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(SamplerError::InvalidTemperature(temperature));
        }
        let (n, rank) = factor.shape();
        let mut rows = Vec::with_capacity(n * rank);
        for i in 0..n {
            rows.extend(factor.row(i).iter());
        }
        Ok(Self {
            rows,
            rank,
            inv_t: 1.0 / temperature,
            state: PrefixState::new(rank, q),
            next: 0,
            n,
        })
    }

    /// Index of the sample that will be labeled next.
    pub fn position(&self) -> usize {
        self.next
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.n
    }

    pub fn state(&self) -> &PrefixState {
        &self.state
    }

    /// `softmax((1/T) Z_i U)` for the next sample `i`.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.state.q];
        self.fill_probabilities(&mut p);
        p
    }

    fn fill_probabilities(&self, p: &mut [f64]) {
        let z = &self.rows[self.next * self.rank..(self.next + 1) * self.rank];
        for (c, slot) in p.iter_mut().enumerate() {
            let u = self.state.class_sum(c);
            *slot = self.inv_t * z.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        }
        let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for slot in p.iter_mut() {
            *slot = (*slot - max).exp();
            total += *slot;
        }
        for slot in p.iter_mut() {
            *slot /= total;
        }
    }

    /// Assigns class `c` to the next sample and updates `U[:, c] += Z_i`.
    pub fn assign(&mut self, c: usize) {
        assert!(c < self.state.q, "class {c} out of range");
        assert!(!self.is_done(), "all samples already labeled");
        let i = self.next;
        let z = &self.rows[i * self.rank..(i + 1) * self.rank];
        let u = &mut self.state.sums[c * self.rank..(c + 1) * self.rank];
        for (acc, v) in u.iter_mut().zip(z) {
            *acc += v;
        }
        self.next += 1;
    }

    /// Draws the next label by inverse CDF at `u ∈ [0, 1)` and assigns it.
    pub fn step(&mut self, u: f64, scratch: &mut Vec<f64>) -> usize {
        scratch.resize(self.state.q, 0.0);
        self.fill_probabilities(scratch);
        let c = categorical(scratch, u);
        self.assign(c);
        c
    }
}

/// Uniform variate for sample `index`; every index has its own stream.
fn prefix_uniform(seed: u64, index: usize) -> f64 {
    stream(seed, domain::PREFIX, index as u64).random::<f64>()
}

/// Prefix sampler on an explicit factor, in row order.
pub fn prefix_sample_factor(
    factor: &DMatrix<f64>,
    temperature: f64,
    q: usize,
    seed: u64,
) -> Result<Vec<usize>, SamplerError> {
    let mut sampler = PrefixSampler::new(factor, temperature, q)?;
    let mut scratch = Vec::with_capacity(q);
    let mut labels = Vec::with_capacity(factor.nrows());
    while !sampler.is_done() {
        let u = prefix_uniform(seed, sampler.position());
        labels.push(sampler.step(u, &mut scratch));
    }
    Ok(labels)
}

/// Seeded permutation used by the `shuffle` option.
pub fn shuffle_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, domain::SHUFFLE, 0));
    perm
}

/// Draws a `q`-class labeling with the prefix sampler.
///
/// With `shuffle`, samples are visited in a seeded random order and the
/// labels are mapped back to row order.
pub fn prefix_sample(
    prior: &TaskPrior,
    q: usize,
    seed: u64,
    shuffle: bool,
) -> Result<Labeling, SamplerError> {
    let factor = prior.kernel().factor().ok_or(SamplerError::MissingFactor)?;
    if factor.nrows() != prior.n() {
        return Err(SamplerError::FactorShape {
            rows: factor.nrows(),
            n: prior.n(),
        });
    }
    let temperature = prior.temperature();
    let labels = if shuffle {
        let perm = shuffle_permutation(prior.n(), seed);
        let permuted = factor.select_rows(perm.iter());
        let visited = prefix_sample_factor(&permuted, temperature, q, seed)?;
        let mut labels = vec![0; prior.n()];
        for (pos, &row) in perm.iter().enumerate() {
            labels[row] = visited[pos];
        }
        labels
    } else {
        prefix_sample_factor(factor, temperature, q, seed)?
    };
    Ok(Labeling {
        labels,
        q,
        seed,
        temperature,
        shuffle,
    })
}

/// Rows above this size are drawn in parallel.
const PARALLEL_ROWS: usize = 256;

/// One draw from the unrestricted prior: each entry independently 1 with
/// probability `σ(K_ij/T)`. Row `i` uses its own random stream.
pub fn bernoulli_graph_sample(prior: &TaskPrior, seed: u64) -> LabelGraph {
    let n = prior.n();
    let k = prior.kernel().data();
    let inv_t = 1.0 / prior.temperature();
    let row = |i: usize| -> Vec<u8> {
        let mut rng = stream(seed, domain::GRAPH, i as u64);
        (0..n)
            .map(|j| u8::from(rng.random::<f64>() < sigmoid(k[(i, j)] * inv_t)))
            .collect()
    };
    let rows: Vec<Vec<u8>> = if n >= PARALLEL_ROWS {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    LabelGraph {
        n,
        entries: rows.concat(),
    }
}

/// Single-site Metropolis–Hastings on labelings with target
/// `∝ exp(Tr(YYᵀK)/T)`: pick a site uniformly, propose a uniform label,
/// accept with `min(1, exp(ΔTr/T))`.
#[derive(Debug, Clone)]
pub struct MetropolisChain<'a> {
    kernel: &'a DMatrix<f64>,
    inv_t: f64,
    q: usize,
    labels: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<'a> MetropolisChain<'a> {
    /// Starts from a uniformly random labeling.
    pub fn new(prior: &'a TaskPrior, q: usize, seed: u64) -> Result<Self, SamplerError> {
        if q < 2 {
            return Err(SamplerError::InvalidClassCount { q, min: 2 });
        }
        let mut rng = stream(seed, domain::MCMC, 0);
        let labels = (0..prior.n()).map(|_| rng.random_range(0..q)).collect();
        Ok(Self {
            kernel: prior.kernel().data(),
            inv_t: 1.0 / prior.temperature(),
            q,
            labels,
            rng,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Change of `Tr(YYᵀK)` when `site` moves to `label`, in `O(N)`.
    pub fn energy_delta(&self, site: usize, label: usize) -> f64 {
        let old = self.labels[site];
        if old == label {
            return 0.0;
        }
        let mut delta = 0.0;
        for (j, &lj) in self.labels.iter().enumerate() {
            if j == site {
                continue;
            }
            let w = self.kernel[(site, j)] + self.kernel[(j, site)];
            if lj == label {
                delta += w;
            } else if lj == old {
                delta -= w;
            }
        }
        delta
    }

    /// Metropolis decision for a given proposal and uniform `u`. Returns
    /// whether the proposal was accepted.
    pub fn try_move(&mut self, site: usize, label: usize, u: f64) -> bool {
        let delta = self.energy_delta(site, label) * self.inv_t;
        let accept = delta >= 0.0 || u < delta.exp();
        if accept {
            self.labels[site] = label;
        }
        accept
    }

    pub fn step(&mut self) -> bool {
        let site = self.rng.random_range(0..self.labels.len());
        let label = self.rng.random_range(0..self.q);
        let u = self.rng.random::<f64>();
        self.try_move(site, label, u)
    }
}

pub fn mcmc_sample(
    prior: &TaskPrior,
    q: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Labeling, SamplerError> {
    if n_steps == 0 {
        return Err(SamplerError::InvalidSteps);
    }
    let mut chain = MetropolisChain::new(prior, q, seed)?;
    for _ in 0..n_steps {
        chain.step();
    }
    Ok(Labeling {
        labels: chain.labels,
        q,
        seed,
        temperature: prior.temperature(),
        shuffle: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{precomputed_kernel, KernelKind, KernelMatrix};
    use crate::prior::{encode_labeling, total_variation};

    fn random_factor(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream(seed, 99, 0);
        DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn categorical_inverse_cdf() {
        let p = [0.2, 0.0, 0.5, 0.3];
        assert_eq!(categorical(&p, 0.0), 0);
        assert_eq!(categorical(&p, 0.19999), 0);
        assert_eq!(categorical(&p, 0.2), 2);
        assert_eq!(categorical(&p, 0.71), 3);
        assert_eq!(categorical(&[0.5, 0.5 - 1e-17, 0.0], 0.999_999_999_999_999_9), 1);
    }

    #[test]
    fn first_point_is_uniform() {
        let z = random_factor(5, 3, 1);
        let s = PrefixSampler::new(&z, 0.1, 4).unwrap();
        assert_eq!(s.probabilities(), vec![0.25; 4]);
    }

    #[test]
    fn single_class_labels_everything_zero() {
        let z = random_factor(20, 3, 2);
        assert_eq!(prefix_sample_factor(&z, 1e-3, 1, 5).unwrap(), vec![0; 20]);
    }

    #[test]
    fn invalid_inputs() {
        let z = random_factor(3, 2, 3);
        assert_eq!(
            prefix_sample_factor(&z, 1.0, 0, 0),
            Err(SamplerError::InvalidClassCount { q: 0, min: 1 })
        );
        let k = precomputed_kernel(DMatrix::identity(3, 3), false).unwrap();
        let prior = TaskPrior::new(k, 1.0).unwrap();
        assert_eq!(prefix_sample(&prior, 2, 0, false), Err(SamplerError::MissingFactor));
        assert!(prefix_sample(&prior.clone().with_factor(), 2, 0, false).is_ok());
        assert_eq!(
            MetropolisChain::new(&prior, 1, 0).err(),
            Some(SamplerError::InvalidClassCount { q: 1, min: 2 })
        );
        assert_eq!(mcmc_sample(&prior, 2, 0, 0), Err(SamplerError::InvalidSteps));
    }

    #[test]
    fn prefix_state_matches_resum() {
        let z = random_factor(50, 4, 7);
        let labels = prefix_sample_factor(&z, 0.5, 3, 11).unwrap();
        let mut sampler = PrefixSampler::new(&z, 0.5, 3).unwrap();
        for &c in &labels {
            sampler.assign(c);
        }
        for c in 0..3 {
            let mut expected = vec![0.0; 4];
            for (i, &l) in labels.iter().enumerate() {
                if l == c {
                    for k in 0..4 {
                        expected[k] += z[(i, k)];
                    }
                }
            }
            for (a, b) in sampler.state().class_sum(c).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn deterministic_and_shuffle_is_a_relabeling_of_rows() {
        let z = random_factor(30, 3, 4);
        let kernel = KernelMatrix::from_factor(z, KernelKind::Linear);
        let prior = TaskPrior::new(kernel, 0.3).unwrap();
        let a = prefix_sample(&prior, 3, 9, false).unwrap();
        assert_eq!(a, prefix_sample(&prior, 3, 9, false).unwrap());
        let s = prefix_sample(&prior, 3, 9, true).unwrap();
        assert_eq!(s, prefix_sample(&prior, 3, 9, true).unwrap());
        assert!(s.shuffle);
        assert_eq!(s.labels.len(), 30);

        // Replaying the shuffled order by hand reproduces the output.
        let perm = shuffle_permutation(30, 9);
        let permuted = prior.kernel().factor().unwrap().select_rows(perm.iter());
        let visited = prefix_sample_factor(&permuted, 0.3, 3, 9).unwrap();
        for (pos, &row) in perm.iter().enumerate() {
            assert_eq!(s.labels[row], visited[pos]);
        }
    }

    #[test]
    fn two_point_same_label_probability() {
        // K = [[1, .9], [.9, 1]], T = 0.1: P(y1 = y0) = e^9 / (e^9 + 1).
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let z = crate::kernel::psd_factor(&k);
        let trials = 100_000u64;
        let same = (0..trials)
            .filter(|&s| {
                let l = prefix_sample_factor(&z, 0.1, 2, s).unwrap();
                l[0] == l[1]
            })
            .count() as f64;
        let p = 9f64.exp() / (9f64.exp() + 1.0);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = same / trials as f64;
        // With p ≈ 0.99988 the SE is tiny; allow the 3-SE band plus one count.
        assert!((freq - p).abs() <= 3.0 * se + 1.0 / trials as f64, "{freq} vs {p}");
    }

    #[test]
    fn bernoulli_graph_saturates_and_is_deterministic() {
        let k = precomputed_kernel(DMatrix::from_element(6, 6, 1.0), false).unwrap();
        let prior = TaskPrior::new(k, 1e-6).unwrap();
        for seed in 0..100 {
            let g = bernoulli_graph_sample(&prior, seed);
            assert!((0..6).all(|i| (0..6).all(|j| g.get(i, j))));
        }
        let k = precomputed_kernel(DMatrix::from_fn(5, 5, |i, j| (i + j) as f64 * 0.1 - 0.4), false).unwrap();
        let prior = TaskPrior::new(k, 0.5).unwrap();
        assert_eq!(bernoulli_graph_sample(&prior, 3), bernoulli_graph_sample(&prior, 3));
        assert_ne!(bernoulli_graph_sample(&prior, 3), bernoulli_graph_sample(&prior, 4));
    }

    #[test]
    fn graph_from_labels_is_yyt() {
        let labels = [0, 2, 0, 1];
        let y = one_hot(&labels, 3);
        assert_eq!(LabelGraph::from_labels(&labels).to_matrix(), &y * y.transpose());
    }

    #[test]
    fn identical_proposal_always_accepted() {
        let k = precomputed_kernel(DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { -5.0 }), false).unwrap();
        let prior = TaskPrior::new(k, 0.01).unwrap();
        let mut chain = MetropolisChain::new(&prior, 2, 3).unwrap();
        let before = chain.labels().to_vec();
        assert!(chain.try_move(2, before[2], 0.999_999));
        assert_eq!(chain.labels(), before.as_slice());
    }

    #[test]
    fn energy_delta_matches_full_recompute() {
        let k = DMatrix::from_fn(6, 6, |i, j| ((i * 3 + j * 5) % 7) as f64 * 0.2 - 0.6);
        let k = (&k + k.transpose()) * 0.5;
        let prior = TaskPrior::new(precomputed_kernel(k.clone(), false).unwrap(), 1.0).unwrap();
        let mut chain = MetropolisChain::new(&prior, 3, 8).unwrap();
        let energy = |l: &[usize]| -> f64 {
            let mut e = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    if l[i] == l[j] {
                        e += k[(i, j)];
                    }
                }
            }
            e
        };
        for step in 0..200 {
            let site = step % 6;
            let label = (step / 6) % 3;
            let before = chain.labels().to_vec();
            let delta = chain.energy_delta(site, label);
            let mut after = before.clone();
            after[site] = label;
            assert!((delta - (energy(&after) - energy(&before))).abs() < 1e-12);
            chain.step();
        }
    }

    #[test]
    fn zero_kernel_chain_is_uniform() {
        let k = precomputed_kernel(DMatrix::zeros(3, 3), false).unwrap();
        let prior = TaskPrior::new(k, 1.0).unwrap();
        let mut chain = MetropolisChain::new(&prior, 3, 1).unwrap();
        let steps = 540_000;
        let thin = 20;
        let mut hist = [0usize; 27];
        let mut accepted = 0;
        for step in 0..steps {
            accepted += usize::from(chain.step());
            if step % thin == 0 {
                hist[encode_labeling(chain.labels(), 3) as usize] += 1;
            }
        }
        assert_eq!(accepted, steps);
        let draws = (steps / thin) as f64;
        let expected = draws / 27.0;
        let chi2: f64 = hist.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
        // 26 degrees of freedom, upper 1% point ≈ 45.64.
        assert!(chi2 < 45.64, "chi2 {chi2}");
        let uniform = vec![1.0 / 27.0; 27];
        let emp: Vec<f64> = hist.iter().map(|&h| h as f64 / draws).collect();
        assert!(total_variation(&emp, &uniform) < 0.02);
    }
}
