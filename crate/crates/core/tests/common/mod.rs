//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's own numerics, so agreement between
//! the two is meaningful.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| Distribution::<f64>::sample(&StandardNormal, rng))
}

pub fn random_symmetric(n: usize, scale: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = gaussian(n, n, rng) * scale;
    (&a + a.transpose()) * 0.5
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Brute force over all `2^(N²)` graphs `G` with weight `exp(Σ_ij G_ij K_ji / T)`.
pub struct GraphOracle {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl GraphOracle {
    pub fn new(k: &DMatrix<f64>, t: f64) -> Self {
        let n = k.nrows();
        let cells = n * n;
        let logw: Vec<f64> = (0..1usize << cells)
            .map(|g| {
                let mut s = 0.0;
                for c in 0..cells {
                    if g >> c & 1 == 1 {
                        let (i, j) = (c / n, c % n);
                        s += k[(j, i)];
                    }
                }
                s / t
            })
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        Self {
            n,
            probs: w.into_iter().map(|x| x / z).collect(),
        }
    }

    fn bit(&self, g: usize, i: usize, j: usize) -> bool {
        g >> (i * self.n + j) & 1 == 1
    }

    pub fn marginal(&self, i: usize, j: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(g, _)| self.bit(*g, i, j))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn joint(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(g, _)| self.bit(*g, a.0, a.1) && self.bit(*g, b.0, b.1))
            .map(|(_, p)| p)
            .sum()
    }

    /// Mean and variance of `Tr(MG) = Σ_ij M_ji G_ij`.
    pub fn trace_moments(&self, m: &DMatrix<f64>, include_diagonal: bool) -> (f64, f64) {
        let n = self.n;
        let (mut e1, mut e2) = (0.0, 0.0);
        for (g, p) in self.probs.iter().enumerate() {
            let mut tr = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if (include_diagonal || i != j) && self.bit(g, i, j) {
                        tr += m[(j, i)];
                    }
                }
            }
            e1 += p * tr;
            e2 += p * tr * tr;
        }
        (e1, e2 - e1 * e1)
    }
}

/// Edge marginal straight from the logistic function.
pub fn edge_marginal(k: &DMatrix<f64>, t: f64, i: usize, j: usize) -> f64 {
    logistic(k[(i, j)] / t)
}

/// Least-squares probe loss by the normal equations of `[X 1]`, where `X` has
/// full column rank.
pub fn normal_equations_loss(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut a = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    a.view_mut((0, 0), (n, x.ncols())).copy_from(x);
    let gram = a.transpose() * &a;
    let chol = gram.cholesky().expect("oracle design must have full column rank");
    let beta = chol.solve(&(a.transpose() * y));
    (y - &a * beta).norm_squared() / n as f64
}

/// Exact distribution of the sequential labeling model
/// `p(y_i = c | y_<i) ∝ exp(Σ_{j<i} K_ij 1{y_j = c} / T)` over all `q^N`
/// labelings. Index encoding: sample 0 is the least significant base-`q` digit.
pub fn sequential_model(k: &DMatrix<f64>, t: f64, q: usize) -> Vec<f64> {
    let n = k.nrows();
    let total = q.pow(n as u32);
    (0..total)
        .map(|idx| {
            let labels = decode(idx, q, n);
            let mut p = 1.0;
            for i in 0..n {
                let logits: Vec<f64> = (0..q)
                    .map(|c| (0..i).filter(|&j| labels[j] == c).map(|j| k[(i, j)]).sum::<f64>() / t)
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
                p *= (logits[labels[i]] - max).exp() / z;
            }
            p
        })
        .collect()
}

/// Exact Potts measure `∝ exp(Σ_ij K_ij 1{y_i = y_j} / T)` over all labelings.
pub fn potts_measure(k: &DMatrix<f64>, t: f64, q: usize) -> Vec<f64> {
    let n = k.nrows();
    let total = q.pow(n as u32);
    let logw: Vec<f64> = (0..total)
        .map(|idx| {
            let y = decode(idx, q, n);
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if y[i] == y[j] {
                        s += k[(i, j)];
                    }
                }
            }
            s / t
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn decode(mut idx: usize, q: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let d = idx % q;
            idx /= q;
            d
        })
        .collect()
}

pub fn encode(labels: &[usize], q: usize) -> usize {
    labels.iter().rev().fold(0, |acc, &l| acc * q + l)
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn one_hot(labels: &[usize], q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), q, |i, c| f64::from(u8::from(labels[i] == c)))
}

/// Average ranks, 1-based.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Synthetic model zoo: `n` samples in `classes` latent clusters, observed by
/// each model through Gaussian noise of the given scale.
pub fn latent_ladder(n: usize, dim: usize, classes: usize, noise: &[f64], seed: u64) -> (Vec<usize>, Vec<DMatrix<f64>>) {
    let mut r = rng(seed);
    let centers = gaussian(classes, dim, &mut r);
    let latent: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let models = noise
        .iter()
        .map(|&s| DMatrix::from_fn(n, dim, |i, d| centers[(latent[i], d)] + s * Distribution::<f64>::sample(&StandardNormal, &mut r)))
        .collect();
    (latent, models)
}

pub fn column(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
