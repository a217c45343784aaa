//! Task-distribution evaluation of representation models.
//!
//! A reference kernel `K` over `N` samples defines a Gibbs measure on binary
//! label graphs, `μ(G) ∝ exp(Tr(GK)/T)`. Every edge of such a graph is an
//! independent Bernoulli variable, so the mean and variance of the alignment
//! score `Tr(MG)` between a model kernel `M` and a random task graph are
//! available in closed form. This crate provides:
//!
//! - [`data_io`]: NPY/CSV feature ingestion and the JSON report envelope.
//! - [`kernel`]: centered cosine kernels, PSD factorization, prior composition,
//!   and the block graph induced by multi-view self-supervision.
//! - [`prior`]: edge probabilities, closed-form task statistics, and exact
//!   enumeration of tiny measures.
//! - [`sampler`]: the O(N) prefix sampler for multi-class labelings, a direct
//!   Bernoulli graph sampler, and a Metropolis–Hastings baseline.
//! - [`probe`]: closed-form least-squares probes and their accuracy on
//!   sampled tasks.
//! - [`eval`]: comparison of many models against one prior.
//! - [`cli`]: the `taskprior` command line.
//!
//! All arithmetic is `f64`. Matrices are [`nalgebra::DMatrix`] with samples
//! as rows.

pub mod cli;
pub mod data_io;
pub mod eval;
pub mod kernel;
mod linalg;
pub mod prior;
pub mod probe;
pub mod rng;
pub mod sampler;

pub use data_io::{DataError, DatasetManifest, FeatureFormat, FeatureMatrix, Report};
pub use eval::{compare_feature_sets, compare_models, ComparisonReport};
pub use kernel::{KernelError, KernelKind, KernelMatrix};
pub use prior::{PriorError, TaskPrior, TaskStats, DEFAULT_TEMPERATURE};
pub use probe::{ProbeError, ProbeReport, ProbeSolution};
pub use sampler::{LabelGraph, Labeling, SamplerError};
