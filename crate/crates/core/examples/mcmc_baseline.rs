//! The prefix sampler is an approximation of the restricted prior. On a tiny
//! problem both it and a Metropolis chain can be compared with the exact
//! distribution over all labelings.
//!
//! ```sh
//! cargo run --release --example mcmc_baseline
//! ```

use nalgebra::DMatrix;
use taskprior::kernel::{KernelKind, KernelMatrix};
use taskprior::prior::{encode_labeling, total_variation};
use taskprior::sampler::{prefix_sample, MetropolisChain};
use taskprior::TaskPrior;

fn main() -> anyhow::Result<()> {
    let z = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, 0.9, 0.1, -0.8, 0.3, -1.0, 0.0, 0.1, 1.0]);
    let (q, t) = (2, 2.0);
    let prior = TaskPrior::new(KernelMatrix::from_factor(z, KernelKind::Linear), t)?;
    let exact = prior.restricted_measure(q)?;

    let draws = 100_000;
    let mut prefix = vec![0.0; exact.probabilities().len()];
    for seed in 0..draws {
        let y = prefix_sample(&prior, q, seed, false)?;
        prefix[encode_labeling(&y.labels, q) as usize] += 1.0 / draws as f64;
    }

    let mut chain = MetropolisChain::new(&prior, q, 0)?;
    let steps = 1_000_000;
    let mut mcmc = vec![0.0; prefix.len()];
    for _ in 0..steps {
        chain.step();
        mcmc[encode_labeling(chain.labels(), q) as usize] += 1.0 / steps as f64;
    }

    println!("total variation from the exact restricted prior:");
    println!("  prefix sampler  {:.4}", total_variation(&prefix, exact.probabilities()));
    println!("  metropolis      {:.4}", total_variation(&mcmc, exact.probabilities()));
    Ok(())
}
