//! Closed-form alignment of three models against one prior, and how the
//! temperature changes the picture.
//!
//! ```sh
//! cargo run --release --example analyze_kernels
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskprior::kernel::centered_cosine_kernel;
use taskprior::{FeatureMatrix, TaskPrior};

/// 200 samples in 4 clusters, seen through noise of the given scale.
fn clustered(noise: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let centers = DMatrix::from_fn(4, 8, |_, _| rng.random_range(-1.0..1.0));
    DMatrix::from_fn(200, 8, |i, d| centers[(i % 4, d)] + noise * rng.random_range(-1.0..1.0))
}

fn main() -> anyhow::Result<()> {
    let reference = FeatureMatrix::from_matrix(clustered(0.05, &mut ChaCha8Rng::seed_from_u64(0)), "reference")?;
    let models: Vec<FeatureMatrix> = [0.2, 0.8, 2.0]
        .iter()
        .map(|&s| FeatureMatrix::from_matrix(clustered(s, &mut ChaCha8Rng::seed_from_u64(0)), format!("noise={s}")))
        .collect::<Result<_, _>>()?;

    let k = centered_cosine_kernel(&reference)?;
    for t in [0.001, 0.01, 0.1, 1.0] {
        let prior = TaskPrior::new(k.clone(), t)?;
        println!("T = {t}");
        for m in &models {
            let stats = prior.task_stats(&centered_cosine_kernel(m)?, true)?;
            println!(
                "  {:<10} mean {:>10.3}  std {:>8.3}  mean/N^2 {:.5}",
                m.model_id(),
                stats.mean,
                stats.variance.sqrt(),
                stats.mean_per_n2
            );
        }
    }
    Ok(())
}
