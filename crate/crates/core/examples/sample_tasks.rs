//! Drawing labelings with the prefix sampler. Low temperatures follow the
//! cluster structure; high temperatures spread samples over all classes.
//!
//! ```sh
//! cargo run --release --example sample_tasks
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskprior::kernel::centered_cosine_kernel;
use taskprior::sampler::prefix_sample;
use taskprior::{FeatureMatrix, TaskPrior};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let centers = DMatrix::from_fn(6, 12, |_, _| rng.random_range(-1.0..1.0));
    let data = DMatrix::from_fn(300, 12, |i, d| centers[(i % 6, d)] + 0.1 * rng.random_range(-1.0..1.0));
    let features = FeatureMatrix::from_matrix(data, "clusters")?;
    let kernel = centered_cosine_kernel(&features)?;

    for t in [0.01, 1.0, 1000.0] {
        let prior = TaskPrior::new(kernel.clone(), t)?;
        let labeling = prefix_sample(&prior, 10, 7, false)?;
        // How often two samples of the same cluster share a label.
        let (mut same, mut pairs) = (0usize, 0usize);
        for i in 0..300 {
            for j in (i + 1)..300 {
                if i % 6 == j % 6 {
                    pairs += 1;
                    same += usize::from(labeling.labels[i] == labeling.labels[j]);
                }
            }
        }
        println!(
            "T = {t:>7}: {} classes used, counts {:?}, same-cluster agreement {:.2}",
            labeling.distinct_classes(),
            labeling.class_counts(),
            same as f64 / pairs as f64
        );
    }

    let prior = TaskPrior::new(kernel, 0.01)?;
    let shuffled = prefix_sample(&prior, 3, 7, true)?;
    println!("shuffled visit order, first labels {:?}", &shuffled.labels[..12]);
    Ok(())
}
