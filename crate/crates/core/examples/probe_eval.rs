//! Closed-form least-squares probes, alone and averaged over sampled tasks.
//!
//! ```sh
//! cargo run --release --example probe_eval
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskprior::kernel::centered_cosine_kernel;
use taskprior::probe::{closed_form_probe_loss, evaluate_over_tasks, fit_probe};
use taskprior::sampler::one_hot;
use taskprior::{FeatureMatrix, TaskPrior};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let centers = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-1.0..1.0));
    let clean = DMatrix::from_fn(90, 5, |i, d| centers[(i % 3, d)] + 0.1 * rng.random_range(-1.0..1.0));
    let noisy = DMatrix::from_fn(90, 5, |i, d| clean[(i, d)] + rng.random_range(-1.0..1.0));
    let clean = FeatureMatrix::from_matrix(clean, "clean")?;
    let noisy = FeatureMatrix::from_matrix(noisy, "noisy")?;

    let labels: Vec<usize> = (0..90).map(|i| i % 3).collect();
    let y = one_hot(&labels, 3);
    for f in [&clean, &noisy] {
        let probe = fit_probe(f, &y)?;
        println!(
            "{}: optimal loss {:.4} (explicit probe {:.4}, rank {})",
            f.model_id(),
            closed_form_probe_loss(f, &y)?,
            probe.train_loss,
            probe.rank_used
        );
    }

    let prior = TaskPrior::new(centered_cosine_kernel(&clean)?, 0.01)?;
    for f in [&clean, &noisy] {
        let report = evaluate_over_tasks(f, &prior, 2, 50, 0.8, 0)?;
        println!(
            "{}: accuracy {:.3} +/- {:.3} over {} tasks",
            f.model_id(),
            report.mean_accuracy,
            report.accuracy_variance.sqrt(),
            report.per_task_accuracy.len()
        );
    }
    Ok(())
}
