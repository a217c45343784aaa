//! Ranking a zoo of models against one model's prior, with both the closed
//! form and probes on sampled tasks. Writes the report and a CSV summary.
//!
//! ```sh
//! cargo run --release --example compare_zoo
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskprior::data_io::{save_report, Report};
use taskprior::{compare_feature_sets, FeatureMatrix};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = DMatrix::from_fn(5, 16, |_, _| rng.random_range(-1.0..1.0));
    let models: Vec<FeatureMatrix> = [0.05, 0.5, 1.0, 1.5, 2.5]
        .iter()
        .enumerate()
        .map(|(i, &noise)| {
            let m = DMatrix::from_fn(250, 16, |r, d| centers[(r % 5, d)] + noise * rng.random_range(-1.0..1.0));
            FeatureMatrix::from_matrix(m, if i == 0 { "teacher".to_string() } else { format!("student{i}") })
        })
        .collect::<Result<_, _>>()?;

    let report = compare_feature_sets(&models, "teacher", 0.01, 2, 50, 0.8, 0)?;
    for row in &report.rows {
        println!(
            "{:<9} mean {:>10.1}  variance {:>7.2}  accuracy {:.3}{}",
            row.model_id,
            row.stats.mean,
            row.stats.variance,
            row.probe.mean_accuracy,
            if row.is_prior { "  (prior)" } else { "" }
        );
    }
    if let Some(c) = &report.correlations.mean_vs_probe_mean.estimate {
        println!("pearson r between mean and accuracy: {:.3}", c.r);
    }

    let dir = std::env::temp_dir();
    std::fs::write(dir.join("zoo.csv"), report.to_csv())?;
    save_report(&Report::ComparisonReport(report), &dir.join("zoo.json"))?;
    println!("wrote {}", dir.join("zoo.json").display());
    Ok(())
}
