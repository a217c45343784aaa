//! The graph behind multi-view self-supervision, and combining two priors.
//!
//! ```sh
//! cargo run --example ssl_prior
//! ```

use taskprior::kernel::{combine_priors, ssl_labels, ssl_prior_graph};
use taskprior::probe::closed_form_loss_matrix;
use taskprior::TaskPrior;

fn main() -> anyhow::Result<()> {
    // 4 images, 3 augmented views each: views of one image form a class.
    let graph = ssl_prior_graph(4, 3);
    let labels = ssl_labels(4, 3);
    println!("graph is {}x{}, {} edges", graph.n(), graph.n(), graph.data().sum());
    println!("YYᵀ reproduces it: {}", &labels * labels.transpose() == *graph.data());
    // Features equal to the view identity solve the task exactly.
    println!("probe loss on the identity task: {:.2e}", closed_form_loss_matrix(&labels, &labels)?);

    let prior = TaskPrior::new(graph.clone(), 1.0)?;
    println!(
        "P(views of one image linked) = {:.3}, P(views of different images linked) = {:.3}",
        prior.edge_probability(0, 1)?,
        prior.edge_probability(0, 3)?
    );

    let both = TaskPrior::new(combine_priors(&graph, &graph)?, 1.0)?;
    println!("doubling the kernel sharpens it: {:.3}", both.edge_probability(0, 1)?);
    Ok(())
}
