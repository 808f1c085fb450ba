//! Root-level selection probabilities learned from a second sample.

use forest_lab::adaptive::{approx_strong_probability, estimate_selection_probs, SelectionSource, SubsetSampling};
use forest_lab::ModelSpec;

fn main() -> forest_lab::Result<()> {
    let model = ModelSpec::linear(vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0], 0.1)?;
    let source = SelectionSource::Fresh { model: &model, n: 1000 };
    let p = estimate_selection_probs(source, 3, SubsetSampling::WithoutReplacement, 300, 5)?;
    println!("learned      {:?}", p.as_slice());
    println!("strong approx {:.4}", approx_strong_probability(2, 6, 3, 0.0));
    Ok(())
}
