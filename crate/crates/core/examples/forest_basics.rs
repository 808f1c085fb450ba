//! Fit a centered forest on a sparse linear model and predict at a few points.

use std::sync::Arc;

use forest_lab::rng::stream;
use forest_lab::{ForestModel, ModelSpec, SelectionProbs};

fn main() -> forest_lab::Result<()> {
    let model = ModelSpec::linear(vec![1.0, 1.0, 0.0, 0.0], 0.1)?;
    let data = model.sample(4000, &mut stream(1))?;
    // Split only the two strong coordinates.
    let probs = Arc::new(SelectionProbs::ideal(4, &[0, 1])?);
    let forest = ForestModel::grow(&data, probs, 64, 200, 2)?.indexed();
    println!("{} trees of depth {}", forest.tree_count(), forest.depth());
    for x in [[0.1, 0.2, 0.5, 0.5], [0.5, 0.5, 0.9, 0.1], [0.9, 0.7, 0.3, 0.3]] {
        println!(
            "x = {x:?}  f(x) = {:.3}  forest = {:.3}",
            model.eval(&x),
            forest.predict(&x)?
        );
    }
    Ok(())
}
