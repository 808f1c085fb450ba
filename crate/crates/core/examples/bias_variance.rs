//! Variance and squared bias across leaf counts, next to their upper bounds.

use std::sync::Arc;

use forest_lab::analytics::{mc_bias_variance, DecompositionPlan, ForestSetup};
use forest_lab::bounds::{bias_upper_bound, variance_upper_bound, BoundInputs};
use forest_lab::{ModelSpec, SelectionProbs};

fn main() -> forest_lab::Result<()> {
    let model = ModelSpec::linear(vec![1.0, 1.0], 0.5)?;
    let probs = Arc::new(SelectionProbs::uniform(2)?);
    let n = 2000;
    let plan = DecompositionPlan {
        blocks: 4,
        queries: 50,
        datasets: 3,
    };
    for k in [4u64, 16, 64, 256] {
        let setup = ForestSetup::new(model.clone(), n, k, probs.clone(), 40)?;
        let e = mc_bias_variance(&setup, plan, k)?;
        let b = BoundInputs::new(n as f64, k as f64, 2, 2)
            .sigma(0.5)
            .lipschitz(model.lipschitz().unwrap_or(0.0))
            .sup_bound(model.sup_norm());
        println!(
            "k = {k:>3}  variance {:.2e} (bound {:.2e})  bias^2 {:.2e} (bound {:.2e})  mse {:.2e}",
            e.variance.mean,
            variance_upper_bound(&b)?,
            e.bias_sq.mean,
            bias_upper_bound(&b)?,
            e.mse.mean
        );
    }
    Ok(())
}
