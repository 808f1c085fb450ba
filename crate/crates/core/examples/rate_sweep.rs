//! MSE against n for one strong variable with the tuned leaf count, and the
//! fitted exponent.

use std::sync::Arc;

use forest_lab::analytics::{fit_rate_exponent, mc_risk, ForestSetup};
use forest_lab::bounds::{optimal_leaf_count, round_to_power_of_two};
use forest_lab::rng::derive_seed;
use forest_lab::{ModelSpec, SelectionProbs};

fn main() -> forest_lab::Result<()> {
    let sigma = 0.1;
    let model = ModelSpec::linear(vec![1.0], sigma)?;
    let probs = Arc::new(SelectionProbs::uniform(1)?);
    let mut pts = Vec::new();
    for e in 9..=12 {
        let n = 1usize << e;
        let k = round_to_power_of_two(optimal_leaf_count(n as f64, 1, 1.0, sigma)?);
        let setup = ForestSetup::new(model.clone(), n, k, probs.clone(), 50)?;
        let r = mc_risk(&setup, 40, 50, derive_seed(3, e))?;
        println!("n = {n:>5}  k = {k:>3}  mse = {:.3e} +/- {:.1e}", r.mse, r.stderr);
        pts.push((n as f64, r.mse));
    }
    let fit = fit_rate_exponent(&pts)?;
    println!("exponent {:.3} +/- {:.3} (minimax -2/3)", fit.exponent, fit.stderr);
    Ok(())
}
