//! Pointwise MSE of the forest at fixed points as n grows, for an indicator target.

use std::sync::Arc;

use forest_lab::analytics::{interior_points, pointwise_mse, ForestSetup};
use forest_lab::{ModelSpec, RegressionFunction, SelectionProbs};

fn main() -> forest_lab::Result<()> {
    let model = ModelSpec::new(2, RegressionFunction::Indicator { strong: vec![0, 1] }, 0.5)?;
    let points = interior_points(2, 4, 0.1, 0)?;
    for n in [256usize, 1024, 4096] {
        let k = (n as f64).powf(0.6).round() as u64;
        let setup = ForestSetup::new(model.clone(), n, k, Arc::new(SelectionProbs::uniform(2)?), 20)?;
        let est = pointwise_mse(&setup, &points, 30, n as u64)?;
        let row: Vec<String> = est.iter().map(|e| format!("{:.4}", e.mean)).collect();
        println!("n = {n:>4}  k = {k:>3}  mse {}", row.join("  "));
    }
    Ok(())
}
