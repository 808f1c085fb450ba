//! Monte Carlo estimators, exact enumeration oracles and exponent fits.

pub mod decomposition;
pub mod fit;
pub mod multinomial;

use serde::Serialize;

pub use decomposition::{
    interior_points, mc_bias_variance, mc_risk, pointwise_mse, DecompositionEstimate, DecompositionPlan, ForestSetup,
    RiskEstimate,
};
pub use fit::{fit_rate_exponent, RateFit};
pub use multinomial::{
    composition_count, expected_overlap, fitted_lower_constant, halving_binomial, halving_exact, halving_expectation,
    halving_mc, multibound_lower_shape, multibound_upper, normal_approx_check, tree_pair_overlap_mc, HalvingMode,
    NormalApproxCheck, PAIR_LIMIT,
};

/// Sum with a fixed binary reduction tree, independent of how the values were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    /// `stderr` is `NaN` for a single observation.
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len();
        let mean = pairwise_sum(v) / n as f64;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n as f64 - 1.0);
        Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        }
    }

    /// Whether `value` lies within `z` standard errors of the mean.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.stderr
    }
}
