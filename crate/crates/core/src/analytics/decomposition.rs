//! Monte Carlo risk and its split into variance and squared bias.
//!
//! Seeds: replicate or block `r` uses `derive_seed(seed, r)`; inside it,
//! dataset `j` of a block uses `derive_seed(block, j)`, and each dataset seed
//! splits into the `lane::DATASET` and `lane::TREES` streams. Query points
//! come from the `lane::QUERIES` child of the replicate or block seed.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{pairwise_sum, Estimate};
use crate::cell::quantize;
use crate::data::ModelSpec;
use crate::error::{invalid, Error, Result};
use crate::forest::ForestModel;
use crate::rng::{derive_seed, lane, stream};
use crate::tree::{SelectionProbs, MAX_PATH_DEPTH};

/// A forest configuration to be refitted on fresh data.
#[derive(Debug, Clone)]
pub struct ForestSetup {
    pub model: ModelSpec,
    pub n: usize,
    pub leaves: u64,
    pub probs: Arc<SelectionProbs>,
    pub trees: usize,
}

impl ForestSetup {
    pub fn new(model: ModelSpec, n: usize, leaves: u64, probs: Arc<SelectionProbs>, trees: usize) -> Result<Self> {
        model.validate()?;
        if probs.dim() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: probs.dim(),
            });
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if leaves == 0 {
            return Err(invalid("leaves", "must be positive"));
        }
        if trees == 0 {
            return Err(invalid("trees", "must be positive"));
        }
        Ok(Self {
            model,
            n,
            leaves,
            probs,
            trees,
        })
    }

    /// Fits a forest on a fresh sample and predicts at every query.
    pub fn fit_predict(&self, seed: u64, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        let data = self
            .model
            .sample(self.n, &mut stream(derive_seed(seed, lane::DATASET)))?;
        let forest = ForestModel::grow(
            &data,
            self.probs.clone(),
            self.leaves,
            self.trees,
            derive_seed(seed, lane::TREES),
        )?
        .indexed();
        if forest.depth() > MAX_PATH_DEPTH {
            return queries.iter().map(|x| forest.predict(x)).collect();
        }
        let mut scratch = vec![0u32; self.model.dim];
        let mut q = vec![0u64; self.model.dim];
        Ok(queries
            .iter()
            .map(|x| {
                q.iter_mut().zip(x).for_each(|(d, &v)| *d = quantize(v));
                forest.predict_quantized(&q, &mut scratch)
            })
            .collect())
    }

    fn queries(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut rng = stream(derive_seed(seed, lane::QUERIES));
        (0..count).map(|_| self.model.sample_point(&mut rng)).collect()
    }
}

/// Mean squared error of the forest at fresh query points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    pub mse: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub queries: usize,
}

/// `E|f̄(X) − f(X)|²`: each replicate fits on a fresh sample and averages the
/// squared error over `queries` fresh points; the standard error is across
/// replicates.
pub fn mc_risk(setup: &ForestSetup, replicates: usize, queries: usize, seed: u64) -> Result<RiskEstimate> {
    if replicates < 2 {
        return Err(invalid("replicates", "need at least 2 for a standard error"));
    }
    if queries == 0 {
        return Err(invalid("queries", "must be positive"));
    }
    let per_rep: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let rs = derive_seed(seed, r);
            let xs = setup.queries(rs, queries);
            let preds = setup.fit_predict(rs, &xs)?;
            let errs: Vec<f64> = xs
                .iter()
                .zip(&preds)
                .map(|(x, p)| (p - setup.model.eval(x)).powi(2))
                .collect();
            Ok(pairwise_sum(&errs) / queries as f64)
        })
        .collect::<Result<_>>()?;
    let e = Estimate::from_samples(&per_rep);
    Ok(RiskEstimate {
        mse: e.mean,
        stderr: e.stderr,
        replicates,
        queries,
    })
}

/// Replication layout for [`mc_bias_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecompositionPlan {
    /// Independent blocks; standard errors are computed across blocks.
    pub blocks: usize,
    /// Query points per block.
    pub queries: usize,
    /// Independent datasets (and forests) per block, shared by its queries.
    pub datasets: usize,
}

impl DecompositionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(invalid("blocks", "need at least 2 for a standard error"));
        }
        if self.queries == 0 {
            return Err(invalid("queries", "must be positive"));
        }
        if self.datasets < 2 {
            return Err(invalid("datasets", "need at least 2 per block"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionEstimate {
    pub variance: Estimate,
    pub bias_sq: Estimate,
    pub mse: Estimate,
    /// Average `variance / datasets` subtracted from the raw squared bias.
    pub correction: f64,
    pub plan: DecompositionPlan,
    pub trees: usize,
}

/// Variance and squared bias of the forest.
///
/// At a query `X` with predictions `a_1 … a_R` from `R` independent fits,
/// the variance term is the mean of `½(a_i − a_j)²` over all pairs (the
/// unbiased sample variance `s²`), and the squared bias is
/// `(ā − f(X))² − s²/R`. Both are unbiased for any `R ≥ 2`. The direct MSE
/// `mean_i (a_i − f(X))²` equals their sum exactly.
pub fn mc_bias_variance(setup: &ForestSetup, plan: DecompositionPlan, seed: u64) -> Result<DecompositionEstimate> {
    plan.validate()?;
    let r = plan.datasets as f64;
    let per_block: Vec<[f64; 4]> = (0..plan.blocks as u64)
        .into_par_iter()
        .map(|b| {
            let bs = derive_seed(seed, b);
            let xs = setup.queries(bs, plan.queries);
            let fx: Vec<f64> = xs.iter().map(|x| setup.model.eval(x)).collect();
            let preds: Vec<Vec<f64>> = (0..plan.datasets as u64)
                .map(|j| setup.fit_predict(derive_seed(bs, j), &xs))
                .collect::<Result<_>>()?;
            let (mut var, mut bias, mut mse, mut corr) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (q, &f) in fx.iter().enumerate() {
                let a: Vec<f64> = preds.iter().map(|p| p[q]).collect();
                let mean = pairwise_sum(&a) / r;
                let dev: Vec<f64> = a.iter().map(|v| (v - mean).powi(2)).collect();
                let s2 = pairwise_sum(&dev) / (r - 1.0);
                let sq: Vec<f64> = a.iter().map(|v| (v - f).powi(2)).collect();
                var.push(s2);
                bias.push((mean - f).powi(2) - s2 / r);
                mse.push(pairwise_sum(&sq) / r);
                corr.push(s2 / r);
            }
            let q = plan.queries as f64;
            Ok([
                pairwise_sum(&var) / q,
                pairwise_sum(&bias) / q,
                pairwise_sum(&mse) / q,
                pairwise_sum(&corr) / q,
            ])
        })
        .collect::<Result<_>>()?;
    let column = |i: usize| per_block.iter().map(|v| v[i]).collect::<Vec<_>>();
    Ok(DecompositionEstimate {
        variance: Estimate::from_samples(&column(0)),
        bias_sq: Estimate::from_samples(&column(1)),
        mse: Estimate::from_samples(&column(2)),
        correction: pairwise_sum(&column(3)) / plan.blocks as f64,
        plan,
        trees: setup.trees,
    })
}

/// `E|f̄(x) − f(x)|²` at each fixed point, over `replicates` independent fits.
pub fn pointwise_mse(setup: &ForestSetup, points: &[Vec<f64>], replicates: usize, seed: u64) -> Result<Vec<Estimate>> {
    if replicates < 2 {
        return Err(invalid("replicates", "need at least 2 for a standard error"));
    }
    for x in points {
        crate::cell::check_point(setup.model.dim, x)?;
    }
    let errs: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let preds = setup.fit_predict(derive_seed(seed, r), points)?;
            Ok(points
                .iter()
                .zip(&preds)
                .map(|(x, p)| (p - setup.model.eval(x)).powi(2))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..points.len())
        .map(|i| Estimate::from_samples(&errs.iter().map(|e| e[i]).collect::<Vec<_>>()))
        .collect())
}

/// Fixed query points drawn uniformly from `[margin, 1 − margin)^d`.
pub fn interior_points(dim: usize, count: usize, margin: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..0.5).contains(&margin) {
        return Err(invalid("margin", format!("{margin} is outside [0, 0.5)")));
    }
    let mut rng = stream(seed);
    Ok((0..count)
        .map(|_| {
            (0..dim)
                .map(|_| margin + (1.0 - 2.0 * margin) * rng.random::<f64>())
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RegressionFunction;

    fn setup(model: ModelSpec, n: usize, leaves: u64, trees: usize) -> ForestSetup {
        let probs = Arc::new(SelectionProbs::uniform(model.dim).unwrap());
        ForestSetup::new(model, n, leaves, probs, trees).unwrap()
    }

    #[test]
    fn constant_noiseless_is_exact() {
        let m = ModelSpec::new(2, RegressionFunction::Constant { value: 3.0 }, 0.0).unwrap();
        // Enough points per leaf that no query lands in an empty leaf.
        let s = setup(m, 2000, 4, 5);
        let plan = DecompositionPlan {
            blocks: 3,
            queries: 20,
            datasets: 2,
        };
        let d = mc_bias_variance(&s, plan, 1).unwrap();
        assert_eq!(d.variance.mean, 0.0);
        assert_eq!(d.bias_sq.mean, 0.0);
        assert_eq!(mc_risk(&s, 3, 10, 2).unwrap().mse, 0.0);
    }

    #[test]
    fn pure_noise_has_no_bias() {
        let m = ModelSpec::new(2, RegressionFunction::Constant { value: 0.0 }, 1.0).unwrap();
        let s = setup(m, 512, 8, 20);
        let plan = DecompositionPlan {
            blocks: 20,
            queries: 20,
            datasets: 4,
        };
        let d = mc_bias_variance(&s, plan, 5).unwrap();
        assert!(d.bias_sq.covers(0.0, 3.0), "{:?}", d.bias_sq);
        assert!(d.variance.mean > 0.0);
        let total = d.variance.mean + d.bias_sq.mean;
        assert!((total - d.mse.mean).abs() < 1e-12);
    }

    #[test]
    fn deterministic_for_seed() {
        let m = ModelSpec::linear(vec![1.0, 0.5], 0.2).unwrap();
        let s = setup(m, 256, 16, 8);
        assert_eq!(mc_risk(&s, 4, 8, 9).unwrap(), mc_risk(&s, 4, 8, 9).unwrap());
        let pts = interior_points(2, 3, 0.1, 4).unwrap();
        assert_eq!(
            pointwise_mse(&s, &pts, 3, 1).unwrap(),
            pointwise_mse(&s, &pts, 3, 1).unwrap()
        );
    }

    #[test]
    fn plan_validation() {
        let bad = DecompositionPlan {
            blocks: 2,
            queries: 4,
            datasets: 1,
        };
        assert!(bad.validate().is_err());
        let m = ModelSpec::linear(vec![1.0], 0.0).unwrap();
        assert!(ForestSetup::new(m, 10, 4, Arc::new(SelectionProbs::uniform(2).unwrap()), 3).is_err());
    }
}
