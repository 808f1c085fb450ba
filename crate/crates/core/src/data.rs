//! Training samples and the regression models that generate them.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cell::{self, quantize};
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// `n` pairs `(x, y)` with `x ∈ [0, 1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    quantized: Vec<u64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    pub fn from_flat(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if ys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if xs.len() != dim * ys.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * ys.len(),
                got: xs.len(),
            });
        }
        for row in xs.chunks_exact(dim) {
            cell::check_point(dim, row)?;
        }
        let quantized = xs.iter().map(|&v| quantize(v)).collect();
        Ok(Self { dim, xs, quantized, ys })
    }

    pub fn from_rows(rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: ys.len(),
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::from_flat(dim, rows.concat(), ys)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn quantized(&self, i: usize) -> &[u64] {
        &self.quantized[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Same inputs, new responses.
    pub fn with_ys(&self, ys: Vec<f64>) -> Result<Self> {
        if ys.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: ys.len(),
            });
        }
        Ok(Self { ys, ..self.clone() })
    }
}

/// Regression function families used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegressionFunction {
    /// `f(x) = ⟨β, x⟩`; the strong set is the support of `β`.
    SparseLinear {
        beta: Vec<f64>,
    },
    /// `f(x) = Σ_{j∈S} sin(π x_j)`, Lipschitz with constant `π √S`.
    LipschitzTest {
        strong: Vec<usize>,
    },
    Constant {
        value: f64,
    },
    /// `f(x) = 1{x_j ≤ ½ for all j ∈ S}`.
    Indicator {
        strong: Vec<usize>,
    },
}

/// Statistical model `Y = f(X) + ε`, `X ~ U[0,1)^d`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dim: usize,
    pub function: RegressionFunction,
    #[serde(default)]
    pub sigma: f64,
}

impl ModelSpec {
    pub fn new(dim: usize, function: RegressionFunction, sigma: f64) -> Result<Self> {
        let spec = Self { dim, function, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(beta: Vec<f64>, sigma: f64) -> Result<Self> {
        Self::new(beta.len(), RegressionFunction::SparseLinear { beta }, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(
                "sigma",
                format!("{} is not a finite non-negative value", self.sigma),
            ));
        }
        let check_set = |strong: &[usize]| -> Result<()> {
            if let Some(&j) = strong.iter().find(|&&j| j >= self.dim) {
                return Err(invalid(
                    "strong",
                    format!("coordinate {j} outside dimension {}", self.dim),
                ));
            }
            let mut sorted = strong.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != strong.len() {
                return Err(invalid("strong", "duplicate coordinates"));
            }
            Ok(())
        };
        match &self.function {
            RegressionFunction::SparseLinear { beta } => {
                if beta.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: beta.len(),
                    });
                }
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(invalid("beta", "coefficients must be finite"));
                }
            }
            RegressionFunction::LipschitzTest { strong } | RegressionFunction::Indicator { strong } => {
                if strong.is_empty() {
                    return Err(invalid("strong", "must name at least one coordinate"));
                }
                check_set(strong)?;
            }
            RegressionFunction::Constant { value } => {
                if !value.is_finite() {
                    return Err(invalid("value", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Coordinates `f` depends on.
    pub fn strong_set(&self) -> Vec<usize> {
        match &self.function {
            RegressionFunction::SparseLinear { beta } => beta
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(j, _)| j)
                .collect(),
            RegressionFunction::LipschitzTest { strong } | RegressionFunction::Indicator { strong } => {
                let mut s = strong.clone();
                s.sort_unstable();
                s
            }
            RegressionFunction::Constant { .. } => Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.function {
            RegressionFunction::SparseLinear { beta } => beta.iter().zip(x).map(|(b, v)| b * v).sum(),
            RegressionFunction::LipschitzTest { strong } => {
                strong.iter().map(|&j| (std::f64::consts::PI * x[j]).sin()).sum()
            }
            RegressionFunction::Constant { value } => *value,
            RegressionFunction::Indicator { strong } => {
                if strong.iter().all(|&j| x[j] <= 0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Euclidean Lipschitz constant, `None` for discontinuous `f`.
    pub fn lipschitz(&self) -> Option<f64> {
        match &self.function {
            RegressionFunction::SparseLinear { beta } => Some(beta.iter().map(|b| b * b).sum::<f64>().sqrt()),
            RegressionFunction::LipschitzTest { strong } => Some(std::f64::consts::PI * (strong.len() as f64).sqrt()),
            RegressionFunction::Constant { .. } => Some(0.0),
            RegressionFunction::Indicator { .. } => None,
        }
    }

    /// `sup |f|` over the unit cube.
    pub fn sup_norm(&self) -> f64 {
        match &self.function {
            RegressionFunction::SparseLinear { beta } => {
                let pos: f64 = beta.iter().filter(|b| **b > 0.0).sum();
                let neg: f64 = beta.iter().filter(|b| **b < 0.0).map(|b| -b).sum();
                pos.max(neg)
            }
            RegressionFunction::LipschitzTest { strong } => strong.len() as f64,
            RegressionFunction::Constant { value } => value.abs(),
            RegressionFunction::Indicator { .. } => 1.0,
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random::<f64>()).collect()
    }

    /// Draws `n` i.i.d. observations.
    pub fn sample(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let noise = Normal::new(0.0, self.sigma).map_err(|e| invalid("sigma", e.to_string()))?;
        let mut xs = Vec::with_capacity(n * self.dim);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let start = xs.len();
            xs.extend((0..self.dim).map(|_| rng.random::<f64>()));
            let f = self.eval(&xs[start..]);
            ys.push(if self.sigma > 0.0 { f + noise.sample(rng) } else { f });
        }
        Dataset::from_flat(self.dim, xs, ys)
    }
}
