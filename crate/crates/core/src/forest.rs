//! The centered random forest estimator.
//!
//! A fitted forest is just tree seeds plus a reference to the training data.
//! Queries route the point through each tree and average the responses that
//! share its leaf; an empty leaf predicts exactly 0. For repeated queries,
//! [`ForestModel::indexed`] precomputes per-tree leaf sums keyed by the leaf
//! path.

use std::sync::Arc;

use crate::cell::{self, binary_digit, quantize};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;
use crate::tree::{CenteredTree, SelectionProbs, MAX_PATH_DEPTH};

/// Depth up to which leaf statistics are stored in a flat table.
const DENSE_DEPTH_LIMIT: u32 = 16;

fn check_dims(data: &Dataset, tree: &CenteredTree) -> Result<()> {
    if data.dim() != tree.dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.dim(),
            got: data.dim(),
        });
    }
    Ok(())
}

/// Whether the first `counts[j]` binary digits of `a_j` and `b_j` agree for
/// every coordinate, i.e. whether `a` and `b` share the leaf with those counts.
fn same_prefixes(a: &[f64], qa: &[u64], b: &[f64], qb: &[u64], counts: &[u32]) -> bool {
    counts.iter().enumerate().all(|(j, &k)| match k {
        0 => true,
        1..=64 => qa[j] >> (64 - k) == qb[j] >> (64 - k),
        _ => qa[j] == qb[j] && (65..=k).all(|i| binary_digit(a[j], i) == binary_digit(b[j], i)),
    })
}

/// Indices of the training points that fall in the leaf of `x`.
fn leaf_members(tree: &CenteredTree, data: &Dataset, x: &[f64]) -> Result<Vec<usize>> {
    check_dims(data, tree)?;
    let counts = tree.route_counts(x)?;
    let qx: Vec<u64> = x.iter().map(|&v| quantize(v)).collect();
    Ok((0..data.len())
        .filter(|&i| same_prefixes(x, &qx, data.x(i), data.quantized(i), &counts))
        .collect())
}

/// `N_n(x, Θ)`: number of training points sharing the leaf of `x`.
pub fn leaf_population(tree: &CenteredTree, data: &Dataset, x: &[f64]) -> Result<usize> {
    leaf_members(tree, data, x).map(|m| m.len())
}

/// Single-tree prediction: leaf mean of the responses, 0 for an empty leaf.
pub fn tree_predict(tree: &CenteredTree, data: &Dataset, x: &[f64]) -> Result<f64> {
    let members = leaf_members(tree, data, x)?;
    if members.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = members.iter().map(|&i| data.ys()[i]).sum();
    Ok(sum / members.len() as f64)
}

/// Per-tree weights `W_ni = 1{X_i ∈ A}·1_E / N`.
pub fn tree_weights(tree: &CenteredTree, data: &Dataset, x: &[f64]) -> Result<Vec<f64>> {
    let members = leaf_members(tree, data, x)?;
    let mut w = vec![0.0; data.len()];
    let share = 1.0 / members.len().max(1) as f64;
    for i in members {
        w[i] = share;
    }
    Ok(w)
}

#[derive(Debug, Clone)]
enum LeafTable {
    Dense {
        sum: Vec<f64>,
        count: Vec<u32>,
    },
    Sorted {
        keys: Vec<u64>,
        sum: Vec<f64>,
        count: Vec<u32>,
    },
}

impl LeafTable {
    fn build(tree: &CenteredTree, data: &Dataset) -> Self {
        let mut counts = vec![0u32; data.dim()];
        let mut leaf_of = |i: usize| {
            counts.iter_mut().for_each(|c| *c = 0);
            tree.leaf_of_quantized(data.quantized(i), &mut counts)
        };
        if tree.depth() <= DENSE_DEPTH_LIMIT {
            let size = 1usize << tree.depth();
            let mut sum = vec![0.0; size];
            let mut count = vec![0u32; size];
            for (i, &y) in data.ys().iter().enumerate() {
                let leaf = leaf_of(i) as usize;
                sum[leaf] += y;
                count[leaf] += 1;
            }
            LeafTable::Dense { sum, count }
        } else {
            let mut pairs: Vec<(u64, f64)> = data.ys().iter().enumerate().map(|(i, &y)| (leaf_of(i), y)).collect();
            // Stable sort keeps the per-leaf summation order fixed.
            pairs.sort_by_key(|p| p.0);
            let (mut keys, mut sum, mut count) = (Vec::new(), Vec::new(), Vec::new());
            for (key, y) in pairs {
                if keys.last() == Some(&key) {
                    *sum.last_mut().unwrap() += y;
                    *count.last_mut().unwrap() += 1;
                } else {
                    keys.push(key);
                    sum.push(y);
                    count.push(1);
                }
            }
            LeafTable::Sorted { keys, sum, count }
        }
    }

    #[inline]
    fn mean(&self, leaf: u64) -> f64 {
        let (s, c) = match self {
            LeafTable::Dense { sum, count } => (sum[leaf as usize], count[leaf as usize]),
            LeafTable::Sorted { keys, sum, count } => match keys.binary_search(&leaf) {
                Ok(pos) => (sum[pos], count[pos]),
                Err(_) => (0.0, 0),
            },
        };
        if c == 0 {
            0.0
        } else {
            s / f64::from(c)
        }
    }
}

/// An `M`-tree centered forest over a borrowed training set.
#[derive(Debug, Clone)]
pub struct ForestModel<'a> {
    data: &'a Dataset,
    trees: Vec<CenteredTree>,
    index: Option<Vec<Arc<LeafTable>>>,
}

impl<'a> ForestModel<'a> {
    pub fn new(data: &'a Dataset, trees: Vec<CenteredTree>) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| invalid("trees", "a forest needs at least one tree"))?;
        for t in &trees {
            check_dims(data, t)?;
            if t.depth() != first.depth() {
                return Err(Error::DepthMismatch {
                    left: first.depth(),
                    right: t.depth(),
                });
            }
            if t.probs() != first.probs() {
                return Err(Error::InvalidProbabilities(
                    "trees use different selection probabilities".into(),
                ));
            }
        }
        Ok(Self {
            data,
            trees,
            index: None,
        })
    }

    /// `count` trees with `⌈log₂ leaves⌉` levels; tree `m` uses seed `derive_seed(seed, m)`.
    pub fn grow(data: &'a Dataset, probs: Arc<SelectionProbs>, leaves: u64, count: usize, seed: u64) -> Result<Self> {
        let trees = (0..count as u64)
            .map(|m| CenteredTree::with_leaves(derive_seed(seed, m), leaves, probs.clone()))
            .collect();
        Self::new(data, trees)
    }

    /// Precomputes leaf statistics for every tree. No-op beyond depth 63.
    pub fn indexed(mut self) -> Self {
        if self.depth() > MAX_PATH_DEPTH {
            return self;
        }
        // With a single splittable coordinate every tree is the same partition.
        let tables = if self.trees[0].probs().single_coordinate().is_some() {
            let shared = Arc::new(LeafTable::build(&self.trees[0], self.data));
            vec![shared; self.trees.len()]
        } else {
            self.trees
                .iter()
                .map(|t| Arc::new(LeafTable::build(t, self.data)))
                .collect()
        };
        self.index = Some(tables);
        self
    }

    pub fn is_indexed(&self) -> bool {
        self.index.is_some()
    }

    pub fn trees(&self) -> &[CenteredTree] {
        &self.trees
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn depth(&self) -> u32 {
        self.trees[0].depth()
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    /// Prediction of every tree at `x`.
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        cell::check_point(self.data.dim(), x)?;
        match &self.index {
            Some(tables) => {
                let q: Vec<u64> = x.iter().map(|&v| quantize(v)).collect();
                let mut counts = vec![0u32; x.len()];
                Ok(self
                    .trees
                    .iter()
                    .zip(tables)
                    .map(|(t, table)| {
                        counts.iter_mut().for_each(|c| *c = 0);
                        table.mean(t.leaf_of_quantized(&q, &mut counts))
                    })
                    .collect())
            }
            None => self.trees.iter().map(|t| tree_predict(t, self.data, x)).collect(),
        }
    }

    /// `f̄ₙ^M(x)`, the average of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let preds = self.tree_predictions(x)?;
        Ok(preds.iter().sum::<f64>() / preds.len() as f64)
    }

    /// Indexed prediction from pre-quantized coordinates; `scratch` holds `d` counters.
    #[inline]
    pub(crate) fn predict_quantized(&self, q: &[u64], scratch: &mut [u32]) -> f64 {
        let tables = self.index.as_ref().expect("forest must be indexed");
        let total: f64 = self
            .trees
            .iter()
            .zip(tables)
            .map(|(t, table)| {
                scratch.iter_mut().for_each(|c| *c = 0);
                table.mean(t.leaf_of_quantized(q, scratch))
            })
            .sum();
        total / self.trees.len() as f64
    }

    /// Averaged weights `(1/M) Σ_m W_ni(x, Θ_m)`.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.data.len()];
        let m = self.trees.len() as f64;
        for t in &self.trees {
            let members = leaf_members(t, self.data, x)?;
            let share = 1.0 / (members.len().max(1) as f64 * m);
            for i in members {
                total[i] += share;
            }
        }
        Ok(total)
    }
}
