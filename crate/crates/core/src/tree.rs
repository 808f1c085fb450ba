//! Lazily realized centered trees.
//!
//! A tree never materializes its `2^D` leaves. The coordinate split at a node
//! is drawn from a counter-based hash of the tree seed and the node's path
//! from the root, so any node can be evaluated on demand and two routings of
//! the same tree always agree. Routing costs `O(D)` time and `O(d)` memory.

use std::sync::Arc;

use crate::cell::{self, binary_digit, pow2_neg, DyadicCell, EXACT_SPLIT_LIMIT};
use crate::error::{Error, Result};
use crate::rng::{mix64, unit_interval};

const ROOT_SALT: u64 = 0x6A09_E667_F3BC_C908;
const CHILD_SALT: [u64; 2] = [0xBB67_AE85_84CA_A73B, 0x3C6E_F372_FE94_F82B];

/// Maximum depth for which a leaf can be addressed by a `u64` path.
pub const MAX_PATH_DEPTH: u32 = 63;

/// Per-node coordinate selection probabilities `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProbs {
    p: Vec<f64>,
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl SelectionProbs {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbabilities("empty probability vector".into()));
        }
        if let Some((j, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProbabilities(format!("p[{j}] = {v}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbabilities(format!("probabilities sum to {total}")));
        }
        let cumulative = p
            .iter()
            .scan(0.0, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let last_positive = p.iter().rposition(|&v| v > 0.0).unwrap_or(0);
        Ok(Self {
            p,
            cumulative,
            last_positive,
        })
    }

    /// Every coordinate equally likely.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProbabilities("empty probability vector".into()));
        }
        Self::new(vec![1.0 / dim as f64; dim])
    }

    /// `1/S` on the strong set, zero elsewhere.
    pub fn ideal(dim: usize, strong: &[usize]) -> Result<Self> {
        if strong.is_empty() {
            return Err(Error::InvalidProbabilities("empty strong set".into()));
        }
        let mut p = vec![0.0; dim];
        for &j in strong {
            if j >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: j + 1,
                });
            }
            p[j] = 1.0;
        }
        let s = p.iter().filter(|&&v| v > 0.0).count() as f64;
        p.iter_mut().for_each(|v| *v /= s);
        Self::new(p)
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// The only coordinate with positive probability, if there is just one.
    pub fn single_coordinate(&self) -> Option<usize> {
        let mut positive = self.p.iter().enumerate().filter(|(_, &v)| v > 0.0);
        match (positive.next(), positive.next()) {
            (Some((j, _)), None) => Some(j),
            _ => None,
        }
    }

    /// Coordinate selected by a uniform draw `u ∈ [0, 1)`.
    #[inline]
    pub fn pick(&self, u: f64) -> usize {
        if self.p.len() == 1 {
            return 0;
        }
        self.cumulative
            .iter()
            .zip(&self.p)
            .position(|(&c, &p)| p > 0.0 && u < c)
            .unwrap_or(self.last_positive)
    }
}

/// Number of splits `⌈log₂ k⌉` needed for `k` leaves.
pub fn depth_for_leaves(leaves: u64) -> u32 {
    if leaves <= 1 {
        0
    } else {
        64 - (leaves - 1).leading_zeros()
    }
}

/// A centered random tree of fixed depth.
#[derive(Debug, Clone)]
pub struct CenteredTree {
    seed: u64,
    depth: u32,
    probs: Arc<SelectionProbs>,
}

/// The leaf reached by a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafAssignment {
    pub cell: DyadicCell,
}

impl LeafAssignment {
    pub fn counts(&self) -> &[u32] {
        self.cell.counts()
    }
}

impl CenteredTree {
    pub fn new(seed: u64, depth: u32, probs: Arc<SelectionProbs>) -> Self {
        Self { seed, depth, probs }
    }

    /// Tree grown to `⌈log₂ leaves⌉` levels.
    pub fn with_leaves(seed: u64, leaves: u64, probs: Arc<SelectionProbs>) -> Self {
        Self::new(seed, depth_for_leaves(leaves), probs)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.probs.dim()
    }

    pub fn probs(&self) -> &Arc<SelectionProbs> {
        &self.probs
    }

    /// `2^D`, when it fits.
    pub fn leaf_count(&self) -> Option<u64> {
        1u64.checked_shl(self.depth)
    }

    #[inline]
    fn root_key(&self) -> u64 {
        mix64(self.seed ^ ROOT_SALT)
    }

    #[inline]
    fn coordinate(&self, key: u64) -> usize {
        self.probs.pick(unit_interval(key))
    }

    #[inline]
    fn child_key(key: u64, bit: u8) -> u64 {
        mix64(key ^ CHILD_SALT[bit as usize])
    }

    /// Coordinate split at the node reached by following `path` (0 = left).
    pub fn coordinate_at(&self, path: &[u8]) -> usize {
        let key = path
            .iter()
            .fold(self.root_key(), |key, &bit| Self::child_key(key, bit & 1));
        self.coordinate(key)
    }

    /// Walks the tree with quantized coordinates, filling `counts` (which must
    /// start zeroed) and returning the leaf path. Requires `D ≤ 63`.
    #[inline]
    pub(crate) fn leaf_of_quantized(&self, q: &[u64], counts: &mut [u32]) -> u64 {
        debug_assert!(self.depth <= MAX_PATH_DEPTH);
        let mut key = self.root_key();
        let mut path = 0u64;
        for _ in 0..self.depth {
            let j = self.coordinate(key);
            let bit = ((q[j] >> (63 - counts[j])) & 1) as u8;
            counts[j] += 1;
            path = (path << 1) | u64::from(bit);
            key = Self::child_key(key, bit);
        }
        path
    }

    /// Split counts `K_j` along the path to `x`, valid at any depth.
    pub fn route_counts(&self, x: &[f64]) -> Result<Vec<u32>> {
        cell::check_point(self.dim(), x)?;
        let mut counts = vec![0u32; self.dim()];
        if self.depth <= MAX_PATH_DEPTH {
            let q: Vec<u64> = x.iter().map(|&v| cell::quantize(v)).collect();
            self.leaf_of_quantized(&q, &mut counts);
        } else {
            let mut key = self.root_key();
            for _ in 0..self.depth {
                let j = self.coordinate(key);
                counts[j] += 1;
                let bit = binary_digit(x[j], counts[j]);
                key = Self::child_key(key, bit);
            }
        }
        Ok(counts)
    }

    /// Leaf cell containing `x`.
    pub fn route(&self, x: &[f64]) -> Result<LeafAssignment> {
        let counts = self.route_counts(x)?;
        if let Some(&k) = counts.iter().find(|&&k| k > EXACT_SPLIT_LIMIT) {
            return Err(Error::Precision {
                splits: k,
                limit: EXACT_SPLIT_LIMIT,
            });
        }
        Ok(LeafAssignment {
            cell: DyadicCell::containing(x, &counts)?,
        })
    }
}

fn check_compatible(a: &CenteredTree, b: &CenteredTree) -> Result<()> {
    if a.depth != b.depth {
        return Err(Error::DepthMismatch {
            left: a.depth,
            right: b.depth,
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// Exponent `D + ½Σ|K_j − K'_j|` of the overlap of the two leaves holding `x`.
///
/// Works at any depth; use it when the volume itself would underflow.
pub fn overlap_log2_via_counts(x: &[f64], a: &CenteredTree, b: &CenteredTree) -> Result<u64> {
    check_compatible(a, b)?;
    let ka = a.route_counts(x)?;
    let kb = b.route_counts(x)?;
    let spread: u64 = ka.iter().zip(&kb).map(|(&p, &q)| u64::from(p.abs_diff(q))).sum();
    // Both count vectors sum to D, so the spread is even.
    debug_assert_eq!(spread % 2, 0);
    Ok(u64::from(a.depth) + spread / 2)
}

/// `λ(A ∩ A') = 2^{−D − ½Σ|K_j − K'_j|}` from the split counts alone.
pub fn overlap_via_counts(x: &[f64], a: &CenteredTree, b: &CenteredTree) -> Result<f64> {
    overlap_log2_via_counts(x, a, b).map(pow2_neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(p: &[f64]) -> Arc<SelectionProbs> {
        Arc::new(SelectionProbs::new(p.to_vec()).unwrap())
    }

    #[test]
    fn single_coordinate_detection() {
        assert_eq!(probs(&[0.0, 1.0, 0.0]).single_coordinate(), Some(1));
        assert_eq!(probs(&[1.0]).single_coordinate(), Some(0));
        assert_eq!(probs(&[0.5, 0.5]).single_coordinate(), None);
    }

    #[test]
    fn probability_validation() {
        assert!(SelectionProbs::new(vec![]).is_err());
        assert!(SelectionProbs::new(vec![0.5, 0.6]).is_err());
        assert!(SelectionProbs::new(vec![-0.1, 1.1]).is_err());
        assert!(SelectionProbs::new(vec![0.5, 0.5 + 1e-13]).is_ok());
        let ideal = SelectionProbs::ideal(5, &[1, 3]).unwrap();
        assert_eq!(ideal.as_slice(), &[0.0, 0.5, 0.0, 0.5, 0.0]);
        assert!(SelectionProbs::ideal(2, &[2]).is_err());
    }

    #[test]
    fn pick_skips_zero_mass() {
        let p = SelectionProbs::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        assert_eq!(p.pick(0.0), 1);
        assert_eq!(p.pick(0.49), 1);
        assert_eq!(p.pick(0.5), 3);
        assert_eq!(p.pick(1.0 - 1e-17), 3);
    }

    #[test]
    fn depth_from_leaves() {
        assert_eq!(depth_for_leaves(1), 0);
        assert_eq!(depth_for_leaves(2), 1);
        assert_eq!(depth_for_leaves(3), 2);
        assert_eq!(depth_for_leaves(256), 8);
        assert_eq!(depth_for_leaves(257), 9);
    }

    #[test]
    fn one_dimensional_route() {
        let tree = CenteredTree::new(99, 3, probs(&[1.0]));
        let leaf = tree.route(&[0.3]).unwrap();
        assert_eq!(leaf.cell.interval(0), (0.25, 0.375));
        assert_eq!(leaf.counts(), &[3]);
    }

    #[test]
    fn depth_zero_is_unit_cube() {
        let tree = CenteredTree::new(1, 0, probs(&[0.25; 4]));
        let leaf = tree.route(&[0.1, 0.9, 0.5, 0.0]).unwrap();
        assert_eq!(leaf.cell, DyadicCell::unit(4));
        assert_eq!(leaf.cell.volume(), 1.0);
    }

    #[test]
    fn route_errors() {
        let tree = CenteredTree::new(1, 4, probs(&[0.5, 0.5]));
        assert!(matches!(
            tree.route(&[0.1]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            tree.route(&[0.1, 1.0]),
            Err(Error::OutsideUnitCube { coord: 1, .. })
        ));
        let deep = CenteredTree::new(1, 60, probs(&[1.0]));
        assert!(matches!(deep.route(&[0.1]), Err(Error::Precision { .. })));
        assert_eq!(deep.route_counts(&[0.1]).unwrap(), vec![60]);
    }

    #[test]
    fn routing_is_repeatable_and_contains_point() {
        let tree = CenteredTree::new(42, 12, probs(&[0.2, 0.3, 0.5]));
        let x = [0.123, 0.456, 0.789];
        let a = tree.route(&x).unwrap();
        assert_eq!(a, tree.route(&x).unwrap());
        assert!(a.cell.contains(&x));
        assert_eq!(a.cell.depth(), 12);
        assert_eq!(a.cell.volume(), pow2_neg(12));
    }

    #[test]
    fn deep_routing_agrees_with_fast_path() {
        // The generic digit walk and the quantized walk share node keys.
        let tree = CenteredTree::new(5, 40, probs(&[0.25; 4]));
        let x = [0.31, 0.62, 0.07, 0.99];
        let fast = tree.route_counts(&x).unwrap();
        let mut counts = [0u32; 4];
        let mut key = tree.root_key();
        for _ in 0..40 {
            let j = tree.coordinate(key);
            counts[j] += 1;
            key = CenteredTree::child_key(key, binary_digit(x[j], counts[j]));
        }
        assert_eq!(fast, counts.to_vec());
        let very_deep = CenteredTree::new(5, 1024, probs(&[0.25; 4]));
        let k = very_deep.route_counts(&x).unwrap();
        assert_eq!(k.iter().sum::<u32>(), 1024);
    }

    #[test]
    fn coordinate_at_follows_path() {
        let tree = CenteredTree::new(3, 2, probs(&[0.5, 0.5]));
        let x = [0.7, 0.2];
        let root = tree.coordinate_at(&[]);
        let bit = binary_digit(x[root], 1);
        let second = tree.coordinate_at(&[bit]);
        let mut expect = vec![0u32; 2];
        expect[root] += 1;
        expect[second] += 1;
        assert_eq!(tree.route_counts(&x).unwrap(), expect);
    }

    #[test]
    fn overlap_identity_examples() {
        let p = probs(&[0.5, 0.5]);
        let t = CenteredTree::new(10, 6, p.clone());
        let x = [0.4, 0.6];
        assert_eq!(overlap_via_counts(&x, &t, &t).unwrap(), pow2_neg(6));
        // D = 1 trees that split different coordinates: Σ|K − K'| = 2.
        let mut seeds = (0..).map(|s| CenteredTree::new(s, 1, p.clone()));
        let a = seeds.find(|t| t.coordinate_at(&[]) == 0).unwrap();
        let b = seeds.find(|t| t.coordinate_at(&[]) == 1).unwrap();
        assert_eq!(overlap_via_counts(&x, &a, &b).unwrap(), 0.25);
        let ca = a.route(&x).unwrap().cell;
        let cb = b.route(&x).unwrap().cell;
        assert_eq!(cell::overlap_volume(&ca, &cb).unwrap(), 0.25);
    }

    #[test]
    fn overlap_requires_equal_depth() {
        let p = probs(&[1.0]);
        let a = CenteredTree::new(1, 3, p.clone());
        let b = CenteredTree::new(2, 4, p);
        assert!(matches!(
            overlap_via_counts(&[0.5], &a, &b),
            Err(Error::DepthMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn zero_probability_coordinates_never_split() {
        let tree = CenteredTree::new(8, 30, probs(&[0.0, 1.0, 0.0]));
        assert_eq!(tree.route_counts(&[0.5, 0.5, 0.5]).unwrap(), vec![0, 30, 0]);
    }
}
