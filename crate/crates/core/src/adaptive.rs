//! Data-driven coordinate selection.
//!
//! Candidate coordinates are scored with the weighted within-node sum of
//! squares left after the best split along that coordinate (the CART
//! criterion), computed on a second sample independent of the training data.
//! Selection probabilities are then the frequencies with which each
//! coordinate wins at the root.
//!
//! The noiseless linear model admits a closed-form score, `|β_j|² 4^{-K_j-2}`,
//! which [`adaptive_linear_tree`] uses directly.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::DyadicCell;
use crate::data::{Dataset, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream};
use crate::tree::SelectionProbs;

/// Relative tolerance under which two criterion values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// How the candidate subset `𝓜_n` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetSampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

impl SubsetSampling {
    /// Distinct coordinates of a random subset of size `m` drawn from `0..dim`.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R, dim: usize, m: usize) -> Vec<usize> {
        let mut picked = match self {
            SubsetSampling::WithoutReplacement => index::sample(rng, dim, m).into_vec(),
            SubsetSampling::WithReplacement => (0..m).map(|_| rng.random_range(0..dim)).collect(),
        };
        picked.sort_unstable();
        picked.dedup();
        picked
    }
}

/// A candidate split and its criterion value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEvaluation {
    pub coord: usize,
    pub split: f64,
    pub delta: f64,
}

/// Split counts of one adaptive tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveCounts {
    pub k: Vec<u32>,
}

impl AdaptiveCounts {
    pub fn total(&self) -> u64 {
        self.k.iter().map(|&v| u64::from(v)).sum()
    }
}

fn sum_sq_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|y| (y - mean) * (y - mean)).sum()
}

fn ties(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(scale)
}

/// `Δ̂ = (1/N)Σ_L (y − ȳ_L)² + (1/N)Σ_R (y − ȳ_R)²`.
pub fn empirical_delta(left: &[f64], right: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "node sample size must be positive"));
    }
    if left.len() + right.len() != n {
        return Err(invalid(
            "n",
            format!("{} points on the two sides but N = {n}", left.len() + right.len()),
        ));
    }
    Ok((sum_sq_dev(left) + sum_sq_dev(right)) / n as f64)
}

/// `(x_j, y)` pairs of the points in `node`, sorted by `x_j`.
fn node_column(data: &Dataset, node: &DyadicCell, j: usize) -> Result<Vec<(f64, f64)>> {
    if node.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: node.dim(),
        });
    }
    if j >= data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: j + 1,
        });
    }
    let mut column: Vec<(f64, f64)> = (0..data.len())
        .filter(|&i| node.contains(data.x(i)))
        .map(|i| (data.x(i)[j], data.ys()[i]))
        .collect();
    column.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(column)
}

/// `Δ̂` before any split: the node's sum of squares over `N`.
pub fn node_delta(data: &Dataset, node: &DyadicCell) -> Result<f64> {
    let ys: Vec<f64> = node_column(data, node, 0)?.into_iter().map(|p| p.1).collect();
    if ys.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(sum_sq_dev(&ys) / ys.len() as f64)
}

/// `Δ̂(j, s, t)` for an explicit split position.
pub fn evaluate_split(data: &Dataset, node: &DyadicCell, j: usize, split: f64) -> Result<f64> {
    let column = node_column(data, node, j)?;
    let left: Vec<f64> = column.iter().filter(|p| p.0 <= split).map(|p| p.1).collect();
    let right: Vec<f64> = column.iter().filter(|p| p.0 > split).map(|p| p.1).collect();
    empirical_delta(&left, &right, column.len())
}

/// Best split `s*_j` of `node` along `j` over midpoints between consecutive
/// distinct sample values. Ties go to the smallest split.
pub fn best_split(data: &Dataset, node: &DyadicCell, j: usize) -> Result<SplitEvaluation> {
    let column = node_column(data, node, j)?;
    let n = column.len();
    if n < 2 || column[0].0 == column[n - 1].0 {
        return Err(Error::Unsplittable { coord: j });
    }
    // Centering first keeps the prefix-sum form from cancelling.
    let mean = column.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let total: f64 = column.iter().map(|p| p.1 - mean).sum();
    let total_sq: f64 = column.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
    let scale = total_sq / n as f64;

    let mut best: Option<SplitEvaluation> = None;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n - 1 {
        let y = column[i].1 - mean;
        s1 += y;
        s2 += y * y;
        if column[i].0 == column[i + 1].0 {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let sse_left = s2 - s1 * s1 / nl;
        let r1 = total - s1;
        let sse_right = (total_sq - s2) - r1 * r1 / nr;
        let delta = ((sse_left + sse_right) / n as f64).max(0.0);
        let candidate = SplitEvaluation {
            coord: j,
            split: 0.5 * (column[i].0 + column[i + 1].0),
            delta,
        };
        match best {
            Some(b) if delta >= b.delta || ties(delta, b.delta, scale) => {}
            _ => best = Some(candidate),
        }
    }
    best.ok_or(Error::Unsplittable { coord: j })
}

/// Draws `𝓜_n`, scores each coordinate by its best `Δ̂`, and returns a
/// uniform pick among the minimizers. Unsplittable coordinates score `+∞`;
/// if every coordinate is unsplittable the pick is uniform over `𝓜_n`.
pub fn select_coordinate<R: Rng + ?Sized>(
    data: &Dataset,
    node: &DyadicCell,
    m_n: usize,
    sampling: SubsetSampling,
    rng: &mut R,
) -> Result<usize> {
    let d = data.dim();
    if m_n == 0 || m_n > d {
        return Err(invalid("m_n", format!("{m_n} is not in 1..={d}")));
    }
    let candidates = sampling.draw(rng, d, m_n);
    let mut scores = Vec::with_capacity(candidates.len());
    for &j in &candidates {
        match best_split(data, node, j) {
            Ok(eval) => scores.push(eval.delta),
            Err(Error::Unsplittable { .. }) => scores.push(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_infinite() {
        return Ok(candidates[rng.random_range(0..candidates.len())]);
    }
    let scale = node_delta(data, node)?;
    let winners: Vec<usize> = candidates
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s.is_finite() && ties(s, min, scale))
        .map(|(&j, _)| j)
        .collect();
    Ok(winners[rng.random_range(0..winners.len())])
}

/// Where the second sample `𝒟′_n` comes from in a selection experiment.
#[derive(Debug, Clone, Copy)]
pub enum SelectionSource<'a> {
    /// One fixed sample; only the subset draw and tie-breaks vary.
    Fixed(&'a Dataset),
    /// A fresh sample of size `n` per trial.
    Fresh { model: &'a ModelSpec, n: usize },
}

/// Root-cell selection frequencies over `trials` independent trials.
///
/// Trial `t` uses the stream `derive_seed(seed, t)`.
pub fn estimate_selection_probs(
    source: SelectionSource<'_>,
    m_n: usize,
    sampling: SubsetSampling,
    trials: usize,
    seed: u64,
) -> Result<SelectionProbs> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let dim = match source {
        SelectionSource::Fixed(data) => data.dim(),
        SelectionSource::Fresh { model, .. } => model.dim,
    };
    let root = DyadicCell::unit(dim);
    let picks: Vec<usize> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(derive_seed(seed, t));
            match source {
                SelectionSource::Fixed(data) => select_coordinate(data, &root, m_n, sampling, &mut rng),
                SelectionSource::Fresh { model, n } => {
                    let data = model.sample(n, &mut rng)?;
                    select_coordinate(&data, &root, m_n, sampling, &mut rng)
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut freq = vec![0.0; dim];
    for j in picks {
        freq[j] += 1.0;
    }
    freq.iter_mut().for_each(|v| *v /= trials as f64);
    SelectionProbs::new(freq)
}

/// Large-sample approximation `(1/S)[1 − (1 − S/d)^{M_n}](1 + ξ)` of a strong
/// coordinate's selection probability.
pub fn approx_strong_probability(strong: usize, dim: usize, m_n: usize, xi: f64) -> f64 {
    let s = strong as f64;
    (1.0 / s) * (1.0 - (1.0 - s / dim as f64).powi(m_n as i32)) * (1.0 + xi)
}

/// One tree of the noiseless linear-model procedure: at each of `depth`
/// steps draw `𝓜_n`, split the coordinate maximizing `|β_j|² 4^{-K_j-2}`
/// (uniform among ties) and increment its count.
pub fn adaptive_linear_tree<R: Rng + ?Sized>(
    beta: &[f64],
    m_n: usize,
    depth: u32,
    sampling: SubsetSampling,
    rng: &mut R,
) -> Result<AdaptiveCounts> {
    let d = beta.len();
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(invalid("beta", "coefficients must be finite"));
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Err(invalid("beta", "at least one coefficient must be non-zero"));
    }
    if m_n == 0 || m_n > d {
        return Err(invalid("m_n", format!("{m_n} is not in 1..={d}")));
    }
    // log2 of the score; exact integer steps keep equal-|β| ties exact.
    let log_weight: Vec<f64> = beta.iter().map(|b| 2.0 * b.abs().log2()).collect();
    let mut k = vec![0u32; d];
    let mut winners = Vec::with_capacity(d);
    for _ in 0..depth {
        let candidates = sampling.draw(rng, d, m_n);
        let score = |j: usize| log_weight[j] - 2.0 * (f64::from(k[j]) + 2.0);
        let best = candidates.iter().map(|&j| score(j)).fold(f64::NEG_INFINITY, f64::max);
        winners.clear();
        if best == f64::NEG_INFINITY {
            winners.extend_from_slice(&candidates);
        } else {
            winners.extend(
                candidates
                    .iter()
                    .copied()
                    .filter(|&j| (score(j) - best).abs() <= TIE_TOLERANCE * best.abs().max(1.0)),
            );
        }
        let pick = winners[rng.random_range(0..winners.len())];
        k[pick] += 1;
    }
    Ok(AdaptiveCounts { k })
}

/// `count` independent adaptive trees; tree `t` uses stream `derive_seed(seed, t)`.
pub fn adaptive_forest_counts(
    beta: &[f64],
    m_n: usize,
    depth: u32,
    sampling: SubsetSampling,
    count: usize,
    seed: u64,
) -> Result<Vec<AdaptiveCounts>> {
    (0..count as u64)
        .into_par_iter()
        .map(|t| adaptive_linear_tree(beta, m_n, depth, sampling, &mut stream(derive_seed(seed, t))))
        .collect()
}

/// Approximate split counts for `|β_1| ≥ … ≥ |β_S| > 0` at depth `D`:
/// `D/S − (1/S)log₂(|β_j|/|β_S|)` for `j < S` and
/// `D/S + (1/S)Σ_{j<S} log₂(|β_j|/|β_S|)` for the last coordinate.
pub fn approx_split_counts(beta: &[f64], depth: u32) -> Result<Vec<f64>> {
    let s = beta.len();
    if s == 0 {
        return Err(invalid("beta", "empty coefficient vector"));
    }
    if let Some(j) = beta.iter().position(|&b| b == 0.0 || !b.is_finite()) {
        return Err(invalid("beta", format!("coefficient {j} must be finite and non-zero")));
    }
    if beta.windows(2).any(|w| w[0].abs() < w[1].abs()) {
        return Err(invalid("beta", "coefficients must be ordered by decreasing magnitude"));
    }
    let base = f64::from(depth) / s as f64;
    let last = beta[s - 1].abs();
    let logs: Vec<f64> = beta[..s - 1].iter().map(|b| (b.abs() / last).log2()).collect();
    let mut out: Vec<f64> = logs.iter().map(|l| base - l / s as f64).collect();
    out.push(base + logs.iter().sum::<f64>() / s as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RegressionFunction;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn delta_examples() {
        assert_eq!(empirical_delta(&[0.0, 0.0], &[1.0, 1.0], 4).unwrap(), 0.0);
        assert_eq!(empirical_delta(&[0.0, 1.0], &[0.0, 1.0], 4).unwrap(), 0.25);
        let v = [1.0, 2.0, 4.0];
        let sse = sum_sq_dev(&v);
        assert_eq!(empirical_delta(&v, &[], 3).unwrap(), sse / 3.0);
        assert!(empirical_delta(&[], &[], 0).is_err());
        assert!(empirical_delta(&[1.0], &[2.0], 3).is_err());
    }

    #[test]
    fn delta_shift_invariant() {
        let l = [0.3, 1.7, -2.0];
        let r = [5.0, 4.5];
        let shifted: (Vec<f64>, Vec<f64>) = (
            l.iter().map(|v| v + 10.0).collect(),
            r.iter().map(|v| v + 10.0).collect(),
        );
        assert!(close(
            empirical_delta(&l, &r, 5).unwrap(),
            empirical_delta(&shifted.0, &shifted.1, 5).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn indicator_split_is_perfect() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 + 0.5) / 20.0, 0.3]).collect();
        let ys = rows.iter().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::from_rows(&rows, ys).unwrap();
        let eval = best_split(&data, &DyadicCell::unit(2), 0).unwrap();
        assert_eq!(eval.delta, 0.0);
        assert_eq!(eval.split, 0.5);
        assert!(matches!(
            best_split(&data, &DyadicCell::unit(2), 1),
            Err(Error::Unsplittable { coord: 1 })
        ));
    }

    #[test]
    fn constant_response_ties_to_smallest_split() {
        let rows: Vec<Vec<f64>> = [0.1, 0.4, 0.2, 0.8].iter().map(|&v| vec![v]).collect();
        let data = Dataset::from_rows(&rows, vec![3.3; 4]).unwrap();
        let eval = best_split(&data, &DyadicCell::unit(1), 0).unwrap();
        assert!(eval.delta.abs() < 1e-12);
        assert!(close(eval.split, 0.15, 1e-15));
    }

    #[test]
    fn best_split_respects_node() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 + 0.5) / 40.0]).collect();
        let ys = rows.iter().map(|r| r[0]).collect();
        let data = Dataset::from_rows(&rows, ys).unwrap();
        let (_, right) = DyadicCell::unit(1).split(0).unwrap();
        let eval = best_split(&data, &right, 0).unwrap();
        assert!(eval.split > 0.5 && eval.split < 1.0);
        assert!(close(eval.split, 0.75, 0.02));
    }

    #[test]
    fn single_point_is_unsplittable() {
        let data = Dataset::from_rows(&[vec![0.2]], vec![1.0]).unwrap();
        assert!(matches!(
            best_split(&data, &DyadicCell::unit(1), 0),
            Err(Error::Unsplittable { .. })
        ));
        let mut rng = stream(0);
        assert_eq!(
            select_coordinate(
                &data,
                &DyadicCell::unit(1),
                1,
                SubsetSampling::WithoutReplacement,
                &mut rng
            )
            .unwrap(),
            0
        );
    }

    #[test]
    fn perfect_coordinate_always_wins() {
        let model = ModelSpec::new(3, RegressionFunction::Indicator { strong: vec![2] }, 0.0).unwrap();
        let data = model.sample(200, &mut stream(1)).unwrap();
        let mut rng = stream(2);
        for _ in 0..20 {
            let j = select_coordinate(
                &data,
                &DyadicCell::unit(3),
                3,
                SubsetSampling::WithoutReplacement,
                &mut rng,
            )
            .unwrap();
            assert_eq!(j, 2);
        }
        assert!(select_coordinate(
            &data,
            &DyadicCell::unit(3),
            4,
            SubsetSampling::WithoutReplacement,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn single_trial_is_one_hot() {
        let model = ModelSpec::linear(vec![1.0, 1.0, 0.0], 0.1).unwrap();
        let p = estimate_selection_probs(
            SelectionSource::Fresh { model: &model, n: 100 },
            3,
            SubsetSampling::WithoutReplacement,
            1,
            4,
        )
        .unwrap();
        assert_eq!(p.as_slice().iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(p.as_slice().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn strong_probability_approximation() {
        assert!(close(
            approx_strong_probability(2, 6, 6, 0.0),
            0.5 * (1.0 - (2.0f64 / 3.0).powi(6)),
            1e-15
        ));
        assert!(close(approx_strong_probability(3, 3, 1, 0.0), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn linear_tree_alternates() {
        let counts =
            adaptive_linear_tree(&[1.0, 1.0], 2, 4, SubsetSampling::WithoutReplacement, &mut stream(0)).unwrap();
        assert_eq!(counts.k, vec![2, 2]);
        let lone = adaptive_linear_tree(&[1.0, 0.0], 2, 5, SubsetSampling::WithoutReplacement, &mut stream(0)).unwrap();
        assert_eq!(lone.k, vec![5, 0]);
        assert!(adaptive_linear_tree(&[0.0, 0.0], 2, 5, SubsetSampling::WithoutReplacement, &mut stream(0)).is_err());
        assert!(adaptive_linear_tree(&[1.0], 2, 5, SubsetSampling::WithoutReplacement, &mut stream(0)).is_err());
    }

    #[test]
    fn linear_tree_weak_coordinates_stay_unsplit() {
        let beta = [0.9, -0.4, 0.0, 0.0, 0.7];
        let counts = adaptive_linear_tree(&beta, 5, 200, SubsetSampling::WithoutReplacement, &mut stream(3)).unwrap();
        assert_eq!(counts.total(), 200);
        assert_eq!(counts.k[2], 0);
        assert_eq!(counts.k[3], 0);
    }

    #[test]
    fn approximate_counts() {
        assert_eq!(approx_split_counts(&[1.0, 1.0, 1.0, 1.0], 12).unwrap(), vec![3.0; 4]);
        assert_eq!(approx_split_counts(&[2.0, 1.0], 10).unwrap(), vec![4.5, 5.5]);
        let k = approx_split_counts(&[0.9, -0.5, 0.3, 0.1], 100).unwrap();
        assert!(close(k.iter().sum::<f64>(), 100.0, 1e-12));
        assert!(approx_split_counts(&[1.0, 0.0], 4).is_err());
        assert!(approx_split_counts(&[1.0, 2.0], 4).is_err());
    }

    #[test]
    fn two_coefficient_example_near_approximation() {
        let approx = approx_split_counts(&[2.0, 1.0], 10).unwrap();
        let slack = 1.0 + 2f64.log2();
        for seed in 0..50 {
            let counts = adaptive_linear_tree(
                &[2.0, 1.0],
                2,
                10,
                SubsetSampling::WithoutReplacement,
                &mut stream(seed),
            )
            .unwrap();
            assert!(counts.k == vec![5, 5] || counts.k == vec![6, 4], "{:?}", counts.k);
            for (k, a) in counts.k.iter().zip(&approx) {
                assert!((f64::from(*k) - a).abs() <= slack);
            }
        }
    }
}
