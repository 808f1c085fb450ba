//! `E[2^{-½Σ|M_j − M′_j|}]` for independent multinomial vectors `M, M′`.
//!
//! This is the expected overlap factor of two independent trees at a common
//! point: the split counts of a depth-`D` tree along the root-to-leaf path of
//! `x` are Multinomial(`D`, `p`).

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use super::{pairwise_sum, Estimate};
use crate::cell::{overlap_volume, pow2_neg};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream};
use crate::tree::{CenteredTree, SelectionProbs};

/// Largest number of composition pairs the exact enumeration will visit.
pub const PAIR_LIMIT: u128 = 10_000_000;

const BLOCK: usize = 1 << 14;

fn check_probs(p: &[f64]) -> Result<()> {
    SelectionProbs::new(p.to_vec()).map(|_| ())
}

fn ln_factorials(m: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=m {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Number of compositions of `m` into `k` non-negative parts, saturating.
pub fn composition_count(m: u64, k: usize) -> u128 {
    // C(m + k - 1, k - 1) built incrementally; each partial product is itself binomial.
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = match c.checked_mul(u128::from(m) + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

fn compositions(m: u64, k: usize) -> Vec<Vec<u64>> {
    fn rec(left: u64, slot: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[slot] = c;
            rec(left - c, slot + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(m, 0, &mut vec![0; k], &mut out);
    out
}

fn multinomial_pmf(counts: &[u64], p: &[f64], lnf: &[f64], m: u64) -> f64 {
    let mut ln = lnf[m as usize];
    for (&c, &pj) in counts.iter().zip(p) {
        if c > 0 {
            if pj == 0.0 {
                return 0.0;
            }
            ln += c as f64 * pj.ln() - lnf[c as usize];
        }
    }
    ln.exp()
}

/// Exact value by enumerating every pair of compositions.
pub fn halving_exact(m: u64, p: &[f64]) -> Result<f64> {
    check_probs(p)?;
    let count = composition_count(m, p.len());
    let pairs = count.saturating_mul(count);
    if pairs > PAIR_LIMIT {
        return Err(Error::SupportTooLarge {
            terms: pairs,
            limit: PAIR_LIMIT,
        });
    }
    let lnf = ln_factorials(m);
    let support: Vec<(Vec<u64>, f64)> = compositions(m, p.len())
        .into_iter()
        .map(|c| {
            let w = multinomial_pmf(&c, p, &lnf, m);
            (c, w)
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let rows: Vec<f64> = support
        .iter()
        .map(|(a, wa)| {
            let terms: Vec<f64> = support
                .iter()
                .map(|(b, wb)| {
                    let l1: u64 = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum();
                    wb * pow2_neg(l1 / 2)
                })
                .collect();
            wa * pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

/// Exact value for `k = 2`, `p = (p1, 1 − p1)`, in `O(m²)` without the pair limit.
pub fn halving_binomial(m: u64, p1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(invalid("p1", format!("{p1} is outside [0, 1]")));
    }
    let lnf = ln_factorials(m);
    let pmf: Vec<f64> = (0..=m)
        .map(|i| multinomial_pmf(&[i, m - i], &[p1, 1.0 - p1], &lnf, m))
        .collect();
    let support: Vec<(u64, f64)> = pmf
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i as u64, w))
        .collect();
    let rows: Vec<f64> = support
        .iter()
        .map(|&(a, wa)| {
            let terms: Vec<f64> = support.iter().map(|&(b, wb)| wb * pow2_neg(a.abs_diff(b))).collect();
            wa * pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, m: u64, p: &[f64], out: &mut [u64]) {
    let mut left = m;
    let mut rest = 1.0;
    let last = p.len() - 1;
    for j in 0..last {
        if left == 0 || rest <= 0.0 {
            out[j] = 0;
            continue;
        }
        let q = (p[j] / rest).clamp(0.0, 1.0);
        let c = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[j] = c;
        left -= c;
        rest -= p[j];
    }
    out[last] = left;
}

/// Monte Carlo estimate from `samples` independent pairs. Block `b` of
/// `2^14` pairs uses stream `derive_seed(seed, b)`.
pub fn halving_mc(m: u64, p: &[f64], samples: usize, seed: u64) -> Result<Estimate> {
    check_probs(p)?;
    if samples < 2 {
        return Err(invalid("samples", "need at least 2"));
    }
    let blocks = samples.div_ceil(BLOCK);
    let values: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(derive_seed(seed, b as u64));
            let len = BLOCK.min(samples - b * BLOCK);
            let (mut a, mut c) = (vec![0; p.len()], vec![0; p.len()]);
            (0..len)
                .map(|_| {
                    sample_multinomial(&mut rng, m, p, &mut a);
                    sample_multinomial(&mut rng, m, p, &mut c);
                    let l1: u64 = a.iter().zip(&c).map(|(x, y)| x.abs_diff(*y)).sum();
                    pow2_neg(l1 / 2)
                })
                .collect()
        })
        .collect();
    Ok(Estimate::from_samples(&values.concat()))
}

/// How to evaluate the halving expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalvingMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Exact results carry a zero standard error.
pub fn halving_expectation(m: u64, p: &[f64], mode: HalvingMode) -> Result<Estimate> {
    match mode {
        HalvingMode::Exact => Ok(Estimate {
            mean: halving_exact(m, p)?,
            stderr: 0.0,
            count: 0,
        }),
        HalvingMode::MonteCarlo { samples, seed } => halving_mc(m, p, samples, seed),
    }
}

fn check_positive(m: u64, p: &[f64]) -> Result<()> {
    check_probs(p)?;
    if m == 0 {
        return Err(invalid("m", "must be positive"));
    }
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositive { index, value });
    }
    Ok(())
}

/// `8^{k−1} / √(m^{k−1} p_1⋯p_{k−1} p_k^{k−1})`.
pub fn multibound_upper(m: u64, p: &[f64]) -> Result<f64> {
    check_positive(m, p)?;
    let k = p.len();
    let e = (k - 1) as f64;
    let head: f64 = p[..k - 1].iter().product();
    Ok(8f64.powf(e) / ((m as f64).powf(e) * head * p[k - 1].powf(e)).sqrt())
}

/// `1 / √(m^{k−1} p_1⋯p_k)`; the lower bound is `C^{k−1}` times this.
pub fn multibound_lower_shape(m: u64, p: &[f64]) -> Result<f64> {
    check_positive(m, p)?;
    let e = (p.len() - 1) as f64;
    let prod: f64 = p.iter().product();
    Ok(1.0 / ((m as f64).powf(e) * prod).sqrt())
}

/// Smallest `C` for which `value ≥ C^{k−1}·shape`.
pub fn fitted_lower_constant(value: f64, m: u64, p: &[f64]) -> Result<f64> {
    if p.len() < 2 {
        return Err(invalid("p", "need at least two categories"));
    }
    let shape = multibound_lower_shape(m, p)?;
    Ok((value / shape).powf(1.0 / (p.len() - 1) as f64))
}

/// Exact `k = 2` value against `1/(ln 2 · √(π m p₁ p₂))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalApproxCheck {
    pub m: u64,
    pub p1: f64,
    pub exact: f64,
    pub approx: f64,
    pub ratio: f64,
}

pub fn normal_approx_check(m: u64, p1: f64) -> Result<NormalApproxCheck> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(invalid("p1", format!("{p1} is outside (0, 1)")));
    }
    if m == 0 {
        return Err(invalid("m", "must be positive"));
    }
    let exact = halving_binomial(m, p1)?;
    let approx = 1.0 / (std::f64::consts::LN_2 * (std::f64::consts::PI * m as f64 * p1 * (1.0 - p1)).sqrt());
    Ok(NormalApproxCheck {
        m,
        p1,
        exact,
        approx,
        ratio: exact / approx,
    })
}

/// `E[λ(A ∩ A′)] = 2^{−D}·E[2^{-½Σ|K − K′|}]` for two independent depth-`D` trees.
pub fn expected_overlap(p: &[f64], depth: u32, mode: HalvingMode) -> Result<Estimate> {
    let h = halving_expectation(u64::from(depth), p, mode)?;
    let scale = pow2_neg(u64::from(depth));
    Ok(Estimate {
        mean: h.mean * scale,
        stderr: h.stderr * scale,
        count: h.count,
    })
}

/// Direct estimate of the expected overlap: random `x`, two random trees,
/// geometric intersection of the two leaves containing `x`.
pub fn tree_pair_overlap_mc(probs: Arc<SelectionProbs>, depth: u32, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(invalid("samples", "need at least 2"));
    }
    let dim = probs.dim();
    let blocks = samples.div_ceil(BLOCK);
    let values: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(derive_seed(seed, b as u64));
            let len = BLOCK.min(samples - b * BLOCK);
            let mut x = vec![0.0; dim];
            (0..len)
                .map(|_| {
                    x.iter_mut().for_each(|v| *v = rng.random());
                    let a = CenteredTree::new(rng.random(), depth, probs.clone()).route(&x)?;
                    let c = CenteredTree::new(rng.random(), depth, probs.clone()).route(&x)?;
                    overlap_volume(&a.cell, &c.cell)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values.concat()))
}
