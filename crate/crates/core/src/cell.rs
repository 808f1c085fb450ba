//! Dyadic cells: products of half-open intervals `[a, a + 2^-K)` whose left
//! endpoints are integer multiples of `2^-K`.
//!
//! Endpoints are held as integer numerators so every endpoint, width and
//! volume is exact as long as each per-coordinate split count stays within
//! the `f64` mantissa.

use crate::error::{Error, Result};

/// Largest per-coordinate split count whose endpoints are exact in `f64`.
pub const EXACT_SPLIT_LIMIT: u32 = 53;

/// `2^-e` as an exact `f64`, including the subnormal range; `0.0` past it.
#[inline]
pub fn pow2_neg(e: u64) -> f64 {
    if e <= 1022 {
        f64::from_bits((1023 - e) << 52)
    } else if e <= 1074 {
        f64::from_bits(1u64 << (1074 - e))
    } else {
        0.0
    }
}

/// The `k`-th binary digit (1-based) of `x ∈ [0, 1)`.
///
/// Digits past the precision of `x` are zero, which matches the value `x`
/// actually holds.
#[inline]
pub fn binary_digit(x: f64, k: u32) -> u8 {
    debug_assert!(k >= 1);
    if k <= 64 {
        ((quantize(x) >> (64 - k)) & 1) as u8
    } else if k <= 1074 {
        let half = k / 2;
        let scaled = x * 2f64.powi(half as i32) * 2f64.powi((k - half) as i32);
        // Floats at or above 2^53 are even integers.
        if scaled.is_finite() && scaled < 9_007_199_254_740_992.0 {
            (scaled.floor() % 2.0) as u8
        } else {
            0
        }
    } else {
        0
    }
}

/// The first 64 binary digits of `x ∈ [0, 1)` as an integer.
///
/// `x * 2^64` is exact (a power-of-two scaling) and truncation of a positive
/// float is exact, so this is the true digit string.
#[inline]
pub fn quantize(x: f64) -> u64 {
    (x * 18_446_744_073_709_551_616.0) as u64
}

/// Interval of width `2^-k` obtained by stopping the binary expansion of `x`
/// after `k` digits.
pub fn endpoints_from_expansion(x: f64, k: u32) -> Result<(f64, f64)> {
    check_coordinate(0, x)?;
    if k > EXACT_SPLIT_LIMIT {
        return Err(Error::Precision {
            splits: k,
            limit: EXACT_SPLIT_LIMIT,
        });
    }
    let numerator = if k == 0 { 0 } else { quantize(x) >> (64 - k) };
    let width = pow2_neg(u64::from(k));
    let a = numerator as f64 * width;
    Ok((a, a + width))
}

pub(crate) fn check_coordinate(coord: usize, value: f64) -> Result<()> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutsideUnitCube { coord, value })
    }
}

pub(crate) fn check_point(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    x.iter().enumerate().try_for_each(|(j, &v)| check_coordinate(j, v))
}

/// A product of dyadic intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicCell {
    counts: Vec<u32>,
    prefixes: Vec<u64>,
}

impl DyadicCell {
    /// The whole unit cube `[0, 1)^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            counts: vec![0; dim],
            prefixes: vec![0; dim],
        }
    }

    /// Cell with side `j` equal to `[prefixes[j] 2^-counts[j], (prefixes[j] + 1) 2^-counts[j])`.
    pub fn new(counts: Vec<u32>, prefixes: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(crate::error::invalid("dim", "a cell needs at least one coordinate"));
        }
        if counts.len() != prefixes.len() {
            return Err(Error::DimensionMismatch {
                expected: counts.len(),
                got: prefixes.len(),
            });
        }
        for (j, (&k, &a)) in counts.iter().zip(&prefixes).enumerate() {
            if k > EXACT_SPLIT_LIMIT {
                return Err(Error::Precision {
                    splits: k,
                    limit: EXACT_SPLIT_LIMIT,
                });
            }
            if a >> k != 0 {
                return Err(crate::error::invalid(
                    "prefixes",
                    format!("numerator {a} of coordinate {j} is not below 2^{k}"),
                ));
            }
        }
        Ok(Self { counts, prefixes })
    }

    /// The cell at the given split counts that contains `x`.
    pub fn containing(x: &[f64], counts: &[u32]) -> Result<Self> {
        check_point(counts.len(), x)?;
        let prefixes = x
            .iter()
            .zip(counts)
            .map(|(&v, &k)| if k == 0 { 0 } else { quantize(v) >> (64 - k) })
            .collect();
        Self::new(counts.to_vec(), prefixes)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Split count `K_j` per coordinate.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn prefixes(&self) -> &[u64] {
        &self.prefixes
    }

    /// Total number of splits, i.e. the depth of the producing tree.
    pub fn depth(&self) -> u64 {
        self.counts.iter().map(|&k| u64::from(k)).sum()
    }

    pub fn width(&self, j: usize) -> f64 {
        pow2_neg(u64::from(self.counts[j]))
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.prefixes[j] as f64 * self.width(j)
    }

    pub fn upper(&self, j: usize) -> f64 {
        (self.prefixes[j] + 1) as f64 * self.width(j)
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.lower(j), self.upper(j))
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        (2 * self.prefixes[j] + 1) as f64 * pow2_neg(u64::from(self.counts[j]) + 1)
    }

    /// Exact Lebesgue measure, `2^-ΣK`.
    pub fn volume(&self) -> f64 {
        pow2_neg(self.depth())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(j, &v)| {
                (0.0..1.0).contains(&v)
                    && (self.counts[j] == 0 || quantize(v) >> (64 - self.counts[j]) == self.prefixes[j])
            })
    }

    /// Halves the cell along `j`, returning `(left, right)`.
    pub fn split(&self, j: usize) -> Result<(Self, Self)> {
        if j >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: j + 1,
            });
        }
        if self.counts[j] >= EXACT_SPLIT_LIMIT {
            return Err(Error::Precision {
                splits: self.counts[j] + 1,
                limit: EXACT_SPLIT_LIMIT,
            });
        }
        let mut left = self.clone();
        left.counts[j] += 1;
        left.prefixes[j] <<= 1;
        let mut right = left.clone();
        right.prefixes[j] |= 1;
        Ok((left, right))
    }

    /// Exponent `e` with `λ(self ∩ other) = 2^-e`, or `None` when disjoint.
    pub fn overlap_log2(&self, other: &Self) -> Result<Option<u64>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut exponent = 0u64;
        for j in 0..self.dim() {
            let (ka, kb) = (self.counts[j], other.counts[j]);
            // Dyadic intervals are either nested or disjoint.
            let (coarse_k, coarse, fine_k, fine) = if ka <= kb {
                (ka, self.prefixes[j], kb, other.prefixes[j])
            } else {
                (kb, other.prefixes[j], ka, self.prefixes[j])
            };
            if fine >> (fine_k - coarse_k) != coarse {
                return Ok(None);
            }
            exponent += u64::from(fine_k);
        }
        Ok(Some(exponent))
    }
}

/// Exact volume of the intersection of two cells.
pub fn overlap_volume(a: &DyadicCell, b: &DyadicCell) -> Result<f64> {
    Ok(a.overlap_log2(b)?.map_or(0.0, pow2_neg))
}
