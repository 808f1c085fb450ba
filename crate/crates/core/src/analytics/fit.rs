//! Power-law exponent by least squares on `(ln scale, ln value)`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// `value ≈ e^{intercept} · scale^{exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

impl RateFit {
    /// Whether the exponent lies within `rel` relative error of `target`.
    pub fn within(&self, target: f64, rel: f64) -> bool {
        (self.exponent - target).abs() <= rel * target.abs()
    }
}

pub fn fit_rate_exponent(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid("points", format!("need at least 3, got {}", points.len())));
    }
    for (index, &(s, v)) in points.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositive { index, value: s });
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive { index, value: v });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all scales are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RateFit {
        exponent: slope,
        intercept,
        stderr,
        r_squared,
        points: points.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_power_laws() {
        let pts: Vec<(f64, f64)> = [2.0, 8.0, 32.0, 128.0]
            .iter()
            .map(|&s: &f64| (s, s.powf(-0.5)))
            .collect();
        let f = fit_rate_exponent(&pts).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-14);
        assert!(f.stderr < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 10.0].iter().map(|&s: &f64| (s, 3.0 * s * s)).collect();
        let f = fit_rate_exponent(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-13);
        assert!(f.within(2.0, 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_rate_exponent(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(matches!(
            fit_rate_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::NonPositive { index: 1, .. })
        ));
        assert!(fit_rate_exponent(&[(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn noisy_fit_has_positive_stderr() {
        let pts = [(1.0, 1.0), (2.0, 0.6), (4.0, 0.24), (8.0, 0.13)];
        let f = fit_rate_exponent(&pts).unwrap();
        assert!(f.stderr > 0.0 && f.r_squared < 1.0);
    }
}
