//! Closed-form risk bounds, rate exponents and the tuned leaf count.
//!
//! `log₂` appears where the bounds use base 2; `α_S` uses natural logs.
//! Bounds take the continuous `log₂ kₙ`, not the simulator's ceiling.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters shared by the upper and lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub n: f64,
    pub k: f64,
    pub s: u32,
    pub d: u32,
    pub sigma: f64,
    pub lipschitz: f64,
    pub sup_bound: f64,
    #[serde(default)]
    pub xi: f64,
    /// Use `B²` instead of `B` in the exponential remainder.
    #[serde(default)]
    pub square_sup_bound: bool,
}

impl BoundInputs {
    pub fn new(n: f64, k: f64, s: u32, d: u32) -> Self {
        Self {
            n,
            k,
            s,
            d,
            sigma: 0.0,
            lipschitz: 0.0,
            sup_bound: 0.0,
            xi: 0.0,
            square_sup_bound: false,
        }
    }

    pub fn sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    pub fn lipschitz(self, lipschitz: f64) -> Self {
        Self { lipschitz, ..self }
    }

    pub fn sup_bound(self, sup_bound: f64) -> Self {
        Self { sup_bound, ..self }
    }

    pub fn xi(self, xi: f64) -> Self {
        Self { xi, ..self }
    }

    /// `p_n = (1 + ξ)/S`.
    pub fn p(&self) -> f64 {
        (1.0 + self.xi) / f64::from(self.s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(invalid("n", format!("{} is not a positive sample size", self.n)));
        }
        if !(self.k >= 2.0 && self.k.is_finite()) {
            return Err(invalid("k", format!("{} is below 2", self.k)));
        }
        if self.s == 0 || self.s > self.d {
            return Err(invalid(
                "s",
                format!("need 1 <= S <= d, got S = {}, d = {}", self.s, self.d),
            ));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("lipschitz", self.lipschitz),
            ("sup_bound", self.sup_bound),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} is not a finite non-negative value")));
            }
        }
        let p = self.p();
        if !(p > 0.0 && p <= 1.0) {
            return Err(invalid("xi", format!("p_n = {p} is outside (0, 1]")));
        }
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("{p} is outside (0, 1]")))
    }
}

/// `α_S = 2ln(1 − p/2) / (2ln(1 − p/2) − ln 2)`.
pub fn alpha_exponent(p: f64) -> Result<f64> {
    check_p(p)?;
    let a = 2.0 * (1.0 - p / 2.0).ln();
    Ok(a / (a - std::f64::consts::LN_2))
}

/// `2log₂(1 − p/2)`, the exponent of `kₙ` in the leading bias term.
pub fn bias_exponent(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(2.0 * (1.0 - p / 2.0).log2())
}

/// `12σ²(k/n)(8S)^{S−1} / ((1+ξ)^{S−1} √(log₂^{S−1} k))`.
pub fn variance_upper_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let e = f64::from(b.s - 1);
    let s = f64::from(b.s);
    Ok(12.0 * b.sigma * b.sigma * (b.k / b.n) * (8.0 * s).powf(e) / ((1.0 + b.xi).powf(e) * b.k.log2().powf(e).sqrt()))
}

/// `SL²k^{2log₂(1−p/2)+1}/(n+1) + S²L²k^{2log₂(1−p/2)} + B e^{−n/(2k)}`.
pub fn bias_upper_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let e = bias_exponent(b.p())?;
    let s = f64::from(b.s);
    let l2 = b.lipschitz * b.lipschitz;
    let remainder = if b.square_sup_bound {
        b.sup_bound * b.sup_bound
    } else {
        b.sup_bound
    };
    Ok(s * l2 * b.k.powf(e + 1.0) / (b.n + 1.0) + s * s * l2 * b.k.powf(e) + remainder * (-b.n / (2.0 * b.k)).exp())
}

pub fn risk_upper_bound(b: &BoundInputs) -> Result<f64> {
    Ok(bias_upper_bound(b)? + variance_upper_bound(b)?)
}

/// `(S^{3−S}(L/σ)² n √(log₂^{S−1} n))^{1−α_S}` with `α_S` at `p = 1/S`.
pub fn optimal_leaf_count(n: f64, s: u32, lipschitz: f64, sigma: f64) -> Result<f64> {
    if !(n >= 2.0 && n.is_finite()) {
        return Err(invalid("n", format!("{n} is below 2")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", "must be positive"));
    }
    if s == 0 {
        return Err(invalid("s", "must be positive"));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
        return Err(invalid("lipschitz", "must be finite and non-negative"));
    }
    let sf = f64::from(s);
    let alpha = alpha_exponent(1.0 / sf)?;
    let base = sf.powf(3.0 - sf) * (lipschitz / sigma).powi(2) * n * n.log2().powf(sf - 1.0).sqrt();
    Ok(base.powf(1.0 - alpha))
}

/// Nearest power of two to `k` in `log₂`, at least 2.
pub fn round_to_power_of_two(k: f64) -> u64 {
    let e = k.log2().round().clamp(1.0, 62.0);
    1u64 << e as u32
}

/// Rate exponents `γ` in `n^{−γ}` for one `(S, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRates {
    pub new: f64,
    pub biau: f64,
    pub minimax_d: f64,
    pub minimax_s: f64,
    pub approx_new: f64,
}

pub fn reference_rates(s: u32, d: u32) -> Result<ReferenceRates> {
    if s == 0 || s > d {
        return Err(invalid("s", format!("need 1 <= S <= d, got S = {s}, d = {d}")));
    }
    let sf = f64::from(s);
    let ln2 = std::f64::consts::LN_2;
    Ok(ReferenceRates {
        new: alpha_exponent(1.0 / sf)?,
        biau: 1.0 / (sf * (4.0 / 3.0) * ln2 + 1.0),
        minimax_d: 2.0 / (f64::from(d) + 2.0),
        minimax_s: 2.0 / (sf + 2.0),
        approx_new: 1.0 / (sf * ln2 + 1.0),
    })
}

/// Lower-bound shapes, scaled by a caller-chosen constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundForms {
    pub variance_floor: f64,
    pub bias_floor: f64,
}

/// Variance floor `C^{S−1} S^{S/2} σ² k / (n √(log₂^{S−1} k))` and
/// linear-model bias floor `C ‖β‖² k^{2log₂(1 − 1/(2S))}`.
pub fn lower_bound_forms(b: &BoundInputs, beta_norm: f64, c: f64) -> Result<LowerBoundForms> {
    b.validate()?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", "constant must be positive"));
    }
    let s = f64::from(b.s);
    let e = s - 1.0;
    let variance_floor = c.powf(e) * s.powf(s / 2.0) * b.sigma * b.sigma * b.k / (b.n * b.k.log2().powf(e).sqrt());
    let bias_floor = c * beta_norm * beta_norm * b.k.powf(bias_exponent(1.0 / s)?);
    Ok(LowerBoundForms {
        variance_floor,
        bias_floor,
    })
}
