//! Jukes–Cantor transition probabilities and among-site rate variation.

use crate::error::{domain, Result};

/// (P(same base), P(a specific different base)) after branch length `t` at rate `rate`.
pub fn jc_transition(t: f64, rate: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(domain(format!("branch length must be non-negative, got {t}")));
    }
    if !(rate > 0.0) {
        return Err(domain(format!("rate must be positive, got {rate}")));
    }
    let e = (-4.0 * rate * t / 3.0).exp();
    Ok((0.25 + 0.75 * e, 0.25 - 0.25 * e))
}

/// Gamma(α, α) rate variation; α = ∞ is plain JC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    alpha: f64,
}

impl RateModel {
    pub fn jc() -> Self {
        Self { alpha: f64::INFINITY }
    }

    pub fn gamma(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(domain(format!("gamma shape must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_jc(&self) -> bool {
        self.alpha.is_infinite()
    }

    /// E[exp(−4rL/3)] over the rate distribution.
    ///
    /// Every JC pattern probability is affine in products of per-branch
    /// `exp(−4rt/3)` factors, so this one expectation is all the rate
    /// integration the pattern code needs.
    pub fn decay(&self, length: f64) -> f64 {
        if self.is_jc() {
            (-4.0 * length / 3.0).exp()
        } else {
            (1.0 + 4.0 * length / (3.0 * self.alpha)).powf(-self.alpha)
        }
    }
}
