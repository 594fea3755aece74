use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::normal_cdf;

/// Per-observation variance C of the log-likelihood ratio and the data size n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkSpec {
    step_variance: f64,
    n: u64,
}

impl RandomWalkSpec {
    pub fn new(step_variance: f64, n: u64) -> Result<Self> {
        if !(step_variance > 0.0 && step_variance.is_finite()) {
            return Err(domain(format!("step variance must be positive, got {step_variance}")));
        }
        if n == 0 {
            return Err(domain("data size must be positive"));
        }
        Ok(Self { step_variance, n })
    }

    /// Two-point steps ±log(p1/p2) with probability ½ each.
    pub fn coin(p1: f64, p2: f64, n: u64) -> Result<Self> {
        Self::new((p1 / p2).ln().powi(2), n)
    }

    pub fn step_variance(&self) -> f64 {
        self.step_variance
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Mean and variance of Δₙ for equally wrong models: (0, nC).
pub fn random_walk_moments(spec: &RandomWalkSpec) -> (f64, f64) {
    (0.0, spec.n as f64 * spec.step_variance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonextremeProbability {
    /// 1 − 2Φ(−A/√(nC))
    pub normal: f64,
    /// 2A/√(2πnC)
    pub small: f64,
}

/// P{α < P₁ < 1−α} under the normal approximation to the walk.
///
/// α = ½ is accepted and yields 0 (the interval is empty).
pub fn prob_nonextreme_walk(alpha: f64, spec: &RandomWalkSpec) -> Result<NonextremeProbability> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(domain(format!("alpha must lie in (0, 1/2], got {alpha}")));
    }
    let a = ((1.0 - alpha) / alpha).ln();
    let sd = (spec.n as f64 * spec.step_variance).sqrt();
    Ok(NonextremeProbability {
        normal: 1.0 - 2.0 * normal_cdf(-a / sd),
        small: 2.0 * a / (2.0 * std::f64::consts::PI).sqrt() / sd,
    })
}
