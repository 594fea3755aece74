use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Asymptotic behavior of the posterior model probability as n → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BehaviorClass {
    /// P₁ converges to a point (identical or overlapping models).
    Type1ConvergesToPoint,
    /// P₁ converges to a nondegenerate distribution.
    Type2NondegenerateDistribution,
    /// P₁ goes to 0 or 1, each in half of the datasets.
    Type3RandomWalk,
    FewerParamsDominates,
    LessWrongDominates,
}

/// Gaps below this many nats count as "equally wrong".
pub const EQUAL_WRONGNESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStructure {
    /// The two best-fitting densities differ on a set of positive measure.
    pub distinct: bool,
    pub d1: u32,
    pub d2: u32,
    /// D₁ − D₂ in nats.
    pub equally_wrong_gap: f64,
    pub identical_or_overlapping: bool,
}

impl ComparisonStructure {
    pub fn new(distinct: bool, d1: u32, d2: u32, equally_wrong_gap: f64, identical_or_overlapping: bool) -> Result<Self> {
        if identical_or_overlapping && distinct {
            return Err(domain("identical or overlapping models cannot be distinct"));
        }
        if !equally_wrong_gap.is_finite() {
            return Err(domain("divergence gap must be finite"));
        }
        Ok(Self { distinct, d1, d2, equally_wrong_gap, identical_or_overlapping })
    }
}

pub fn classify_behavior(s: &ComparisonStructure) -> BehaviorClass {
    if s.identical_or_overlapping {
        BehaviorClass::Type1ConvergesToPoint
    } else if s.equally_wrong_gap.abs() > EQUAL_WRONGNESS_TOLERANCE {
        BehaviorClass::LessWrongDominates
    } else if s.distinct {
        // Random walk in ΔC swamps the log n term of ΔA.
        BehaviorClass::Type3RandomWalk
    } else if s.d1 == s.d2 {
        BehaviorClass::Type2NondegenerateDistribution
    } else {
        BehaviorClass::FewerParamsDominates
    }
}
