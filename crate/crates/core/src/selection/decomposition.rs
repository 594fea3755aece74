use serde::{Deserialize, Serialize};

/// log(M/g(x)) = A + B + C for one model on one dataset, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    /// log M − log f(x|θ̂)
    pub a: f64,
    /// log f(x|θ̂) − log f(x|θ*)
    pub b: f64,
    /// log f(x|θ*) − log g(x)
    pub c: f64,
}

impl DecompositionTerms {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c
    }

    /// Model-1 minus model-2 terms: (ΔA, ΔB, ΔC).
    pub fn difference(&self, other: &Self) -> Self {
        Self { a: self.a - other.a, b: self.b - other.b, c: self.c - other.c }
    }
}

pub fn decompose_log_marginal(
    log_marginal: f64,
    log_like_at_mle: f64,
    log_like_at_pseudotrue: f64,
    log_true_density: f64,
) -> DecompositionTerms {
    DecompositionTerms {
        a: log_marginal - log_like_at_mle,
        b: log_like_at_mle - log_like_at_pseudotrue,
        c: log_like_at_pseudotrue - log_true_density,
    }
}
