//! Multinomial likelihood, alignment simulation and pseudo-true branch lengths.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::jc::RateModel;
use super::optimize::maximize_nonneg;
use super::patterns::{
    pattern_probs_3taxon, pattern_probs_4taxon, ClockBranchLengths, QuartetBranches, SitePatternCounts, Topology3,
    Topology4, QUARTET_CLASSES, TRIPLET_CLASSES,
};
use crate::error::{domain, Result};
use crate::rng::seeded_rng;

/// `Σ count_j log p_j`. A positive count on a zero-probability class gives −∞.
pub fn log_likelihood(counts: &SitePatternCounts, probs: &[f64]) -> Result<f64> {
    if counts.counts().len() != probs.len() {
        return Err(domain(format!(
            "{} counts against {} probabilities",
            counts.counts().len(),
            probs.len()
        )));
    }
    Ok(counts_log_likelihood(counts.counts(), probs))
}

pub(crate) fn counts_log_likelihood(counts: &[u64], probs: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += c as f64 * p.ln();
    }
    total
}

fn check_simplex(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(domain("pattern probabilities must form a simplex"));
    }
    Ok(())
}

/// Multinomial class counts drawn by sequential binomials.
pub fn simulate_counts<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Result<Vec<u64>> {
    check_simplex(probs)?;
    let mut counts = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).map_err(|e| domain(e.to_string()))?.sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= p;
        if mass <= 0.0 {
            break;
        }
    }
    Ok(counts)
}

/// A seeded alignment of `n` sites; the taxon count follows from `probs.len()`.
pub fn simulate_alignment(probs: &[f64], n: u64, seed: u64) -> Result<SitePatternCounts> {
    let taxa = match probs.len() {
        TRIPLET_CLASSES => 3,
        QUARTET_CLASSES => 4,
        k => return Err(domain(format!("no pattern layout has {k} classes"))),
    };
    let mut rng = seeded_rng(seed);
    SitePatternCounts::new(taxa, simulate_counts(probs, n, &mut rng)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestFit {
    /// `[t0, t1]` for 3 taxa, `[t0, t1, t2, t3, t4]` for 4.
    pub params: Vec<f64>,
    /// Expected per-site log-likelihood `Σ q_j log p_j` at the optimum.
    pub objective: f64,
    pub at_boundary: Vec<bool>,
    pub iterations: usize,
}

const FIT_TOLERANCE: f64 = 1e-9;
const FIT_MAX_ITER: usize = 2000;

fn expected_log_lik(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .map(|(&qj, &pj)| if qj == 0.0 { 0.0 } else if pj <= 0.0 { f64::NEG_INFINITY } else { qj * pj.ln() })
        .sum()
}

/// Pseudo-true (t0, t1) of clock tree `analysis` when data come from `generating`.
pub fn best_fit_params_3taxon(
    analysis: Topology3,
    rates_analysis: &RateModel,
    generating: (Topology3, ClockBranchLengths),
    rates_generating: &RateModel,
) -> Result<BestFit> {
    let q = pattern_probs_3taxon(generating.0, generating.1, rates_generating)?;
    let objective = |x: &[f64]| {
        let bl = ClockBranchLengths { t0: x[0], t1: x[1] };
        pattern_probs_3taxon(analysis, bl, rates_analysis).map_or(f64::NEG_INFINITY, |p| expected_log_lik(&q, &p))
    };
    let start = [generating.1.t0.max(0.05), generating.1.t1.max(0.05)];
    let opt = maximize_nonneg(objective, &start, FIT_TOLERANCE, FIT_MAX_ITER)?;
    Ok(BestFit { params: opt.x, objective: opt.value, at_boundary: opt.at_boundary, iterations: opt.iterations })
}

/// Pseudo-true branch lengths of unrooted `analysis` when data come from `generating`.
pub fn best_fit_params_4taxon(
    analysis: Topology4,
    rates_analysis: &RateModel,
    generating: (Topology4, QuartetBranches),
    rates_generating: &RateModel,
) -> Result<BestFit> {
    let q = pattern_probs_4taxon(generating.0, &generating.1, rates_generating)?;
    let objective = |x: &[f64]| {
        let bl: QuartetBranches = x.try_into().expect("five branch lengths");
        pattern_probs_4taxon(analysis, &bl, rates_analysis).map_or(f64::NEG_INFINITY, |p| expected_log_lik(&q, &p))
    };
    let start = generating.1.map(|t| t.max(0.05));
    let opt = maximize_nonneg(objective, &start, FIT_TOLERANCE, FIT_MAX_ITER)?;
    Ok(BestFit { params: opt.x, objective: opt.value, at_boundary: opt.at_boundary, iterations: opt.iterations })
}
