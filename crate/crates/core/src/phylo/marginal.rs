//! Priors, marginal likelihoods and tree posteriors.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::jc::RateModel;
use super::likelihood::counts_log_likelihood;
use super::patterns::{
    pattern_probs_3taxon, quartet_probs_unchecked, ClockBranchLengths, QuartetBranches, SitePatternCounts, Topology3,
    Topology4,
};
use crate::error::{domain, Error, Result};
use crate::quad::GaussLegendre;
use crate::rng::replicate_rng;
use crate::special::log_sum_exp;

/// Exponential branch-length priors: `mean_t0`/`mean_t1` for 3-taxon clock
/// trees, `mean_all` for each of the five quartet branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyloPrior {
    pub mean_t0: f64,
    pub mean_t1: f64,
    pub mean_all: f64,
}

impl PhyloPrior {
    pub fn new(mean_t0: f64, mean_t1: f64, mean_all: f64) -> Result<Self> {
        for (name, m) in [("mean_t0", mean_t0), ("mean_t1", mean_t1), ("mean_all", mean_all)] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(domain(format!("{name} must be positive, got {m}")));
            }
        }
        Ok(Self { mean_t0, mean_t1, mean_all })
    }

    pub fn ln_density_quartet(&self, bl: &QuartetBranches) -> f64 {
        let rate = 1.0 / self.mean_all;
        bl.iter().map(|t| rate.ln() - rate * t).sum()
    }
}

impl Default for PhyloPrior {
    fn default() -> Self {
        Self { mean_t0: 0.1, mean_t1: 0.2, mean_all: 0.1 }
    }
}

/// Posterior probabilities of the three binary trees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreePosterior {
    pub p: [f64; 3],
    /// Empty for quadrature; chain gap and acceptance rates for MCMC.
    pub diagnostics: BTreeMap<String, f64>,
    pub converged: bool,
}

impl TreePosterior {
    pub fn from_log_marginals(lm: [f64; 3]) -> Result<Self> {
        if lm.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite(format!("log marginals {lm:?}")));
        }
        let total = log_sum_exp(&lm);
        if total == f64::NEG_INFINITY {
            return Err(Error::NonFinite("all marginal likelihoods are zero".into()));
        }
        Ok(Self { p: lm.map(|v| (v - total).exp()), diagnostics: BTreeMap::new(), converged: true })
    }
}

fn require_taxa(counts: &SitePatternCounts, taxa: u8) -> Result<()> {
    if counts.taxa() != taxa {
        return Err(domain(format!("expected {taxa}-taxon counts, got {}", counts.taxa())));
    }
    Ok(())
}

// Counts re-indexed so T1's class probabilities score topology `topo`:
// T2 trades xxy with yxx, T3 trades xxy with xyx.
fn counts_for_topology(c: &[u64], topo: Topology3) -> [u64; 5] {
    match topo {
        Topology3::T2 => [c[0], c[2], c[1], c[3], c[4]],
        Topology3::T3 => [c[0], c[3], c[2], c[1], c[4]],
        Topology3::T1 | Topology3::Star => [c[0], c[1], c[2], c[3], c[4]],
    }
}

// Nodes on (0,1) in u = 1 − exp(−t/m), with weights summing to 1.
fn unit_rule(points: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(points).on_interval(0.0, 1.0).collect()
}

fn from_unit(u: f64, mean: f64) -> f64 {
    -mean * (-u).ln_1p()
}

fn log_integral(terms: &[f64]) -> Result<f64> {
    if terms.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("quadrature integrand".into()));
    }
    Ok(log_sum_exp(terms))
}

/// Log marginals of T1, T2, T3 from one pass over the (t0, t1) grid.
pub fn log_marginals_3taxon(counts: &SitePatternCounts, prior: &PhyloPrior, points_per_dim: usize) -> Result<[f64; 3]> {
    require_taxa(counts, 3)?;
    if points_per_dim == 0 {
        return Err(domain("need at least one quadrature point"));
    }
    let rule = unit_rule(points_per_dim);
    let permuted = Topology3::BINARY.map(|t| counts_for_topology(counts.counts(), t));
    let mut terms: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(rule.len() * rule.len()));
    let jc = RateModel::jc();
    for &(u0, w0) in &rule {
        let t0 = from_unit(u0, prior.mean_t0);
        for &(u1, w1) in &rule {
            let bl = ClockBranchLengths { t0, t1: from_unit(u1, prior.mean_t1) };
            let p = pattern_probs_3taxon(Topology3::T1, bl, &jc)?;
            let lw = (w0 * w1).ln();
            for (k, c) in permuted.iter().enumerate() {
                terms[k].push(lw + counts_log_likelihood(c, &p));
            }
        }
    }
    Ok([log_integral(&terms[0])?, log_integral(&terms[1])?, log_integral(&terms[2])?])
}

/// log ∫∫ L(t0, t1) π(t0) π(t1) under JC, by Gauss–Legendre after mapping
/// each exponential prior to the unit interval. `Star` integrates `t1` only.
pub fn log_marginal_quadrature_3taxon(
    counts: &SitePatternCounts,
    topo: Topology3,
    prior: &PhyloPrior,
    points_per_dim: usize,
) -> Result<f64> {
    match topo {
        Topology3::Star => {
            require_taxa(counts, 3)?;
            if points_per_dim == 0 {
                return Err(domain("need at least one quadrature point"));
            }
            let mut terms = Vec::with_capacity(points_per_dim);
            for (u, w) in unit_rule(points_per_dim) {
                let bl = ClockBranchLengths { t0: 0.0, t1: from_unit(u, prior.mean_t1) };
                let p = pattern_probs_3taxon(Topology3::Star, bl, &RateModel::jc())?;
                terms.push(w.ln() + counts_log_likelihood(counts.counts(), &p));
            }
            log_integral(&terms)
        }
        Topology3::T1 => Ok(log_marginals_3taxon(counts, prior, points_per_dim)?[0]),
        Topology3::T2 => Ok(log_marginals_3taxon(counts, prior, points_per_dim)?[1]),
        Topology3::T3 => Ok(log_marginals_3taxon(counts, prior, points_per_dim)?[2]),
    }
}

/// Posterior of T1, T2, T3 under a uniform tree prior.
pub fn tree_posteriors_3taxon(counts: &SitePatternCounts, prior: &PhyloPrior, points_per_dim: usize) -> Result<TreePosterior> {
    TreePosterior::from_log_marginals(log_marginals_3taxon(counts, prior, points_per_dim)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    pub mc_se: f64,
    pub ess: f64,
    /// Set when the effective sample size is below 100.
    pub flagged: bool,
}

pub const MIN_IMPORTANCE_SAMPLES: usize = 10_000;

/// Log marginal of a quartet topology under JC by averaging the likelihood
/// over prior draws of the five branch lengths.
pub fn importance_log_marginal_4taxon(
    counts: &SitePatternCounts,
    topo: Topology4,
    prior: &PhyloPrior,
    samples: usize,
    seed: u64,
) -> Result<ImportanceEstimate> {
    require_taxa(counts, 4)?;
    if samples < MIN_IMPORTANCE_SAMPLES {
        return Err(domain(format!("need at least {MIN_IMPORTANCE_SAMPLES} samples, got {samples}")));
    }
    let exp = Exp::new(1.0 / prior.mean_all).map_err(|e| domain(e.to_string()))?;
    let mut rng = replicate_rng(seed, "importance", topo.index().unwrap_or(3) as u64);
    let jc = RateModel::jc();
    let lls: Vec<f64> = (0..samples)
        .map(|_| {
            let mut bl: QuartetBranches = std::array::from_fn(|_| exp.sample(&mut rng));
            if topo == Topology4::Star {
                bl[0] = 0.0;
            }
            counts_log_likelihood(counts.counts(), &quartet_probs_unchecked(topo, &bl, &jc))
        })
        .collect();
    let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NonFinite("every prior draw has zero likelihood".into()));
    }
    let w: Vec<f64> = lls.iter().map(|l| (l - max).exp()).collect();
    let n = samples as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let ess = w.iter().sum::<f64>().powi(2) / w.iter().map(|x| x * x).sum::<f64>();
    Ok(ImportanceEstimate {
        estimate: max + mean.ln(),
        mc_se: (var / n).sqrt() / mean,
        ess,
        flagged: ess < 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::likelihood::simulate_alignment;
    use crate::rng::seeded_rng;

    fn counts3(c: [u64; 5]) -> SitePatternCounts {
        SitePatternCounts::new(3, c.to_vec()).unwrap()
    }

    #[test]
    fn empty_data_integrates_prior() {
        let prior = PhyloPrior::default();
        let lm = log_marginals_3taxon(&counts3([0; 5]), &prior, 32).unwrap();
        for v in lm {
            assert!(v.abs() < 1e-13);
        }
        let star = log_marginal_quadrature_3taxon(&counts3([0; 5]), Topology3::Star, &prior, 16).unwrap();
        assert!(star.abs() < 1e-13);
    }

    #[test]
    fn symmetric_counts_give_uniform_posterior() {
        let post = tree_posteriors_3taxon(&counts3([700, 60, 60, 60, 120]), &PhyloPrior::default(), 64).unwrap();
        for p in post.p {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permuted_counts_match_direct_topologies() {
        let counts = counts3([620, 140, 90, 70, 80]);
        let prior = PhyloPrior::default();
        let lm = log_marginals_3taxon(&counts, &prior, 24).unwrap();
        let rule = unit_rule(24);
        for (k, topo) in Topology3::BINARY.iter().enumerate() {
            let mut terms = Vec::new();
            for &(u0, w0) in &rule {
                for &(u1, w1) in &rule {
                    let bl = ClockBranchLengths { t0: from_unit(u0, 0.1), t1: from_unit(u1, 0.2) };
                    let p = pattern_probs_3taxon(*topo, bl, &RateModel::jc()).unwrap();
                    terms.push((w0 * w1).ln() + counts_log_likelihood(counts.counts(), &p));
                }
            }
            assert!((log_sum_exp(&terms) - lm[k]).abs() < 1e-9);
        }
        let post = tree_posteriors_3taxon(&counts, &prior, 24).unwrap();
        assert!(post.p[0] > post.p[1] && post.p[1] > post.p[2]);
        assert!((post.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_prior_sampling() {
        let truth = pattern_probs_3taxon(Topology3::T1, ClockBranchLengths::new(0.05, 0.2).unwrap(), &RateModel::jc()).unwrap();
        let counts = simulate_alignment(&truth, 100, 5).unwrap();
        let prior = PhyloPrior::default();
        let quad = log_marginal_quadrature_3taxon(&counts, Topology3::T1, &prior, 128).unwrap();
        let mut rng = seeded_rng(6);
        let (e0, e1) = (Exp::new(10.0).unwrap(), Exp::new(5.0).unwrap());
        let lls: Vec<f64> = (0..200_000)
            .map(|_| {
                let bl = ClockBranchLengths { t0: e0.sample(&mut rng), t1: e1.sample(&mut rng) };
                counts_log_likelihood(counts.counts(), &pattern_probs_3taxon(Topology3::T1, bl, &RateModel::jc()).unwrap())
            })
            .collect();
        let max = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lls.iter().map(|l| (l - max).exp()).collect();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let se = sd / n.sqrt() / mean;
        let mc = max + mean.ln();
        assert!((mc - quad).abs() < 3.0 * se, "quad {quad} mc {mc} se {se}");
    }

    #[test]
    fn importance_sampling_bounds() {
        let prior = PhyloPrior::default();
        let empty = SitePatternCounts::new(4, vec![0; 15]).unwrap();
        let est = importance_log_marginal_4taxon(&empty, Topology4::T1, &prior, 10_000, 1).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(!est.flagged);
        let probs = quartet_probs_unchecked(Topology4::T1, &[0.05, 0.1, 0.1, 0.1, 0.1], &RateModel::jc());
        let counts = simulate_alignment(&probs, 100, 2).unwrap();
        let est = importance_log_marginal_4taxon(&counts, Topology4::T1, &prior, 20_000, 3).unwrap();
        assert!(est.estimate.is_finite() && est.mc_se > 0.0);
        assert!(importance_log_marginal_4taxon(&counts, Topology4::T1, &prior, 100, 3).is_err());
    }
}
