//! Metropolis–Hastings over quartet topologies and branch lengths.
//!
//! Moves: a multiplier on one branch, `t' = t·exp(λ(U − ½))` with Hastings
//! factor `t'/t`, or a jump to one of the two other topologies chosen
//! uniformly. Branch `k` is attached to taxon `k` in every topology, so the
//! jump keeps all five lengths and is its own reverse.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jc::RateModel;
use super::likelihood::counts_log_likelihood;
use super::marginal::{PhyloPrior, TreePosterior};
use super::patterns::{quartet_probs_unchecked, QuartetBranches, SitePatternCounts, Topology4};
use crate::error::{domain, Result};
use crate::rng::{replicate_rng, ReplicateRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: u64,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub chains: usize,
}

impl McmcConfig {
    pub const CONVERGENCE_GAP: f64 = 0.02;

    pub fn new(iterations: u64, seed: u64) -> Self {
        Self { iterations, burn_in_fraction: 0.25, seed, chains: 2 }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations < 4 {
            return Err(domain("MCMC needs at least 4 iterations"));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(domain(format!("burn-in fraction must lie in [0,1), got {}", self.burn_in_fraction)));
        }
        if self.chains == 0 {
            return Err(domain("need at least one chain"));
        }
        Ok(())
    }
}

const TOPOLOGY_MOVE_PROB: f64 = 1.0 / 6.0;
const TUNE_BATCH: u32 = 50;

struct ChainResult {
    visits: [u64; 3],
    draws: u64,
    branch_accept: (u64, u64),
    topology_accept: (u64, u64),
}

struct State {
    topo: usize,
    bl: QuartetBranches,
    log_lik: f64,
    log_prior: f64,
}

fn log_lik(counts: &[u64], topo: usize, bl: &QuartetBranches) -> f64 {
    counts_log_likelihood(counts, &quartet_probs_unchecked(Topology4::BINARY[topo], bl, &RateModel::jc()))
}

fn run_chain(counts: &[u64], prior: &PhyloPrior, cfg: &McmcConfig, rng: &mut ReplicateRng) -> Result<ChainResult> {
    let exp = Exp::new(1.0 / prior.mean_all).map_err(|e| domain(e.to_string()))?;
    let bl: QuartetBranches = std::array::from_fn(|_| exp.sample(rng));
    let topo = rng.random_range(0..3usize);
    let mut s = State { topo, bl, log_lik: log_lik(counts, topo, &bl), log_prior: prior.ln_density_quartet(&bl) };
    let burn_in = (cfg.iterations as f64 * cfg.burn_in_fraction).floor() as u64;
    let mut lambda = [2.0 * 2f64.ln(); 5];
    let mut batch = [(0u32, 0u32); 5];
    let mut result = ChainResult { visits: [0; 3], draws: 0, branch_accept: (0, 0), topology_accept: (0, 0) };

    for it in 0..cfg.iterations {
        let sampling = it >= burn_in;
        if rng.random::<f64>() < TOPOLOGY_MOVE_PROB {
            let proposal = (s.topo + rng.random_range(1..3usize)) % 3;
            let ll = log_lik(counts, proposal, &s.bl);
            let accept = ll - s.log_lik >= 0.0 || rng.random::<f64>().ln() < ll - s.log_lik;
            if accept {
                s.topo = proposal;
                s.log_lik = ll;
            }
            if sampling {
                result.topology_accept.1 += 1;
                result.topology_accept.0 += u64::from(accept);
            }
        } else {
            let k = rng.random_range(0..5usize);
            let factor = (lambda[k] * (rng.random::<f64>() - 0.5)).exp();
            let mut bl = s.bl;
            bl[k] *= factor;
            let ll = log_lik(counts, s.topo, &bl);
            let lp = prior.ln_density_quartet(&bl);
            let log_ratio = ll - s.log_lik + lp - s.log_prior + factor.ln();
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                s.bl = bl;
                s.log_lik = ll;
                s.log_prior = lp;
            }
            if sampling {
                result.branch_accept.1 += 1;
                result.branch_accept.0 += u64::from(accept);
            } else {
                // Steer each branch's window toward 20–50% acceptance.
                let b = &mut batch[k];
                b.0 += u32::from(accept);
                b.1 += 1;
                if b.1 == TUNE_BATCH {
                    let rate = f64::from(b.0) / f64::from(b.1);
                    if rate < 0.2 {
                        lambda[k] = (lambda[k] / 1.5).max(1e-3);
                    } else if rate > 0.5 {
                        lambda[k] = (lambda[k] * 1.5).min(20.0);
                    }
                    *b = (0, 0);
                }
            }
        }
        if sampling {
            result.visits[s.topo] += 1;
        }
    }
    result.draws = rng.draws();
    Ok(result)
}

/// Posterior of the three quartet topologies from post-burn-in visit
/// frequencies, pooled over independent chains run in parallel.
pub fn mcmc_tree_posteriors_4taxon(counts: &SitePatternCounts, prior: &PhyloPrior, config: &McmcConfig) -> Result<TreePosterior> {
    if counts.taxa() != 4 {
        return Err(domain(format!("expected 4-taxon counts, got {}", counts.taxa())));
    }
    config.validate()?;
    let chains: Vec<ChainResult> = (0..config.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = replicate_rng(config.seed, "mcmc", c);
            run_chain(counts.counts(), prior, config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let freq = |r: &ChainResult| {
        let total: u64 = r.visits.iter().sum();
        r.visits.map(|v| v as f64 / total as f64)
    };
    let mut gap = 0.0_f64;
    for k in 0..3 {
        let fs: Vec<f64> = chains.iter().map(|r| freq(r)[k]).collect();
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        gap = gap.max(hi - lo);
    }
    let mut visits = [0u64; 3];
    let (mut ba, mut bt, mut ta, mut tt) = (0, 0, 0, 0);
    for r in &chains {
        for k in 0..3 {
            visits[k] += r.visits[k];
        }
        ba += r.branch_accept.0;
        bt += r.branch_accept.1;
        ta += r.topology_accept.0;
        tt += r.topology_accept.1;
    }
    let total: u64 = visits.iter().sum();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("chain_gap".to_string(), gap);
    diagnostics.insert("branch_acceptance".to_string(), ba as f64 / bt.max(1) as f64);
    diagnostics.insert("topology_acceptance".to_string(), ta as f64 / tt.max(1) as f64);
    diagnostics.insert("rng_draws".to_string(), chains.iter().map(|r| r.draws).sum::<u64>() as f64);
    Ok(TreePosterior {
        p: visits.map(|v| v as f64 / total as f64),
        diagnostics,
        converged: gap <= McmcConfig::CONVERGENCE_GAP,
    })
}
