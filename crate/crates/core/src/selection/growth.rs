use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{replicate_rng, ReplicateRng};

const BOOTSTRAP_RESAMPLES: usize = 2_000;
/// Two-sided level of the percentile interval.
pub const GROWTH_CI_LEVEL: f64 = 0.99;

/// Log-log slope of sd(Δₙ) against n, with a 99% percentile bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthOrder {
    pub slope: f64,
    pub ci: (f64, f64),
    /// Sample standard deviation of Δₙ at each grid point.
    pub sd_by_n: Vec<(u64, f64)>,
}

fn sample_sd(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Estimates the stochastic order of Δₙ from `reps` draws at each grid size.
///
/// A slope near ½ indicates Θ_p(√n); near 0 indicates Θ_p(1).
pub fn estimate_growth_order<S>(sampler: S, n_grid: &[u64], reps: usize, seed: u64) -> Result<GrowthOrder>
where
    S: Fn(u64, &mut ReplicateRng) -> f64 + Sync,
{
    if n_grid.len() < 4 {
        return Err(domain("growth-order grid needs at least 4 points"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(domain("growth-order grid must be positive and strictly increasing"));
    }
    if (n_grid[n_grid.len() - 1] as f64) < 100.0 * n_grid[0] as f64 {
        return Err(domain("growth-order grid must span at least two decades"));
    }
    if reps < 3 {
        return Err(domain("growth-order estimate needs at least 3 replicates per size"));
    }
    let samples: Vec<Vec<f64>> = n_grid
        .iter()
        .map(|&n| {
            (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replicate_rng(seed, &format!("growth-{n}"), i as u64);
                    sampler(n, &mut rng)
                })
                .collect()
        })
        .collect();
    let log_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let sds: Vec<f64> = samples.iter().map(|s| sample_sd(s)).collect();
    if let Some((i, _)) = sds.iter().enumerate().find(|(_, &sd)| !(sd > 0.0) || !sd.is_finite()) {
        return Err(Error::Degenerate(format!("zero or non-finite spread of samples at n = {}", n_grid[i])));
    }
    let slope = ls_slope(&log_n, &sds.iter().map(|s| s.ln()).collect::<Vec<_>>());

    let mut rng = replicate_rng(seed, "growth-bootstrap", 0);
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let ys: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let re: Vec<f64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                    sample_sd(&re).max(f64::MIN_POSITIVE).ln()
                })
                .collect();
            ls_slope(&log_n, &ys)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - GROWTH_CI_LEVEL) * BOOTSTRAP_RESAMPLES as f64;
    let lo = boot[tail as usize];
    let hi = boot[BOOTSTRAP_RESAMPLES - 1 - tail as usize];
    Ok(GrowthOrder {
        slope,
        ci: (lo, hi),
        sd_by_n: n_grid.iter().copied().zip(sds).collect(),
    })
}
