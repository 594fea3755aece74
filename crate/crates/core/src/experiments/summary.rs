//! Ensemble summaries of posterior probability vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub reps: usize,
    /// threshold → P{P_min < threshold}
    pub prob_min_below: BTreeMap<String, f64>,
    /// threshold → P{P_max > threshold}
    pub prob_max_above: BTreeMap<String, f64>,
    pub mean_min: f64,
    pub mean_max: f64,
    /// Per model k: threshold → P{P_k < threshold}
    pub component_below: Vec<BTreeMap<String, f64>>,
    /// Per model k: threshold → P{P_k > threshold}
    pub component_above: Vec<BTreeMap<String, f64>>,
    pub component_mean: Vec<f64>,
    /// Standard errors keyed like the statistic they belong to.
    pub mc_se: BTreeMap<String, f64>,
}

pub fn threshold_key(t: f64) -> String {
    format!("{t}")
}

fn fraction<I: Iterator<Item = bool>>(flags: I, reps: usize) -> f64 {
    flags.filter(|&b| b).count() as f64 / reps as f64
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone, reps: usize) -> (f64, f64) {
    let n = reps as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if reps < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Extreme-probability proportions and means over an ensemble of
/// posterior vectors, each with its Monte Carlo standard error.
pub fn summarize_replicates(samples: &[Vec<f64>], thresholds: &[f64]) -> Result<SummaryStats> {
    let reps = samples.len();
    if reps == 0 {
        return Err(domain("no replicates to summarize"));
    }
    let k = samples[0].len();
    if k < 2 || samples.iter().any(|s| s.len() != k) {
        return Err(domain("every sample must have the same length of at least 2"));
    }
    if samples.iter().any(|s| s.iter().any(|p| !(0.0..=1.0).contains(p)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9) {
        return Err(domain("samples must be probability vectors"));
    }
    let mins: Vec<f64> = samples.iter().map(|s| s.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let maxs: Vec<f64> = samples.iter().map(|s| s.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let se = |p: f64| (p * (1.0 - p) / reps as f64).sqrt();
    let mut mc_se = BTreeMap::new();
    let mut prob_min_below = BTreeMap::new();
    let mut prob_max_above = BTreeMap::new();
    let mut component_below = vec![BTreeMap::new(); k];
    let mut component_above = vec![BTreeMap::new(); k];
    for &t in thresholds {
        let key = threshold_key(t);
        let below = fraction(mins.iter().map(|&m| m < t), reps);
        let above = fraction(maxs.iter().map(|&m| m > t), reps);
        mc_se.insert(format!("prob_min_below[{key}]"), se(below));
        mc_se.insert(format!("prob_max_above[{key}]"), se(above));
        prob_min_below.insert(key.clone(), below);
        prob_max_above.insert(key.clone(), above);
        for c in 0..k {
            let b = fraction(samples.iter().map(|s| s[c] < t), reps);
            let a = fraction(samples.iter().map(|s| s[c] > t), reps);
            mc_se.insert(format!("component_below[{c}][{key}]"), se(b));
            mc_se.insert(format!("component_above[{c}][{key}]"), se(a));
            component_below[c].insert(key.clone(), b);
            component_above[c].insert(key.clone(), a);
        }
    }
    let (mean_min, se_min) = mean_and_se(mins.iter().copied(), reps);
    let (mean_max, se_max) = mean_and_se(maxs.iter().copied(), reps);
    mc_se.insert("mean_min".into(), se_min);
    mc_se.insert("mean_max".into(), se_max);
    let mut component_mean = Vec::with_capacity(k);
    for c in 0..k {
        let (m, s) = mean_and_se(samples.iter().map(|v| v[c]), reps);
        component_mean.push(m);
        mc_se.insert(format!("component_mean[{c}]"), s);
    }
    Ok(SummaryStats {
        reps,
        prob_min_below,
        prob_max_above,
        mean_min,
        mean_max,
        component_below,
        component_above,
        component_mean,
        mc_se,
    })
}

/// Barycentric histogram over the triangle with `bins` divisions per side.
///
/// Row `i` covers `i ≤ bins·P₁ < i + 1`; within it, upright cells
/// `(i, j)` exist for `i + j ≤ bins − 1` and inverted ones for
/// `i + j ≤ bins − 2`, for `bins²` cells in all.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TernaryHistogram {
    pub bins: usize,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TernaryCell {
    pub i: usize,
    pub j: usize,
    pub upright: bool,
}

impl TernaryHistogram {
    pub fn cell_of(bins: usize, p: [f64; 3]) -> TernaryCell {
        let a = (p[0] * bins as f64).clamp(0.0, bins as f64);
        let b = (p[1] * bins as f64).clamp(0.0, bins as f64);
        let i = (a.floor() as usize).min(bins - 1);
        let j = (b.floor() as usize).min(bins - 1 - i);
        let (fa, fb) = (a - i as f64, b - j as f64);
        let upright = i + j >= bins - 1 || fa + fb <= 1.0;
        TernaryCell { i, j, upright }
    }

    pub fn index(bins: usize, cell: TernaryCell) -> usize {
        // Row r holds 2(bins − r) − 1 cells.
        let offset: usize = (0..cell.i).map(|r| 2 * (bins - r) - 1).sum();
        offset + 2 * cell.j + usize::from(!cell.upright)
    }

    pub fn cells(bins: usize) -> Vec<TernaryCell> {
        let mut out = Vec::with_capacity(bins * bins);
        for i in 0..bins {
            for j in 0..bins - i {
                out.push(TernaryCell { i, j, upright: true });
                if i + j + 1 < bins {
                    out.push(TernaryCell { i, j, upright: false });
                }
            }
        }
        out
    }

    pub fn central_cell(bins: usize) -> TernaryCell {
        Self::cell_of(bins, [1.0 / 3.0; 3])
    }

    pub fn count(&self, cell: TernaryCell) -> u64 {
        self.counts[Self::index(self.bins, cell)]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,upright,count\n");
        for cell in Self::cells(self.bins) {
            s.push_str(&format!("{},{},{},{}\n", cell.i, cell.j, u8::from(cell.upright), self.count(cell)));
        }
        s
    }
}

pub fn ternary_histogram(samples: &[[f64; 3]], bins: usize) -> Result<TernaryHistogram> {
    if bins == 0 {
        return Err(domain("need at least one bin"));
    }
    let mut counts = vec![0u64; bins * bins];
    for p in samples {
        counts[TernaryHistogram::index(bins, TernaryHistogram::cell_of(bins, *p))] += 1;
    }
    Ok(TernaryHistogram { bins, counts })
}
