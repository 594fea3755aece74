//! Fair-coin paradox: two point-mass binomial models compared on x heads in
//! n tosses, with exact (binomial) and normal-approximation probabilities
//! of non-extreme posteriors.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{derive_seed, replicate_rng};
use crate::selection::NonextremeProbability;
use crate::special::{ln_binomial_pmf, logistic, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinComparison {
    pub p_true: f64,
    pub p1: f64,
    pub p2: f64,
}

impl CoinComparison {
    pub fn new(p_true: f64, p1: f64, p2: f64) -> Result<Self> {
        for (name, p) in [("p_true", p_true), ("p1", p1), ("p2", p2)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(domain(format!("{name} must lie in (0,1), got {p}")));
            }
        }
        if p1 == p2 {
            return Err(domain("the two coin models must differ"));
        }
        Ok(Self { p_true, p1, p2 })
    }

    /// H₁: 0.4 vs H₂: 0.6 under a fair coin.
    pub fn fair_coin_paradox() -> Self {
        Self { p_true: 0.5, p1: 0.4, p2: 0.6 }
    }

    /// p₂ = 1 − p₁, so the log-odds depend on x only through 2x − n.
    pub fn is_symmetric(&self) -> bool {
        (self.p1 + self.p2 - 1.0).abs() < 1e-15
    }

    /// log(P₁/P₂) = x log(p₁/p₂) + (n − x) log((1−p₁)/(1−p₂)).
    pub fn log_odds(&self, n: u64, x: u64) -> f64 {
        let (heads, tails) = self.per_outcome();
        x as f64 * heads + (n - x) as f64 * tails
    }

    // Symmetric pairs give tails == -heads exactly, so x = n/2 maps to 0.
    fn per_outcome(&self) -> (f64, f64) {
        (self.p1.ln() - self.p2.ln(), (1.0 - self.p1).ln() - (1.0 - self.p2).ln())
    }

    /// log-odds = slope·x + per_trial·n
    fn log_odds_coefficients(&self) -> (f64, f64) {
        let (heads, tails) = self.per_outcome();
        (heads - tails, tails)
    }

    /// Integer x in [0, n] whose log-odds lie strictly inside (lo, hi).
    fn x_range(&self, n: u64, lo: f64, hi: f64) -> Option<(u64, u64)> {
        let (slope, per_trial) = self.log_odds_coefficients();
        let inside = |x: u64| {
            let l = self.log_odds(n, x);
            l > lo && l < hi
        };
        // Real-valued solution, then nudge the integer ends using the
        // actual log-odds so ties fall on the open side.
        let a = (lo - per_trial * n as f64) / slope;
        let b = (hi - per_trial * n as f64) / slope;
        let (xmin, xmax) = if a < b { (a, b) } else { (b, a) };
        if xmax < 0.0 || xmin > n as f64 {
            return None;
        }
        let clamp = |v: f64| v.clamp(0.0, n as f64);
        let mut first = clamp(xmin.floor()) as u64;
        let mut last = clamp(xmax.ceil()) as u64;
        while first <= last && !inside(first) {
            first += 1;
            if first > n {
                return None;
            }
        }
        while last >= first && !inside(last) {
            if last == 0 {
                return None;
            }
            last -= 1;
        }
        (first <= last && inside(first)).then_some((first, last))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinDataset {
    pub n: u64,
    pub x: u64,
}

impl CoinDataset {
    pub fn new(n: u64, x: u64) -> Result<Self> {
        if n == 0 {
            return Err(domain("number of tosses must be positive"));
        }
        if x > n {
            return Err(domain(format!("heads {x} exceed tosses {n}")));
        }
        Ok(Self { n, x })
    }
}

/// P₁ under a uniform model prior.
pub fn coin_posterior(data: &CoinDataset, cmp: &CoinComparison) -> f64 {
    logistic(cmp.log_odds(data.n, data.x))
}

/// The set of x giving α < P₁ < 1 − α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NonextremeRegion {
    /// |2x − n| < b
    Symmetric { b: f64 },
    /// lower(n) < x < upper(n), with both bounds linear in n.
    Linear { lower_intercept: f64, upper_intercept: f64, per_n: f64 },
}

impl NonextremeRegion {
    /// Open interval of real x values for data size n.
    pub fn x_interval(&self, n: u64) -> (f64, f64) {
        let nf = n as f64;
        match *self {
            NonextremeRegion::Symmetric { b } => (0.5 * (nf - b), 0.5 * (nf + b)),
            NonextremeRegion::Linear { lower_intercept, upper_intercept, per_n } => {
                (lower_intercept + per_n * nf, upper_intercept + per_n * nf)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(domain(format!("alpha must lie in (0, 1/2], got {alpha}")));
    }
    Ok(())
}

pub fn nonextreme_threshold(alpha: f64, cmp: &CoinComparison) -> Result<NonextremeRegion> {
    check_alpha(alpha)?;
    let a = ((1.0 - alpha) / alpha).ln();
    if cmp.is_symmetric() {
        return Ok(NonextremeRegion::Symmetric { b: (a / (cmp.p1 / cmp.p2).ln()).abs() });
    }
    let (slope, per_trial) = cmp.log_odds_coefficients();
    let (e1, e2) = (-a / slope, a / slope);
    Ok(NonextremeRegion::Linear {
        lower_intercept: e1.min(e2),
        upper_intercept: e1.max(e2),
        per_n: -per_trial / slope,
    })
}

/// Σ_{x=lo}^{hi} Binomial(x; n, p), summed outward from the largest term.
pub fn binomial_range_prob(n: u64, p: f64, lo: u64, hi: u64) -> f64 {
    if lo > hi || lo > n {
        return 0.0;
    }
    let hi = hi.min(n);
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let start = mode.clamp(lo, hi);
    let ratio_up = p / (1.0 - p);
    let mut sum = 1.0;
    let mut term = 1.0;
    for x in start..hi {
        term *= (n - x) as f64 / (x + 1) as f64 * ratio_up;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    term = 1.0;
    for x in (lo + 1..=start).rev() {
        term *= x as f64 / (n - x + 1) as f64 / ratio_up;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    (ln_binomial_pmf(n, start, p) + sum.ln()).exp()
}

fn prob_log_odds_between(n: u64, cmp: &CoinComparison, lo: f64, hi: f64) -> f64 {
    match cmp.x_range(n, lo, hi) {
        Some((a, b)) => binomial_range_prob(n, cmp.p_true, a, b),
        None => 0.0,
    }
}

/// Exact P{α < P₁ < 1−α} with x ~ Binomial(n, p_true).
pub fn prob_nonextreme_exact(n: u64, alpha: f64, cmp: &CoinComparison) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(domain("number of tosses must be positive"));
    }
    let a = ((1.0 - alpha) / alpha).ln();
    Ok(prob_log_odds_between(n, cmp, -a, a))
}

/// Normal approximation for the symmetric comparison under a fair coin.
pub fn prob_nonextreme_normal(n: u64, alpha: f64, cmp: &CoinComparison) -> Result<NonextremeProbability> {
    if cmp.p_true != 0.5 || !cmp.is_symmetric() {
        return Err(domain("normal approximation assumes a fair coin and p2 = 1 - p1"));
    }
    if n == 0 {
        return Err(domain("number of tosses must be positive"));
    }
    let b = match nonextreme_threshold(alpha, cmp)? {
        NonextremeRegion::Symmetric { b } => b,
        NonextremeRegion::Linear { .. } => unreachable!("symmetric comparison"),
    };
    let root_n = (n as f64).sqrt();
    Ok(NonextremeProbability {
        normal: 1.0 - 2.0 * normal_cdf(-b / root_n),
        small: 2.0 * b / (2.0 * std::f64::consts::PI * n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverconfidenceRecord {
    pub n: u64,
    /// P{P₂ > threshold}
    pub prob_p2_extreme: f64,
    /// P{P₁ > threshold}
    pub prob_p1_extreme: f64,
    /// P{1 − threshold < P₁ < threshold}
    pub prob_nonextreme: f64,
}

pub fn overconfidence_scan(cmp: &CoinComparison, threshold: f64, n_values: &[u64]) -> Result<Vec<OverconfidenceRecord>> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(domain(format!("threshold must lie in (1/2, 1), got {threshold}")));
    }
    if n_values.contains(&0) {
        return Err(domain("number of tosses must be positive"));
    }
    let l = (threshold / (1.0 - threshold)).ln();
    Ok(n_values
        .par_iter()
        .map(|&n| OverconfidenceRecord {
            n,
            prob_p2_extreme: prob_log_odds_between(n, cmp, f64::NEG_INFINITY, -l),
            prob_p1_extreme: prob_log_odds_between(n, cmp, l, f64::INFINITY),
            prob_nonextreme: prob_log_odds_between(n, cmp, -l, l),
        })
        .collect())
}

/// Longest run of consecutive n ≤ `n_max` with P{P₂ > threshold} > `level`.
///
/// Lattice effects make the probability zigzag between odd and even n, so
/// isolated sizes outside the run can also exceed `level`. Ties keep the
/// earlier run.
pub fn overconfidence_region(cmp: &CoinComparison, threshold: f64, level: f64, n_max: u64) -> Result<Option<(u64, u64)>> {
    if !(0.0..1.0).contains(&level) {
        return Err(domain(format!("level must lie in [0,1), got {level}")));
    }
    let ns: Vec<u64> = (1..=n_max).collect();
    let mut best: Option<(u64, u64)> = None;
    let mut start = None;
    for r in overconfidence_scan(cmp, threshold, &ns)? {
        if r.prob_p2_extreme > level {
            let s = *start.get_or_insert(r.n);
            if best.is_none_or(|(a, b)| r.n - s > b - a) {
                best = Some((s, r.n));
            }
        } else {
            start = None;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinReplicate {
    pub index: u64,
    pub seed: u64,
    pub x: u64,
    pub p1: f64,
    pub draws: u64,
}

pub const COIN_STREAM: &str = "coin";

/// Monte Carlo replicates of P₁; replicate i draws from its own derived stream.
pub fn simulate_coin_replicates(cmp: &CoinComparison, n: u64, reps: usize, seed: u64) -> Result<Vec<CoinReplicate>> {
    if reps == 0 {
        return Err(domain("need at least one replicate"));
    }
    if n == 0 {
        return Err(domain("number of tosses must be positive"));
    }
    let dist = Binomial::new(n, cmp.p_true).map_err(|e| domain(e.to_string()))?;
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, COIN_STREAM, i);
            let x = dist.sample(&mut rng);
            CoinReplicate {
                index: i,
                seed: derive_seed(seed, COIN_STREAM, i),
                x,
                p1: coin_posterior(&CoinDataset { n, x }, cmp),
                draws: rng.draws(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_posterior(n: u64, x: u64, p1: f64, p2: f64) -> f64 {
        let l1 = p1.powi(x as i32) * (1.0 - p1).powi((n - x) as i32);
        let l2 = p2.powi(x as i32) * (1.0 - p2).powi((n - x) as i32);
        l1 / (l1 + l2)
    }

    #[test]
    fn posterior_examples() {
        let c = CoinComparison::fair_coin_paradox();
        assert_eq!(coin_posterior(&CoinDataset::new(1000, 500).unwrap(), &c), 0.5);
        let one = coin_posterior(&CoinDataset::new(1, 1).unwrap(), &c);
        assert!((one - 0.4).abs() < 1e-15);
        for x in 0..=12 {
            let p = coin_posterior(&CoinDataset::new(12, x).unwrap(), &c);
            assert!((p - direct_posterior(12, x, 0.4, 0.6)).abs() < 1e-14);
        }
    }

    #[test]
    fn nonextreme_outcomes_at_1000_tosses() {
        let c = CoinComparison::fair_coin_paradox();
        let inside: Vec<i64> = (0..=1000u64)
            .filter(|&x| {
                let p = coin_posterior(&CoinDataset { n: 1000, x }, &c);
                p > 0.01 && p < 0.99
            })
            .map(|x| x as i64 - 500)
            .collect();
        assert_eq!(inside, (-5..=5).collect::<Vec<_>>());
    }

    #[test]
    fn threshold_value() {
        let c = CoinComparison::fair_coin_paradox();
        match nonextreme_threshold(0.01, &c).unwrap() {
            NonextremeRegion::Symmetric { b } => assert!((b - 11.33296).abs() < 1e-5, "{b}"),
            other => panic!("unexpected {other:?}"),
        }
        match nonextreme_threshold(0.4999999, &c).unwrap() {
            NonextremeRegion::Symmetric { b } => assert!(b < 1e-5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(nonextreme_threshold(0.0, &c).is_err());
        assert!(nonextreme_threshold(0.7, &c).is_err());
    }

    #[test]
    fn threshold_agrees_with_scan_at_five_percent() {
        let c = CoinComparison::fair_coin_paradox();
        let n = 1000;
        let (lo, hi) = nonextreme_threshold(0.05, &c).unwrap().x_interval(n);
        for x in 0..=n {
            let p = coin_posterior(&CoinDataset { n, x }, &c);
            let by_formula = (x as f64) > lo && (x as f64) < hi;
            assert_eq!(by_formula, p > 0.05 && p < 0.95, "x={x}");
        }
    }

    #[test]
    fn region_start_matches_enumeration() {
        let c = CoinComparison::new(0.5, 0.42, 0.6).unwrap();
        let brute = |n: u64| -> f64 {
            (0..=n)
                .filter(|&x| 1.0 - direct_posterior(n, x, 0.42, 0.6) > 0.99)
                .map(|x| ln_binomial_pmf(n, x, 0.5).exp())
                .sum()
        };
        let (first, last) = overconfidence_region(&c, 0.99, 0.01, 60).unwrap().unwrap();
        assert!(brute(first - 1) <= 0.01);
        assert!((first..=last).all(|n| brute(n) > 0.01));
        assert_eq!(last, 60);
        // Sporadic even sizes before the run also exceed the level.
        assert!(brute(first - 4) > 0.01);
        assert!(overconfidence_region(&c, 0.99, 0.01, 5).unwrap().is_none());
    }

    #[test]
    fn asymmetric_region_gives_linear_bounds() {
        let c = CoinComparison::new(0.5, 0.42, 0.6).unwrap();
        let region = nonextreme_threshold(0.01, &c).unwrap();
        assert!(matches!(region, NonextremeRegion::Linear { .. }));
        let (lo, hi) = region.x_interval(1000);
        let xs: Vec<u64> = (0..=1000u64).filter(|&x| (x as f64) > lo && (x as f64) < hi).collect();
        assert_eq!(xs.first(), Some(&504));
        assert_eq!(xs.last(), Some(&516));
        assert_eq!(xs.len(), 13);
    }

    #[test]
    fn exact_small_case_matches_enumeration() {
        let c = CoinComparison::fair_coin_paradox();
        let n = 4u64;
        let choose = [1.0, 4.0, 6.0, 4.0, 1.0];
        let brute: f64 = (0..=n)
            .filter(|&x| {
                let p = direct_posterior(n, x, 0.4, 0.6);
                p > 0.01 && p < 0.99
            })
            .map(|x| choose[x as usize] / 16.0)
            .sum();
        let exact = prob_nonextreme_exact(n, 0.01, &c).unwrap();
        assert!((exact - brute).abs() < 1e-14, "{exact} vs {brute}");
    }

    #[test]
    fn range_prob_sums_to_one() {
        for (n, p) in [(1u64, 0.3), (10, 0.5), (1000, 0.42), (100_000, 0.9)] {
            let total = binomial_range_prob(n, p, 0, n);
            assert!((total - 1.0).abs() < 1e-10, "n={n} total={total}");
        }
        assert_eq!(binomial_range_prob(10, 0.5, 6, 5), 0.0);
    }

    #[test]
    fn mirror_symmetry() {
        let c = CoinComparison::fair_coin_paradox();
        for x in 0..=50 {
            let a = coin_posterior(&CoinDataset { n: 50, x }, &c);
            let b = coin_posterior(&CoinDataset { n: 50, x: 50 - x }, &c);
            assert!((a + b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_scan_tails_are_equal() {
        let c = CoinComparison::fair_coin_paradox();
        for r in overconfidence_scan(&c, 0.99, &[1, 7, 100, 1001, 5000]).unwrap() {
            assert!((r.prob_p1_extreme - r.prob_p2_extreme).abs() < 1e-14, "{r:?}");
            let total = r.prob_p1_extreme + r.prob_p2_extreme + r.prob_nonextreme;
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn replicates_are_reproducible() {
        let c = CoinComparison::fair_coin_paradox();
        let a = simulate_coin_replicates(&c, 1000, 1, 42).unwrap();
        let b = simulate_coin_replicates(&c, 1000, 1, 42).unwrap();
        assert_eq!(a, b);
        assert!(simulate_coin_replicates(&c, 1000, 0, 42).is_err());
    }

    #[test]
    fn less_wrong_model_dominates_in_large_samples() {
        let c = CoinComparison::new(0.42, 0.42, 0.6).unwrap();
        let reps = simulate_coin_replicates(&c, 5000, 200, 9).unwrap();
        let mean = reps.iter().map(|r| r.p1).sum::<f64>() / reps.len() as f64;
        assert!(mean > 0.999, "{mean}");
        let exact = overconfidence_scan(&c, 0.99, &[5000]).unwrap()[0];
        assert!(exact.prob_p1_extreme > 0.999);
    }
}
