//! Fair-balance comparisons with a N(0, 1) truth.
//!
//! Sign model: H₁: N(μ, 1/τ), μ < 0 against H₂: μ > 0 (indistinct at μ* = 0).
//! Variance pair: H₁: N(μ, 1/τ₁) against H₂: N(μ, 1/τ₂), μ free in each
//! (distinct, and equally wrong when τ − log τ agrees). Both put a
//! N(0, 1/ξ) prior on μ.

use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{derive_seed, replicate_rng};
use crate::selection::{decompose_log_marginal, kl_divergence_numeric, DecompositionTerms, Interval};
use crate::special::{logistic, normal_cdf, normal_quantile};
#[cfg(test)]
use crate::special::normal_pdf;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignModelConfig {
    pub tau: f64,
    pub xi: f64,
    pub n: u64,
}

impl SignModelConfig {
    pub fn new(tau: f64, xi: f64, n: u64) -> Result<Self> {
        check_positive("tau", tau)?;
        check_positive("xi", xi)?;
        if n == 0 {
            return Err(domain("sample size must be positive"));
        }
        Ok(Self { tau, xi, n })
    }

    /// Standard deviation of the probit of P₁ across datasets.
    fn probit_sd(&self) -> f64 {
        let n = self.n as f64;
        (n * self.tau * self.tau / (n * self.tau + self.xi)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePairConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub xi: f64,
    pub n: u64,
}

impl VariancePairConfig {
    pub fn new(tau1: f64, tau2: f64, xi: f64, n: u64) -> Result<Self> {
        check_positive("tau1", tau1)?;
        check_positive("tau2", tau2)?;
        check_positive("xi", xi)?;
        if tau1 > tau2 {
            return Err(domain("expected tau1 <= tau2 (H1 over-dispersed)"));
        }
        if n < 2 {
            return Err(domain("variance comparison needs at least two observations"));
        }
        Ok(Self { tau1, tau2, xi, n })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Sample mean and divisor-n sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub n: u64,
    pub xbar: f64,
    pub s2: f64,
}

impl GaussianSummary {
    pub fn new(n: u64, xbar: f64, s2: f64) -> Result<Self> {
        if n == 0 {
            return Err(domain("sample size must be positive"));
        }
        if !(s2 >= 0.0) {
            return Err(domain(format!("sample variance must be non-negative, got {s2}")));
        }
        Ok(Self { n, xbar, s2 })
    }

    pub fn from_data(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(domain("empty sample"));
        }
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let s2 = xs.iter().map(|x| (x - xbar).powi(2)).sum::<f64>() / n;
        Self::new(xs.len() as u64, xbar, s2)
    }

    /// log Πᵢ N(xᵢ; μ, 1/τ)
    pub fn log_likelihood(&self, mu: f64, tau: f64) -> f64 {
        let n = self.n as f64;
        0.5 * n * (tau.ln() - LN_2PI) - 0.5 * tau * n * (self.s2 + (self.xbar - mu).powi(2))
    }
}

/// P₁ = Φ(−nτx̄ / √(nτ + ξ)).
pub fn posterior_sign_model(summary: &GaussianSummary, cfg: &SignModelConfig) -> f64 {
    let nt = summary.n as f64 * cfg.tau;
    normal_cdf(-nt * summary.xbar / (nt + cfg.xi).sqrt())
}

/// Sampling density of P₁ across datasets.
pub fn density_p1_sign(p1: f64, cfg: &SignModelConfig) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(domain(format!("density of P1 is defined on (0,1), got {p1}")));
    }
    let z = normal_quantile(p1)?;
    let (tau, xi, n) = (cfg.tau, cfg.xi, cfg.n as f64);
    let scale = (tau + xi / n).sqrt() / tau;
    Ok(scale * (0.5 * z * z * (1.0 - 1.0 / tau - xi / (n * tau * tau))).exp())
}

/// CDF of P₁ across datasets: Φ(Φ⁻¹(p)/s) with s the probit spread.
pub fn cdf_p1_sign(p1: f64, cfg: &SignModelConfig) -> f64 {
    if p1 <= 0.0 {
        return 0.0;
    }
    if p1 >= 1.0 {
        return 1.0;
    }
    let z = normal_quantile(p1).expect("p1 inside (0,1)");
    normal_cdf(z / cfg.probit_sd())
}

/// log M for H: N(μ, 1/τ) with μ ~ N(0, 1/ξ).
pub fn log_marginal_variance_model(summary: &GaussianSummary, tau: f64, xi: f64) -> f64 {
    let n = summary.n as f64;
    let denom = xi + n * tau;
    0.5 * (xi / denom).ln() + 0.5 * n * (tau.ln() - LN_2PI)
        - n * tau * (xi * summary.xbar.powi(2) + xi * summary.s2 + n * tau * summary.s2) / (2.0 * denom)
}

/// log(P₁/P₂) from the closed-form posterior odds.
pub fn log_posterior_odds_variance(summary: &GaussianSummary, cfg: &VariancePairConfig) -> f64 {
    let (t1, t2, xi) = (cfg.tau1, cfg.tau2, cfg.xi);
    let n = summary.n as f64;
    let (xb2, s2) = (summary.xbar.powi(2), summary.s2);
    let d1 = xi + n * t1;
    let d2 = xi + n * t2;
    let bracket = (t2 - t1) * (xi * xi * xb2 + xi * xi * s2 + n * n * t1 * t2 * s2) + (t2 * t2 - t1 * t1) * n * xi * s2;
    0.5 * (d2 / d1).ln() + 0.5 * n * (t1 / t2).ln() + n / (2.0 * d1 * d2) * bracket
}

/// Large-n limit ½(τ₂ − τ₁)(ns² − (n − 1)).
pub fn limit_log_odds(summary: &GaussianSummary, cfg: &VariancePairConfig) -> f64 {
    let n = summary.n as f64;
    0.5 * (cfg.tau2 - cfg.tau1) * (n * summary.s2 - (n - 1.0))
}

/// The τ₂ > 1 with τ₂ − log τ₂ = τ₁ − log τ₁, by bisection on (1, 10³).
pub fn equally_wrong_partner(tau1: f64) -> Result<f64> {
    if !(tau1 > 0.0 && tau1 < 1.0) {
        return Err(domain(format!("tau1 must lie in (0,1), got {tau1}")));
    }
    let target = tau1 - tau1.ln();
    let h = |t: f64| t - t.ln() - target;
    let (mut lo, mut hi) = (1.0_f64, 1e3_f64);
    if h(hi) < 0.0 {
        return Err(domain(format!("no partner below 1e3 for tau1 = {tau1}")));
    }
    // h is increasing on (1, ∞) with h(1) ≤ 0.
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Truth precision τ₀ = (τ₁ − τ₂)/log(τ₁/τ₂) that makes the pair equally wrong.
pub fn equally_wrong_truth_precision(tau1: f64, tau2: f64) -> Result<f64> {
    check_positive("tau1", tau1)?;
    check_positive("tau2", tau2)?;
    if tau1 == tau2 {
        return Err(domain("identical precisions have no distinguishing truth"));
    }
    Ok((tau1 - tau2) / (tau1 / tau2).ln())
}

fn ln_normal_precision(tau: f64) -> impl Fn(f64) -> f64 {
    move |x| 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * x * x
}

/// D₁ − D₂ for N(0, 1/τ₁) and N(0, 1/τ₂) against N(0, 1), by quadrature.
pub fn divergence_gap(tau1: f64, tau2: f64, tolerance: f64) -> Result<f64> {
    let truth = ln_normal_precision(1.0);
    let support = Interval::normal_bulk(0.0, 1.0);
    let d1 = kl_divergence_numeric(&truth, ln_normal_precision(tau1), support, tolerance)?;
    let d2 = kl_divergence_numeric(&truth, ln_normal_precision(tau2), support, tolerance)?;
    Ok(d1 - d2)
}

/// A/B/C terms for N(μ, 1/τ) on one dataset: θ̂ = x̄, θ* = 0, truth N(0, 1).
pub fn variance_model_decomposition(summary: &GaussianSummary, tau: f64, xi: f64) -> DecompositionTerms {
    decompose_log_marginal(
        log_marginal_variance_model(summary, tau, xi),
        summary.log_likelihood(summary.xbar, tau),
        summary.log_likelihood(0.0, tau),
        summary.log_likelihood(0.0, 1.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BalanceProblem {
    SignModel(SignModelConfig),
    VariancePair(VariancePairConfig),
}

impl BalanceProblem {
    fn stream(&self) -> &'static str {
        match self {
            BalanceProblem::SignModel(_) => "balance-sign",
            BalanceProblem::VariancePair(_) => "balance-var",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceReplicate {
    pub index: u64,
    pub seed: u64,
    pub xbar: f64,
    /// Only the variance pair uses the sample variance.
    pub s2: Option<f64>,
    pub p1: f64,
    pub draws: u64,
}

/// Draws x̄ ~ N(0, 1/n) (and ns² ~ χ²ₙ₋₁ for the variance pair) per replicate.
pub fn simulate_balance_replicates(problem: &BalanceProblem, reps: usize, seed: u64) -> Result<Vec<BalanceReplicate>> {
    if reps == 0 {
        return Err(domain("need at least one replicate"));
    }
    let tag = problem.stream();
    let chi2 = match problem {
        BalanceProblem::VariancePair(cfg) => {
            Some(ChiSquared::new((cfg.n - 1) as f64).map_err(|e| domain(e.to_string()))?)
        }
        BalanceProblem::SignModel(_) => None,
    };
    Ok((0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, tag, i);
            let (xbar, s2, p1) = match problem {
                BalanceProblem::SignModel(cfg) => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let xbar = z / (cfg.n as f64).sqrt();
                    let s = GaussianSummary { n: cfg.n, xbar, s2: f64::NAN };
                    (xbar, None, posterior_sign_model(&s, cfg))
                }
                BalanceProblem::VariancePair(cfg) => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let xbar = z / (cfg.n as f64).sqrt();
                    let ns2 = chi2.as_ref().expect("variance pair has chi2").sample(&mut rng);
                    let s = GaussianSummary { n: cfg.n, xbar, s2: ns2 / cfg.n as f64 };
                    (xbar, Some(s.s2), logistic(log_posterior_odds_variance(&s, cfg)))
                }
            };
            BalanceReplicate { index: i, seed: derive_seed(seed, tag, i), xbar, s2, p1, draws: rng.draws() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_adaptive;
    use crate::rng::seeded_rng;
    use crate::stats::{ks_distance, mean, proportion_se, variance};

    #[test]
    fn sign_posterior_examples() {
        let cfg = SignModelConfig::new(1.0, 1.0, 100).unwrap();
        let s = |xbar| GaussianSummary::new(100, xbar, 1.0).unwrap();
        assert_eq!(posterior_sign_model(&s(0.0), &cfg), 0.5);
        assert!(posterior_sign_model(&s(1e3), &cfg) < 1e-300);
        // Φ(−10/√101) from a 30-digit evaluation
        let expect = 0.159_859_088_406_435_2;
        assert!((posterior_sign_model(&s(0.1), &cfg) - expect).abs() < 1e-14);
        let mut last = 1.0;
        for i in -50..=50 {
            let p = posterior_sign_model(&s(i as f64 * 0.01), &cfg);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn density_examples() {
        let cfg = SignModelConfig::new(1.0, 1.0, 1000).unwrap();
        assert!((density_p1_sign(0.5, &cfg).unwrap() - 1.001f64.sqrt()).abs() < 1e-15);
        let big = SignModelConfig::new(1.0, 1.0, 1_000_000_000).unwrap();
        for p in [0.01, 0.3, 0.5, 0.9] {
            assert!((density_p1_sign(p, &big).unwrap() - 1.0).abs() < 1e-6);
        }
        let u_shaped = SignModelConfig::new(9.0, 1.0, 1000).unwrap();
        assert!(density_p1_sign(0.01, &u_shaped).unwrap() > density_p1_sign(0.5, &u_shaped).unwrap());
        let peaked = SignModelConfig::new(1.0 / 9.0, 1.0, 1000).unwrap();
        assert!(density_p1_sign(0.5, &peaked).unwrap() > density_p1_sign(0.3, &peaked).unwrap());
        assert!(density_p1_sign(0.0, &cfg).is_err());
        assert!(density_p1_sign(1.0, &cfg).is_err());
    }

    #[test]
    fn density_is_symmetric_and_normalized() {
        for tau in [1.0 / 9.0, 1.0, 9.0] {
            for xi in [0.1, 1.0, 10.0] {
                for n in [100u64, 1000] {
                    let cfg = SignModelConfig::new(tau, xi, n).unwrap();
                    for p in [0.01, 0.2, 0.45] {
                        let a = density_p1_sign(p, &cfg).unwrap();
                        let b = density_p1_sign(1.0 - p, &cfg).unwrap();
                        assert!((a - b).abs() < 1e-9 * a.max(1.0));
                    }
                    // ∫₀¹ f(p) dp with p = Φ(z), dp = φ(z) dz; the lower half
                    // keeps Φ(z) away from rounding to 1.
                    let integrand = |z: f64| density_p1_sign(normal_cdf(z), &cfg).unwrap() * normal_pdf(z);
                    let half = integrate_adaptive(integrand, -37.0, 0.0, 1e-12, 0.0, 2000).unwrap().value;
                    let total = 2.0 * half;
                    assert!((total - 1.0).abs() < 1e-6, "tau={tau} xi={xi} n={n} total={total}");
                    // The closed-form CDF is the integral of the density.
                    let cdf_numeric =
                        integrate_adaptive(integrand, -37.0, normal_quantile(0.3).unwrap(), 1e-12, 0.0, 2000).unwrap().value;
                    assert!((cdf_numeric - cdf_p1_sign(0.3, &cfg)).abs() < 1e-8);
                }
            }
        }
    }

    fn prior_times_likelihood_quadrature(xs: &[f64], tau: f64, xi: f64) -> f64 {
        let s = GaussianSummary::from_data(xs).unwrap();
        let log_joint = |mu: f64| {
            let prior = 0.5 * (xi.ln() - LN_2PI) - 0.5 * xi * mu * mu;
            let lik: f64 = xs.iter().map(|x| 0.5 * (tau.ln() - LN_2PI) - 0.5 * tau * (x - mu).powi(2)).sum();
            prior + lik
        };
        let centre = s.n as f64 * tau * s.xbar / (s.n as f64 * tau + xi);
        let shift = log_joint(centre);
        let width = 12.0 / (s.n as f64 * tau + xi).sqrt();
        let v = integrate_adaptive(|mu| (log_joint(mu) - shift).exp(), centre - width, centre + width, 0.0, 1e-12, 2000)
            .unwrap()
            .value;
        shift + v.ln()
    }

    #[test]
    fn marginal_matches_quadrature() {
        // n = 1: convolution N(0, 1/ξ + 1/τ)
        let (tau, xi, x): (f64, f64, f64) = (0.7, 1.3, 0.8);
        let s = GaussianSummary::new(1, x, 0.0).unwrap();
        let var = 1.0 / xi + 1.0 / tau;
        let conv = -0.5 * (LN_2PI + var.ln()) - 0.5 * x * x / var;
        assert!((log_marginal_variance_model(&s, tau, xi) - conv).abs() < 1e-12);

        let mut rng = seeded_rng(17);
        for (n, tau, xi) in [(5usize, 0.25, 1.0), (40, 2.58666, 0.3), (200, 1.0, 5.0)] {
            let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let s = GaussianSummary::from_data(&xs).unwrap();
            let closed = log_marginal_variance_model(&s, tau, xi);
            let quad = prior_times_likelihood_quadrature(&xs, tau, xi);
            assert!((closed - quad).abs() < 1e-8, "n={n}: {closed} vs {quad}");
        }
    }

    #[test]
    fn posterior_odds_agrees_with_two_marginals() {
        let mut rng = seeded_rng(23);
        for n in [2u64, 10, 100, 1000] {
            for _ in 0..50 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let w: f64 = StandardNormal.sample(&mut rng);
                let s = GaussianSummary::new(n, z / (n as f64).sqrt(), (1.0 + 0.3 * w).abs()).unwrap();
                let cfg = VariancePairConfig::new(0.25, 2.58666, 1.0, n).unwrap();
                let direct = log_posterior_odds_variance(&s, &cfg);
                let diff = log_marginal_variance_model(&s, 0.25, 1.0) - log_marginal_variance_model(&s, 2.58666, 1.0);
                assert!((direct - diff).abs() < 1e-10, "n={n}: {direct} vs {diff}");
            }
        }
        let same = VariancePairConfig::new(0.5, 0.5, 1.0, 10).unwrap();
        assert_eq!(log_posterior_odds_variance(&GaussianSummary::new(10, 0.3, 0.9).unwrap(), &same), 0.0);
    }

    #[test]
    fn limit_is_affine_in_z() {
        let cfg = VariancePairConfig::new(0.25, 2.58666, 1.0, 101).unwrap();
        let at = |ns2: f64| limit_log_odds(&GaussianSummary::new(101, 0.0, ns2 / 101.0).unwrap(), &cfg);
        assert_eq!(at(100.0), 0.0);
        let z = 7.0;
        assert!((at(100.0 + 2.0 * z) - 2.0 * at(100.0 + z)).abs() < 1e-12);
    }

    #[test]
    fn limit_approaches_exact_log_odds() {
        // With an equally wrong pair, the exact log-odds differ from the limit by O(1/n).
        let tau2 = equally_wrong_partner(0.25).unwrap();
        let mut rel = Vec::new();
        for n in [100u64, 10_000, 1_000_000] {
            let cfg = VariancePairConfig::new(0.25, tau2, 1.0, n).unwrap();
            let nf = n as f64;
            // Z at two standard deviations of N(0, 2n − 2).
            let ns2 = (nf - 1.0) + 2.0 * (2.0 * nf - 2.0).sqrt();
            let s = GaussianSummary::new(n, 1.0 / nf.sqrt(), ns2 / nf).unwrap();
            let exact = log_posterior_odds_variance(&s, &cfg);
            rel.push(((limit_log_odds(&s, &cfg) - exact) / exact).abs());
        }
        assert!(rel[1] < rel[0] && rel[2] < rel[1], "{rel:?}");
        assert!(rel[2] < 1e-3);
    }

    #[test]
    fn partner_examples() {
        let t2 = equally_wrong_partner(0.25).unwrap();
        assert!((t2 - 2.58666).abs() < 1e-4, "{t2}");
        assert!(divergence_gap(0.25, t2, 1e-12).unwrap().abs() < 1e-6);
        let t2 = equally_wrong_partner(0.3).unwrap();
        let kl = |t: f64| 0.5 * (t - 1.0 - t.ln());
        assert!((kl(0.3) - kl(t2)).abs() < 1e-10);
        assert!(divergence_gap(0.3, t2, 1e-12).unwrap().abs() < 1e-6);
        let near = equally_wrong_partner(0.999).unwrap();
        assert!(near > 1.0 && near < 1.01);
        assert!(equally_wrong_partner(1.0).is_err());
        assert!(equally_wrong_partner(1.5).is_err());
        let tau0 = equally_wrong_truth_precision(0.25, 2.58666).unwrap();
        assert!((tau0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn decomposition_reassembles_to_marginal_over_truth() {
        let mut rng = seeded_rng(29);
        let xs: Vec<f64> = (0..64).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = GaussianSummary::from_data(&xs).unwrap();
        let t = variance_model_decomposition(&s, 0.25, 1.0);
        // Direct per-observation evaluation of each log term.
        let lg: f64 = xs.iter().map(|x| -0.5 * LN_2PI - 0.5 * x * x).sum();
        let lm = prior_times_likelihood_quadrature(&xs, 0.25, 1.0);
        assert!((t.total() - (lm - lg)).abs() < 1e-8);
        assert!(t.b >= 0.0);
        let direct_c: f64 = xs.iter().map(|x| 0.5 * (0.25f64.ln()) - 0.5 * 0.25 * x * x + 0.5 * x * x).sum();
        assert!((t.c - direct_c).abs() < 1e-10);
        // Identical models on the same data: ΔC = 0.
        let same = variance_model_decomposition(&s, 0.25, 1.0).difference(&t);
        assert_eq!(same.c, 0.0);
    }

    #[test]
    fn sign_replicates_follow_density_law() {
        let cfg = SignModelConfig::new(1.0, 1.0, 1000).unwrap();
        let reps = simulate_balance_replicates(&BalanceProblem::SignModel(cfg), 10_000, 4).unwrap();
        let p: Vec<f64> = reps.iter().map(|r| r.p1).collect();
        assert!(ks_distance(&p, |x| cdf_p1_sign(x, &cfg)) < 0.02);
        let again = simulate_balance_replicates(&BalanceProblem::SignModel(cfg), 1, 4).unwrap();
        assert_eq!(again[0], reps[0]);
    }

    #[test]
    fn variance_pair_mean_is_near_half_at_large_n() {
        let tau2 = equally_wrong_partner(0.25).unwrap();
        let cfg = VariancePairConfig::new(0.25, tau2, 1.0, 10_000).unwrap();
        let reps = simulate_balance_replicates(&BalanceProblem::VariancePair(cfg), 4000, 8).unwrap();
        let p: Vec<f64> = reps.iter().map(|r| r.p1).collect();
        let m = mean(&p);
        let se = (variance(&p) / p.len() as f64).sqrt();
        assert!((m - 0.5).abs() < 3.0 * se, "mean {m} se {se}");
        let extreme = p.iter().filter(|&&x| !(0.01..=0.99).contains(&x)).count() as f64 / p.len() as f64;
        assert!(extreme > 0.9, "{extreme} {}", proportion_se(extreme, p.len()));
    }
}
