use std::cell::Cell;

use crate::error::{domain, Result};
use crate::quad::integrate_adaptive;

/// Closed integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// Range holding all but ~1e-14 of a normal's mass.
    pub fn normal_bulk(mean: f64, sd: f64) -> Self {
        Self { lo: mean - 8.0 * sd, hi: mean + 8.0 * sd }
    }
}

const MAX_SEGMENTS: usize = 4000;

/// K-L divergence ∫ g log(g/f) over `support`, from log-densities.
///
/// Returns a domain error if the model log-density is not finite somewhere
/// the true density is positive.
pub fn kl_divergence_numeric<G, F>(
    log_true: G,
    log_model: F,
    support: Interval,
    tolerance: f64,
) -> Result<f64>
where
    G: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let bad_point = Cell::new(None);
    let integrand = |x: f64| {
        let lg = log_true(x);
        if lg == f64::NEG_INFINITY {
            return 0.0;
        }
        let lf = log_model(x);
        if !lf.is_finite() {
            bad_point.set(Some(x));
            return 0.0;
        }
        lg.exp() * (lg - lf)
    };
    let res = integrate_adaptive(integrand, support.lo, support.hi, tolerance, 0.0, MAX_SEGMENTS);
    if let Some(x) = bad_point.get() {
        return Err(domain(format!("model density is not positive at x = {x} where the true density is")));
    }
    res.map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ln_normal(mean: f64, precision: f64) -> impl Fn(f64) -> f64 {
        move |x| 0.5 * (precision / (2.0 * std::f64::consts::PI)).ln() - 0.5 * precision * (x - mean).powi(2)
    }

    #[test]
    fn identical_densities_have_zero_divergence() {
        let d = kl_divergence_numeric(ln_normal(0.0, 1.0), ln_normal(0.0, 1.0), Interval::normal_bulk(0.0, 1.0), 1e-12)
            .unwrap();
        assert!(d.abs() < 1e-12);
        let d = kl_divergence_numeric(ln_normal(2.0, 0.3), ln_normal(2.0, 0.3), Interval::normal_bulk(2.0, 0.3f64.powf(-0.5)), 1e-12)
            .unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn matches_closed_form_and_monte_carlo() {
        let tau: f64 = 0.25;
        let closed = 0.5 * (tau - 1.0 - tau.ln());
        let d = kl_divergence_numeric(ln_normal(0.0, 1.0), ln_normal(0.0, tau), Interval::normal_bulk(0.0, 1.0), 1e-12)
            .unwrap();
        assert!((d - closed).abs() < 1e-10, "{d} vs {closed}");

        // Monte Carlo average of log(g/f) under g.
        let (lg, lf) = (ln_normal(0.0, 1.0), ln_normal(0.0, tau));
        let mut rng = seeded_rng(11);
        let m = 200_000;
        let vals: Vec<f64> = (0..m)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                lg(x) - lf(x)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        assert!((mean - closed).abs() < 4.0 * se, "mc {mean} closed {closed} se {se}");
    }

    #[test]
    fn zero_model_density_is_a_domain_error() {
        let err = kl_divergence_numeric(ln_normal(0.0, 1.0), |x: f64| if x > 1.0 { f64::NEG_INFINITY } else { 0.0 }, Interval::normal_bulk(0.0, 1.0), 1e-10)
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
