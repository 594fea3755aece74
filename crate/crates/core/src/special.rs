//! Scalar special functions shared by the model modules.
//!
//! The normal CDF uses `libm::erfc`, which keeps full relative precision
//! deep in the lower tail. The quantile starts from `statrs`' `erfc_inv`
//! and is polished by Newton steps against that CDF.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{domain, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal CDF, Φ.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile, Φ⁻¹. Fails outside (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    if p > 0.5 {
        // Work in the lower tail where p carries full relative precision.
        return normal_quantile(1.0 - p).map(|z| -z);
    }
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let pdf = normal_pdf(z);
        if pdf > 0.0 {
            z -= (normal_cdf(z) - p) / pdf;
        }
    }
    Ok(z)
}

/// Numerically stable 1 / (1 + e^{-l}).
pub fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// log Σ exp(xᵢ), returning -∞ for an empty slice or all -∞ inputs.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// log C(n, k) p^k (1-p)^(n-k).
pub fn ln_binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let (nf, kf) = (n as f64, k as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let lp = if k == 0 { 0.0 } else { kf * p.ln() };
    let lq = if k == n { 0.0 } else { (nf - kf) * (1.0 - p).ln() };
    ln_choose + lp + lq
}

/// Quantile of Gamma(shape, rate = shape), i.e. mean one.
///
/// `lower` and `upper` are the two tail probabilities (`upper = 1 - lower`);
/// passing both lets callers keep precision deep in either tail.
pub fn gamma_mean_one_quantile(shape: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(domain(format!("gamma shape must be positive, got {shape}")));
    }
    if !(lower > 0.0 && upper > 0.0) {
        return Err(domain("gamma quantile needs both tails positive"));
    }
    let use_upper = upper < lower;
    let target = if use_upper { upper } else { lower };
    let ln_norm = ln_gamma(shape);
    // Work in y = ln x with x = shape * r the standard gamma variate.
    let tail = |y: f64| {
        let x = y.exp();
        if use_upper {
            gamma_ur(shape, x)
        } else {
            gamma_lr(shape, x)
        }
    };
    // Residual is increasing in y.
    let resid = |y: f64| {
        if use_upper {
            target - tail(y)
        } else {
            tail(y) - target
        }
    };
    let mut lo = -1.0_f64;
    while resid(lo) > 0.0 {
        lo *= 2.0;
        if lo < -1500.0 {
            break;
        }
    }
    let mut hi = 1.0_f64;
    while resid(hi) < 0.0 {
        hi += 1.0;
        if hi > 8.0 {
            break;
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = resid(y);
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        // dF/dy = density(x) * x
        let x = y.exp();
        let ln_dens = shape * x.ln() - x - ln_norm;
        let slope = ln_dens.exp();
        let newton = y - r / slope;
        y = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() < 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    Ok(y.exp() / shape)
}
