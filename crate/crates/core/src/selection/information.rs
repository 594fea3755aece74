use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::quad::integrate_adaptive;

use super::kl::Interval;

/// A parametric family f(x | θ) exposed through its log-density.
pub trait ParametricDensity {
    fn dim(&self) -> usize;
    fn ln_density(&self, x: f64, theta: &[f64]) -> f64;
}

/// I* = E_g[∇ℓ ∇ℓᵀ] and J* = E_g[−∇²ℓ] at θ*.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrices {
    pub i_star: DMatrix<f64>,
    pub j_star: DMatrix<f64>,
    /// J* is not positive definite (boundary or degenerate θ*).
    pub j_singular: bool,
}

fn gradient_step(theta: f64) -> f64 {
    1e-5_f64.max(1e-5 * theta.abs())
}

// Second differences lose ~eps/h² to cancellation, so they get a wider step.
fn hessian_step(theta: f64) -> f64 {
    1e-4_f64.max(1e-4 * theta.abs())
}

fn shifted(theta: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut t = theta.to_vec();
    for &(i, d) in moves {
        t[i] += d;
    }
    t
}

fn gradient<M: ParametricDensity + ?Sized>(model: &M, x: f64, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let h = gradient_step(theta[i]);
            let up = model.ln_density(x, &shifted(theta, &[(i, h)]));
            let down = model.ln_density(x, &shifted(theta, &[(i, -h)]));
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn hessian_entry<M: ParametricDensity + ?Sized>(model: &M, x: f64, theta: &[f64], i: usize, j: usize) -> f64 {
    let hi = hessian_step(theta[i]);
    if i == j {
        let up = model.ln_density(x, &shifted(theta, &[(i, hi)]));
        let mid = model.ln_density(x, theta);
        let down = model.ln_density(x, &shifted(theta, &[(i, -hi)]));
        return (up - 2.0 * mid + down) / (hi * hi);
    }
    let hj = hessian_step(theta[j]);
    let pp = model.ln_density(x, &shifted(theta, &[(i, hi), (j, hj)]));
    let pm = model.ln_density(x, &shifted(theta, &[(i, hi), (j, -hj)]));
    let mp = model.ln_density(x, &shifted(theta, &[(i, -hi), (j, hj)]));
    let mm = model.ln_density(x, &shifted(theta, &[(i, -hi), (j, -hj)]));
    (pp - pm - mp + mm) / (4.0 * hi * hj)
}

/// Sandwich information matrices of `model` at `theta_star` under the truth.
///
/// Each entry is an adaptive quadrature over `support` with absolute
/// tolerance `tolerance`; derivatives are central finite differences.
pub fn information_matrices<M, G>(
    model: &M,
    theta_star: &[f64],
    log_true: G,
    support: Interval,
    tolerance: f64,
) -> Result<InformationMatrices>
where
    M: ParametricDensity + ?Sized,
    G: Fn(f64) -> f64,
{
    let d = model.dim();
    if theta_star.len() != d {
        return Err(domain(format!("expected {d} parameters, got {}", theta_star.len())));
    }
    let mut i_star = DMatrix::zeros(d, d);
    let mut j_star = DMatrix::zeros(d, d);
    let weight = |x: f64| log_true(x).exp();
    for r in 0..d {
        for c in r..d {
            let ival = integrate_adaptive(
                |x| {
                    let w = weight(x);
                    if w == 0.0 {
                        return 0.0;
                    }
                    let g = gradient(model, x, theta_star);
                    w * g[r] * g[c]
                },
                support.lo,
                support.hi,
                tolerance,
                0.0,
                2000,
            )?
            .value;
            let jval = integrate_adaptive(
                |x| {
                    let w = weight(x);
                    if w == 0.0 {
                        return 0.0;
                    }
                    -w * hessian_entry(model, x, theta_star, r, c)
                },
                support.lo,
                support.hi,
                tolerance,
                0.0,
                2000,
            )?
            .value;
            i_star[(r, c)] = ival;
            i_star[(c, r)] = ival;
            j_star[(r, c)] = jval;
            j_star[(c, r)] = jval;
        }
    }
    let j_singular = j_star.clone().cholesky().is_none();
    Ok(InformationMatrices { i_star, j_star, j_singular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    /// N(μ, 1/τ) with known precision; θ = [μ].
    struct KnownPrecision(f64);

    impl ParametricDensity for KnownPrecision {
        fn dim(&self) -> usize {
            1
        }
        fn ln_density(&self, x: f64, theta: &[f64]) -> f64 {
            0.5 * (self.0 / (2.0 * std::f64::consts::PI)).ln() - 0.5 * self.0 * (x - theta[0]).powi(2)
        }
    }

    /// N(μ, σ²) with θ = [μ, ln σ].
    struct MeanLogSd;

    impl ParametricDensity for MeanLogSd {
        fn dim(&self) -> usize {
            2
        }
        fn ln_density(&self, x: f64, theta: &[f64]) -> f64 {
            let s = theta[1].exp();
            -theta[1] - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * ((x - theta[0]) / s).powi(2)
        }
    }

    fn std_normal(x: f64) -> f64 {
        -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn correct_model_has_equal_matrices() {
        let tol = 1e-8;
        let m = information_matrices(&KnownPrecision(1.0), &[0.0], std_normal, Interval::normal_bulk(0.0, 1.0), tol).unwrap();
        assert!((m.i_star[(0, 0)] - 1.0).abs() < 10.0 * tol * 100.0);
        assert!((m.i_star[(0, 0)] - m.j_star[(0, 0)]).abs() < 1e-6);
        assert!(!m.j_singular);

        // Two-parameter exponential family: I = J = diag(1, 2).
        let m = information_matrices(&MeanLogSd, &[0.0, 0.0], std_normal, Interval::normal_bulk(0.0, 1.0), tol).unwrap();
        let diff = (&m.i_star - &m.j_star).abs().max();
        assert!(diff < 1e-5, "{diff}");
        assert!((m.j_star[(1, 1)] - 2.0).abs() < 1e-5);
        assert!(m.j_star[(0, 1)].abs() < 1e-6);
        assert_eq!(m.i_star.transpose(), m.i_star);
    }

    #[test]
    fn misspecified_precision_gives_sandwich_values() {
        // ℓ'(μ) = τ(x − μ), ℓ'' = −τ: I* = τ² E[x²] = τ², J* = τ.
        let tau = 0.25;
        let m = information_matrices(&KnownPrecision(tau), &[0.0], std_normal, Interval::normal_bulk(0.0, 1.0), 1e-8).unwrap();
        assert!((m.i_star[(0, 0)] - tau * tau).abs() < 1e-7);
        assert!((m.j_star[(0, 0)] - tau).abs() < 1e-6);

        // Monte Carlo expectation of the analytic score and curvature.
        let mut rng = seeded_rng(3);
        let n = 100_000;
        let mc_i: f64 = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                (tau * x).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((mc_i - m.i_star[(0, 0)]).abs() < 4.0 * tau * tau * (2.0f64 / n as f64).sqrt());
    }

    #[test]
    fn b_term_under_correct_model_averages_half() {
        // B = ½ n (x̄ − θ*)² J*, with x̄ ~ N(0, 1/n) under a correct model.
        let m = information_matrices(&KnownPrecision(1.0), &[0.0], std_normal, Interval::normal_bulk(0.0, 1.0), 1e-8).unwrap();
        let j = m.j_star[(0, 0)];
        let mut rng = seeded_rng(5);
        let n_obs = 50;
        let reps = 20_000;
        let bs: Vec<f64> = (0..reps)
            .map(|_| {
                let xbar = (0..n_obs).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).sum::<f64>() / n_obs as f64;
                0.5 * (n_obs as f64).sqrt().powi(2) * xbar * xbar * j
            })
            .collect();
        let mean = bs.iter().sum::<f64>() / reps as f64;
        let sd = (bs.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sd / (reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        assert!(information_matrices(&MeanLogSd, &[0.0], std_normal, Interval::normal_bulk(0.0, 1.0), 1e-8).is_err());
    }
}
