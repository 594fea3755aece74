//! Derivative-free maximization over the non-negative orthant.
//!
//! A Nelder–Mead pass with vertices projected onto `x ≥ 0`, followed by
//! cyclic golden-section refinement per coordinate. A coordinate whose
//! objective at exactly zero matches its refined value to round-off is
//! snapped to zero, so boundary optima are represented exactly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxedOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Coordinates sitting on the `x = 0` boundary.
    pub at_boundary: Vec<bool>,
    pub iterations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn project(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], f_tol: f64, max_iter: usize) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += 0.1 * x0[i].abs().max(0.1);
        simplex.push(v);
    }
    // Minimize the negated objective.
    let mut vals: Vec<f64> = simplex.iter().map(|v| -f(v)).collect();
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[d] - vals[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= f_tol && size < 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64).collect();
        let along = |coef: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[d]).map(|(c, w)| c + coef * (c - w)).collect();
            project(&mut p);
            p
        };
        let reflected = along(1.0);
        let fr = -f(&reflected);
        if fr < vals[0] {
            let expanded = along(2.0);
            let fe = -f(&expanded);
            if fe < fr {
                simplex[d] = expanded;
                vals[d] = fe;
            } else {
                simplex[d] = reflected;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = reflected;
            vals[d] = fr;
        } else {
            let contracted = if fr < vals[d] { along(0.5) } else { along(-0.5) };
            let fc = -f(&contracted);
            if fc < vals[d].min(fr) {
                simplex[d] = contracted;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = simplex[i].iter().zip(&simplex[0]).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    vals[i] = -f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("non-empty simplex");
    (simplex[best].clone(), -vals[best], iter)
}

// Golden-section maximization of a 1-D function on [lo, hi].
fn golden_max<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    while hi - lo > x_tol {
        if gc >= gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Maximizes `f` over `x ≥ 0` from `x0`.
///
/// Converged when a full refinement sweep changes the objective by less
/// than `f_tol` and no coordinate moves by more than `1e-9`.
pub fn maximize_nonneg<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], f_tol: f64, max_iter: usize) -> Result<BoxedOptimum> {
    let mut start = x0.to_vec();
    project(&mut start);
    let (mut x, mut value, mut iterations) = nelder_mead(&f, &start, f_tol, max_iter);
    let d = x.len();
    let mut at_boundary = vec![false; d];
    for _sweep in 0..max_iter {
        iterations += 1;
        let before = value;
        let mut moved = 0.0_f64;
        for i in 0..d {
            let current = x[i];
            let mut probe = x.clone();
            let mut g = |t: f64| {
                probe[i] = t;
                f(&probe)
            };
            let width = 0.5 * current.max(1e-3);
            let (lo, hi) = ((current - width).max(0.0), current + width);
            let (t, gt) = golden_max(&mut g, lo, hi, 1e-12_f64.max(1e-11 * current));
            let g0 = g(0.0);
            // Differences below round-off in f cannot distinguish t from 0.
            let slack = 1e-13 * (1.0 + value.abs());
            let (best_t, best_g) = if g0 >= gt.max(value) - slack {
                (0.0, g0)
            } else if gt > value {
                (t, gt)
            } else {
                (current, value)
            };
            moved = moved.max((best_t - current).abs());
            x[i] = best_t;
            value = best_g;
            at_boundary[i] = best_t == 0.0;
        }
        if (value - before).abs() < f_tol && moved < 1e-9 {
            return Ok(BoxedOptimum { x, value, at_boundary, iterations });
        }
    }
    Err(Error::OptimizerNotConverged { iterations, best: x })
}
