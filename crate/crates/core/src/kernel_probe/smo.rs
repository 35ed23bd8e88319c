//! SMO for the box- and equality-constrained QP shared by SVC and ε-SVR:
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  sᵀα = 0,  0 ≤ α ≤ C,   Q_tu = s_t s_u K(t mod n, u mod n)
//! ```
//!
//! SVC uses `l = n` variables with `s = y`, `p = −1`. ε-SVR uses `l = 2n`
//! (`α` then `α*`) with `s = (+1…, −1…)` and `p = (ε − t, ε + t)`.
//!
//! Working pairs are the maximal KKT violators; indices are scanned in a
//! seeded random order, so ties go to whichever comes first in it.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::cache::KernelStore;
use crate::rng;

const TAU: f64 = 1e-12;

pub(crate) struct Problem {
    pub signs: Vec<f64>,
    pub linear: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Solution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective in maximisation form, `−(½ αᵀQα + pᵀα)`.
    pub objective: f64,
    /// Final `max_{I_up} −s∇f − min_{I_low} −s∇f`.
    pub gap: f64,
}

pub(crate) fn solve(kernel: &mut KernelStore<'_>, n: usize, problem: &Problem, tol: f64, max_iter: usize, seed: u64) -> Solution {
    let l = problem.signs.len();
    let s = &problem.signs;
    let c = problem.c;
    let mut alpha = vec![0.0; l];
    let mut grad = problem.linear.clone();
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut rng::seeded(seed));

    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut ki = vec![0.0; n];
    let mut kj = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let mut sel_i = usize::MAX;
        let mut sel_j = usize::MAX;
        for &t in &order {
            let v = -s[t] * grad[t];
            if in_up(alpha[t], s[t]) && v > gmax {
                gmax = v;
                sel_i = t;
            }
            if in_low(alpha[t], s[t]) && v < gmin {
                gmin = v;
                sel_j = t;
            }
        }
        gap = gmax - gmin;
        if sel_i == usize::MAX || sel_j == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (sel_i, sel_j);
        let (bi, bj) = (i % n, j % n);
        kernel.load_pair(bi, bj, &mut ki, &mut kj);
        let qii = ki[bi];
        let qjj = kj[bj];
        let qij = s[i] * s[j] * ki[bj];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if s[i] != s[j] {
            let mut quad = qii + qjj + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = qii + qjj - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        let di = (ai - old_i) * s[i];
        let dj = (aj - old_j) * s[j];
        for t in 0..l {
            let bt = t % n;
            grad[t] += s[t] * (ki[bt] * di + kj[bt] * dj);
        }
    }

    let rho = compute_rho(&alpha, &grad, s, c);
    let objective = -0.5
        * alpha
            .iter()
            .zip(&grad)
            .zip(&problem.linear)
            .map(|((a, g), p)| a * (g + p))
            .sum::<f64>();
    Solution {
        alpha,
        rho,
        iterations,
        converged,
        objective,
        gap,
    }
}

/// Offset from free variables, or the midpoint of the feasible interval when
/// every variable sits on a bound.
fn compute_rho(alpha: &[f64], grad: &[f64], s: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free = 0usize;
    let mut sum_free = 0.0;
    for t in 0..alpha.len() {
        let yg = s[t] * grad[t];
        if alpha[t] >= c {
            if s[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        0.5 * (ub + lb)
    }
}
