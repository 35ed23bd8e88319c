//! Dense projected-gradient ascent on the SVC and ε-SVR duals.
//!
//! Deliberately naive: full `Q` in memory, a fixed step, and an exact
//! Euclidean projection onto `{0 ≤ α ≤ C, sᵀα = 0}` after every step. By
//! default the steps use monotone FISTA momentum (a candidate is only
//! accepted when it does not lower the objective), which keeps the ascent
//! property of plain projected gradient. Only meant as an independent
//! reference for small problems.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{sym_eigenvalues, Matrix};
use crate::{Error, Result};

/// Largest training set the dense oracle accepts.
pub const ORACLE_MAX_N: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub iterations: usize,
    /// Step is `step_scale / λ_max(Q)`.
    pub step_scale: f64,
    /// Objective is recorded this often.
    pub trace_every: usize,
    /// Monotone FISTA momentum; plain projected gradient when `false`.
    pub accelerated: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            step_scale: 1.0,
            trace_every: 1000,
            accelerated: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    /// SVC: `α`. SVR: `α` followed by `α*`.
    pub alpha: Vec<f64>,
    /// Dual objective in maximisation form.
    pub objective: f64,
    /// Objective at iteration 0 and every `trace_every` iterations.
    pub trace: Vec<f64>,
    /// `Σ sᵢ αᵢ` per training point (`α − α*` for SVR).
    pub coefs: Vec<f64>,
    pub bias: f64,
    x: Matrix,
    gamma: f64,
}

impl QpSolution {
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (row, &c) in self.x.iter_rows().zip(&self.coefs) {
            let d2: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += c * libm::exp(-self.gamma * d2);
        }
        acc
    }
}

/// Euclidean projection of `v` onto `{0 ≤ α ≤ c, sᵀα = 0}` with `s ∈ {±1}`.
///
/// `g(λ) = Σ sᵢ clip(vᵢ − λ sᵢ, 0, c)` is nonincreasing and piecewise linear
/// with breakpoints `sᵢ vᵢ` and `sᵢ vᵢ − c` (for `sᵢ = 1`) or `sᵢ vᵢ + c`
/// (for `sᵢ = −1`); the root is found on the bracketing segment exactly.
pub fn project(v: &[f64], s: &[f64], c: f64, out: &mut [f64]) {
    let g = |lambda: f64| -> f64 {
        v.iter()
            .zip(s)
            .map(|(&vi, &si)| si * (vi - lambda * si).clamp(0.0, c))
            .sum()
    };
    let mut bps: Vec<f64> = Vec::with_capacity(2 * v.len());
    for (&vi, &si) in v.iter().zip(s) {
        bps.push(si * vi);
        bps.push(si * vi - si * c);
    }
    bps.sort_by(f64::total_cmp);
    // g(bps[0]) >= 0 >= g(bps[last]); find adjacent pair bracketing zero
    let (mut lo, mut hi) = (0usize, bps.len() - 1);
    let lambda = if g(bps[lo]) <= 0.0 {
        bps[lo]
    } else if g(bps[hi]) >= 0.0 {
        bps[hi]
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if g(bps[mid]) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (gl, gh) = (g(bps[lo]), g(bps[hi]));
        if gl == gh {
            bps[lo]
        } else {
            bps[lo] + gl * (bps[hi] - bps[lo]) / (gl - gh)
        }
    };
    for ((o, &vi), &si) in out.iter_mut().zip(v).zip(s) {
        *o = (vi - lambda * si).clamp(0.0, c);
    }
}

fn kernel(x: &Matrix, gamma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            k[(i, j)] = libm::exp(-gamma * d2);
        }
    }
    k
}

/// Maximises `−(½ αᵀQα + pᵀα)` with `Q_tu = s_t s_u K(t mod n, u mod n)`.
fn ascend(x: &Matrix, gamma: f64, s: &[f64], p: &[f64], c: f64, cfg: &OracleConfig) -> Result<QpSolution> {
    let n = x.rows();
    if n > ORACLE_MAX_N {
        return Err(Error::OracleTooLarge(n));
    }
    if !(gamma > 0.0) || !(c > 0.0) || cfg.iterations == 0 || cfg.trace_every == 0 {
        return Err(Error::InvalidArgument("oracle needs positive gamma, c, iterations".into()));
    }
    let l = s.len();
    let k = kernel(x, gamma);
    let mut q = Matrix::zeros(l, l);
    for t in 0..l {
        for u in 0..l {
            q[(t, u)] = s[t] * s[u] * k[(t % n, u % n)];
        }
    }
    let lmax = sym_eigenvalues(&q)?.into_iter().fold(0.0f64, f64::max).max(1e-12);
    let step = cfg.step_scale / lmax;

    let objective = |a: &[f64], grad: &[f64]| -> f64 {
        // grad = Qα + p, so ½αᵀQα + pᵀα = ½ αᵀ(grad + p)
        -0.5 * a.iter().zip(grad).zip(p).map(|((a, g), p)| a * (g + p)).sum::<f64>()
    };
    let gradient = |a: &[f64], out: &mut [f64]| {
        for t in 0..l {
            let row = q.row(t);
            out[t] = p[t] + row.iter().zip(a).map(|(qv, av)| qv * av).sum::<f64>();
        }
    };

    let mut alpha = vec![0.0; l];
    let mut grad = vec![0.0; l];
    let mut look = vec![0.0; l];
    let mut trial = vec![0.0; l];
    let mut cand = vec![0.0; l];
    let mut cand_grad = vec![0.0; l];
    let mut t_k = 1.0f64;
    gradient(&alpha, &mut grad);
    let mut current = objective(&alpha, &grad);
    let mut trace = Vec::new();
    for it in 0..cfg.iterations {
        if it % cfg.trace_every == 0 {
            trace.push(current);
        }
        // look holds the extrapolated point; its gradient goes in cand_grad
        if cfg.accelerated && it > 0 {
            gradient(&look, &mut cand_grad);
            for t in 0..l {
                trial[t] = look[t] - step * cand_grad[t];
            }
        } else {
            for t in 0..l {
                trial[t] = alpha[t] - step * grad[t];
            }
        }
        project(&trial, s, c, &mut cand);
        gradient(&cand, &mut cand_grad);
        let cand_obj = objective(&cand, &cand_grad);
        if !cfg.accelerated {
            alpha.copy_from_slice(&cand);
            grad.copy_from_slice(&cand_grad);
            current = cand_obj;
            continue;
        }
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t_k * t_k));
        let accept = cand_obj >= current;
        for t in 0..l {
            let prev = alpha[t];
            let next = if accept { cand[t] } else { prev };
            look[t] = next + (t_k / t_next) * (cand[t] - next) + ((t_k - 1.0) / t_next) * (next - prev);
            alpha[t] = next;
        }
        if accept {
            grad.copy_from_slice(&cand_grad);
            current = cand_obj;
        }
        t_k = t_next;
    }
    gradient(&alpha, &mut grad);
    let obj = objective(&alpha, &grad);
    trace.push(obj);

    let bias = -offset(&alpha, &grad, s, c);
    let coefs = (0..n)
        .map(|i| (0..l).filter(|t| t % n == i).map(|t| s[t] * alpha[t]).sum())
        .collect();
    Ok(QpSolution {
        alpha,
        objective: obj,
        trace,
        coefs,
        bias,
        x: x.clone(),
        gamma,
    })
}

/// Offset from the KKT conditions: mean `sᵢ ∇ᵢ` over free variables, else
/// the midpoint of the bound-implied interval.
fn offset(alpha: &[f64], grad: &[f64], s: &[f64], c: f64) -> f64 {
    let margin = 1e-9 * c;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = s[t] * grad[t];
        let at_upper = alpha[t] >= c - margin;
        let at_lower = alpha[t] <= margin;
        if !at_upper && !at_lower {
            sum += yg;
            free += 1;
        } else if (at_upper && s[t] < 0.0) || (at_lower && s[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Reference solution of the soft-margin SVC dual. `y` holds ±1 labels.
pub fn qp_oracle_svc(x: &Matrix, y: &[f64], c: f64, gamma: f64, cfg: &OracleConfig) -> Result<QpSolution> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    let p = vec![-1.0; y.len()];
    ascend(x, gamma, y, &p, c, cfg)
}

/// Reference solution of the ε-SVR dual.
pub fn qp_oracle_svr(x: &Matrix, t: &[f64], c: f64, epsilon: f64, gamma: f64, cfg: &OracleConfig) -> Result<QpSolution> {
    let n = x.rows();
    if t.len() != n {
        return Err(Error::LengthMismatch { left: n, right: t.len() });
    }
    let mut s = vec![1.0; 2 * n];
    let mut p = vec![0.0; 2 * n];
    for i in 0..n {
        s[n + i] = -1.0;
        p[i] = epsilon - t[i];
        p[n + i] = epsilon + t[i];
    }
    ascend(x, gamma, &s, &p, c, cfg)
}
