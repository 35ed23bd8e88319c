//! Exact (O(n²)) t-SNE for inspecting embedding clusters in 2-d.
//!
//! Conditional affinities are Gaussian with a per-point bandwidth found by
//! bisection on `log σ` so that each row hits the requested perplexity. The
//! low-dimensional similarities use a Student-t kernel with one degree of
//! freedom, and coordinates follow momentum gradient descent with per-entry
//! gains and early exaggeration.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{rng, Error, Result};

/// Entries of the joint affinity matrix are floored here before the final
/// normalisation.
pub const AFFINITY_FLOOR: f64 = 1e-12;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;
/// KL checkpoints are recorded this often after the exaggeration phase.
pub const KL_CHECKPOINT_EVERY: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration_factor: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub entropy_tol: f64,
    pub max_bisection_steps: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration_factor: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            entropy_tol: 1e-5,
            max_bisection_steps: 50,
        }
    }
}

impl TsneConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::TooFewSamples { required: 4, found: n });
        }
        if !(self.perplexity > 1.0) || self.perplexity >= (n - 1) as f64 {
            return Err(Error::InvalidArgument(alloc::format!(
                "perplexity must lie in (1, n - 1) = (1, {}), got {}",
                n - 1,
                self.perplexity
            )));
        }
        if !(self.learning_rate > 0.0) || self.iterations == 0 {
            return Err(Error::InvalidArgument("learning rate and iterations must be positive".into()));
        }
        if !(self.entropy_tol > 0.0) {
            return Err(Error::InvalidArgument("entropy_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of calibrating one row of conditional affinities.
#[derive(Clone, Debug, PartialEq)]
pub struct RowCalibration {
    pub sigma: f64,
    pub p_row: Vec<f64>,
    /// `exp(H)` of `p_row` (H in nats), i.e. `2^H` with H in bits.
    pub achieved_perplexity: f64,
    /// `false` when the target was not reached within the step budget; the
    /// best row found is returned anyway.
    pub converged: bool,
}

/// Row distribution and its perplexity for bandwidth `exp(log_sigma)`.
fn row_at(sq_dists: &[f64], dmin: f64, log_sigma: f64, out: &mut [f64]) -> f64 {
    let beta = 0.5 * libm::exp(-2.0 * log_sigma);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(sq_dists) {
        let shifted = (d - dmin) * beta;
        let w = libm::exp(-shifted);
        *o = w;
        sum += w;
        weighted += w * shifted;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    // H = ln(sum) + E[shifted]
    libm::exp(libm::log(sum) + weighted / sum)
}

/// Finds σ with `|2^H(p) − perplexity| ≤ tol · perplexity` for
/// `p ∝ exp(−d² / 2σ²)`.
pub fn calibrate_row(sq_dists: &[f64], perplexity: f64, tol: f64, max_steps: usize) -> Result<RowCalibration> {
    if sq_dists.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: sq_dists.len(),
        });
    }
    if sq_dists.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::NonFinite("squared distances"));
    }
    if !(perplexity > 0.0) || perplexity > sq_dists.len() as f64 {
        return Err(Error::InvalidArgument("perplexity cannot exceed the number of neighbours".into()));
    }
    let dmin = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let spread: f64 = sq_dists.iter().map(|d| d - dmin).sum::<f64>() / sq_dists.len() as f64;
    let mut log_sigma = if spread > 0.0 { 0.5 * libm::log(spread) } else { 0.0 };

    let mut row = vec![0.0; sq_dists.len()];
    let mut best_row = row.clone();
    let mut best = (f64::INFINITY, log_sigma, 0.0);
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;

    for _ in 0..max_steps.max(1) {
        let perp = row_at(sq_dists, dmin, log_sigma, &mut row);
        let err = (perp - perplexity).abs();
        if err < best.0 {
            best = (err, log_sigma, perp);
            best_row.copy_from_slice(&row);
        }
        if err <= tol * perplexity {
            break;
        }
        // perplexity grows with σ
        if perp > perplexity {
            hi = Some(log_sigma);
        } else {
            lo = Some(log_sigma);
        }
        log_sigma = match (lo, hi) {
            (Some(l), Some(h)) => 0.5 * (l + h),
            (Some(l), None) => l + 1.0,
            (None, Some(h)) => h - 1.0,
            (None, None) => unreachable!(),
        };
    }

    let converged = best.0 <= tol * perplexity;
    if !converged {
        log::warn!(
            "perplexity calibration stopped at {} (target {})",
            best.2,
            perplexity
        );
    }
    Ok(RowCalibration {
        sigma: libm::exp(best.1),
        p_row: best_row,
        achieved_perplexity: best.2,
        converged,
    })
}

/// Pairwise squared Euclidean distances.
pub fn squared_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[(i, j)] = s;
            d[(j, i)] = s;
        }
    }
    d
}

/// Symmetrized joint affinities together with the per-row calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinities {
    /// `n × n`, zero diagonal, sums to 1.
    pub p: Matrix,
    pub sigmas: Vec<f64>,
    pub achieved_perplexity: Vec<f64>,
    pub unconverged_rows: Vec<usize>,
}

/// `P = (P_cond + P_condᵀ) / 2n`, floored at [`AFFINITY_FLOOR`] off the
/// diagonal and renormalised.
pub fn joint_affinities(vectors: &Matrix, config: &TsneConfig) -> Result<Affinities> {
    let n = vectors.rows();
    config.validate(n)?;
    if vectors.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input vectors"));
    }
    let d2 = squared_distances(vectors);
    let mut cond = Matrix::zeros(n, n);
    let mut sigmas = Vec::with_capacity(n);
    let mut achieved = Vec::with_capacity(n);
    let mut unconverged = Vec::new();
    let mut others = vec![0.0; n - 1];
    for i in 0..n {
        let row = d2.row(i);
        others[..i].copy_from_slice(&row[..i]);
        others[i..].copy_from_slice(&row[i + 1..]);
        let cal = calibrate_row(&others, config.perplexity, config.entropy_tol, config.max_bisection_steps)?;
        let dst = cond.row_mut(i);
        dst[..i].copy_from_slice(&cal.p_row[..i]);
        dst[i + 1..].copy_from_slice(&cal.p_row[i..]);
        sigmas.push(cal.sigma);
        achieved.push(cal.achieved_perplexity);
        if !cal.converged {
            unconverged.push(i);
        }
    }

    let mut p = Matrix::zeros(n, n);
    let denom = 2.0 * n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ((cond[(i, j)] + cond[(j, i)]) / denom).max(AFFINITY_FLOOR);
            p[(i, j)] = v;
            p[(j, i)] = v;
            total += 2.0 * v;
        }
    }
    let data = p.as_slice().iter().map(|v| v / total).collect();
    Ok(Affinities {
        p: Matrix::new(n, n, data)?,
        sigmas,
        achieved_perplexity: achieved,
        unconverged_rows: unconverged,
    })
}

/// KL(P‖Q) and its gradient with respect to the 2-d coordinates.
///
/// `grad_i = 4 Σ_j (p_ij − q_ij)(y_i − y_j) / (1 + ‖y_i − y_j‖²)`.
pub fn kl_and_gradient(p: &Matrix, y: &[[f64; 2]]) -> Result<(f64, Vec<[f64; 2]>)> {
    let n = y.len();
    if p.rows() != n || p.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.rows(),
        });
    }
    if y.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::NonFinite("coordinates"));
    }
    let kernel = |i: usize, j: usize| {
        let dx = y[i][0] - y[j][0];
        let dy = y[i][1] - y[j][1];
        1.0 / (1.0 + dx * dx + dy * dy)
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            z += 2.0 * kernel(i, j);
        }
    }
    let mut kl = 0.0;
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let prow = p.row(i);
        let mut gx = 0.0;
        let mut gy = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = kernel(i, j);
            let q = w / z;
            let pij = prow[j];
            if pij > 0.0 {
                kl += pij * libm::log(pij / q);
            }
            let m = (pij - q) * w;
            gx += m * (y[i][0] - y[j][0]);
            gy += m * (y[i][1] - y[j][1]);
        }
        grad[i] = [4.0 * gx, 4.0 * gy];
    }
    Ok((kl, grad))
}

/// 2-d coordinates for each input id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub final_kl: f64,
    pub config: TsneConfig,
    /// `(iteration, KL)` recorded every [`KL_CHECKPOINT_EVERY`] iterations
    /// once exaggeration is over, measured before that iteration's update.
    pub kl_trace: Vec<(usize, f64)>,
    pub unconverged_rows: Vec<usize>,
}

/// Runs t-SNE on the rows of `vectors`.
pub fn tsne_embed(vectors: &Matrix, ids: &[String], config: &TsneConfig) -> Result<Projection> {
    let n = vectors.rows();
    if ids.len() != n {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: n,
        });
    }
    let aff = joint_affinities(vectors, config)?;
    let p = aff.p;
    let exaggerated = Matrix::new(
        n,
        n,
        p.as_slice().iter().map(|v| v * config.exaggeration_factor).collect(),
    )?;

    let mut rng = rng::seeded(config.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [a * INIT_STD, b * INIT_STD]
        })
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::new();

    for it in 0..config.iterations {
        let exaggerating = it < config.exaggeration_iters;
        let target = if exaggerating { &exaggerated } else { &p };
        let (kl, grad) = kl_and_gradient(target, &y)?;
        if !exaggerating && (it - config.exaggeration_iters) % KL_CHECKPOINT_EVERY == 0 {
            kl_trace.push((it, kl));
        }
        let momentum = if it < config.momentum_switch_iter {
            config.momentum_early
        } else {
            config.momentum_late
        };
        for i in 0..n {
            for k in 0..2 {
                let g = grad[i][k];
                let v = velocity[i][k];
                gains[i][k] = if (g > 0.0) != (v > 0.0) {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                };
                velocity[i][k] = momentum * v - config.learning_rate * gains[i][k] * g;
                y[i][k] += velocity[i][k];
            }
        }
        // recentre
        let (mut cx, mut cy) = (0.0, 0.0);
        for c in &y {
            cx += c[0];
            cy += c[1];
        }
        cx /= n as f64;
        cy /= n as f64;
        for c in &mut y {
            c[0] -= cx;
            c[1] -= cy;
        }
    }
    let (final_kl, _) = kl_and_gradient(&p, &y)?;
    Ok(Projection {
        ids: ids.to_vec(),
        coords: y,
        final_kl: final_kl.max(0.0),
        config: config.clone(),
        kl_trace,
        unconverged_rows: aff.unconverged_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_rows() {
        let c = calibrate_row(&[2.0, 2.0, 2.0], 3.0, 1e-5, 50).unwrap();
        assert!(c.converged);
        for p in &c.p_row {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let c = calibrate_row(&[0.7, 0.7], 2.0, 1e-5, 50).unwrap();
        assert_eq!(c.p_row, vec![0.5, 0.5]);
    }

    #[test]
    fn entropy_target_reached() {
        let c = calibrate_row(&[1.0, 2.0, 3.0, 4.0], 2.0, 1e-5, 50).unwrap();
        assert!(c.converged);
        let h_bits: f64 = -c.p_row.iter().map(|p| p * libm::log2(*p)).sum::<f64>();
        assert!((h_bits - 1.0).abs() < 1e-4);
        assert!((c.p_row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_perplexity_is_flagged() {
        // identical distances pin perplexity at the row length
        let c = calibrate_row(&[1.0, 1.0, 1.0], 2.0, 1e-5, 50).unwrap();
        assert!(!c.converged);
    }

    #[test]
    fn too_few_points() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| String::from(*s)).collect();
        let cfg = TsneConfig {
            perplexity: 1.5,
            ..TsneConfig::default()
        };
        assert!(matches!(tsne_embed(&x, &ids, &cfg), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn square_affinities_are_symmetric() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let cfg = TsneConfig {
            perplexity: 2.0,
            ..TsneConfig::default()
        };
        let a = joint_affinities(&x, &cfg).unwrap();
        let p = &a.p;
        let edge = p[(0, 1)];
        for (i, j) in [(1, 2), (2, 3), (3, 0)] {
            assert!((p[(i, j)] - edge).abs() < 1e-15);
        }
        assert!((p[(0, 2)] - p[(1, 3)]).abs() < 1e-15);
        assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((0..4).all(|i| p[(i, i)] == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_matching_configuration() {
        let y = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let mut q = Matrix::zeros(4, 4);
        let mut z = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let (dx, dy): (f64, f64) = (y[i][0] - y[j][0], y[i][1] - y[j][1]);
                    let d = dx * dx + dy * dy;
                    q[(i, j)] = 1.0 / (1.0 + d);
                    z += q[(i, j)];
                }
            }
        }
        let data: Vec<f64> = q.as_slice().iter().map(|v| v / z).collect();
        let p = Matrix::new(4, 4, data).unwrap();
        let (kl, g) = kl_and_gradient(&p, &y).unwrap();
        assert!(kl.abs() < 1e-12);
        let norm: f64 = g.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum::<f64>();
        assert!(libm::sqrt(norm) < 1e-8);
    }

    #[test]
    fn non_finite_coordinates_rejected() {
        let p = Matrix::zeros(2, 2);
        assert!(kl_and_gradient(&p, &[[0.0, f64::NAN], [1.0, 1.0]]).is_err());
    }
}
