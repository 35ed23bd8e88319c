//! Shallow RBF-kernel probes on frozen embeddings: a binary support vector
//! classifier and an ε-insensitive support vector regressor, both trained
//! with SMO.

mod cache;
mod grid;
mod smo;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

pub use cache::FULL_CACHE_LIMIT;
pub use grid::{grid_search, GridPoint, GridSearch, ProbeTask, GRID_C, GRID_GAMMA_FACTORS};

use cache::{rbf_sq, sq_dist, KernelStore};

/// `k(x, y) = exp(−γ ‖x − y‖²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub gamma: f64,
}

impl RbfParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be positive".into()));
        }
        Ok(Self { gamma })
    }
}

pub fn rbf(x: &[f64], y: &[f64], params: &RbfParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(rbf_sq(sq_dist(x, y), params.gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Explicit(f64),
    /// `γ = 1 / (D · mean per-feature variance)` of the training set.
    Scale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    /// Defaults to `10 n²` working-set steps.
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub gamma: GammaMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_iter: None,
            seed: 0,
            gamma: GammaMode::Scale,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("c must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument("epsilon must be nonnegative".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if let GammaMode::Explicit(g) = self.gamma {
            RbfParams::new(g)?;
        }
        Ok(())
    }

    fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| 10usize.saturating_mul(n).saturating_mul(n))
    }
}

/// Mean over features of the population variance.
fn mean_feature_variance(x: &Matrix) -> f64 {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..d {
        let mean = (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64;
        total += (0..n).map(|i| (x[(i, j)] - mean) * (x[(i, j)] - mean)).sum::<f64>() / n as f64;
    }
    total / d as f64
}

/// Resolves the kernel width for training on `x`. A constant training set
/// under [`GammaMode::Scale`] falls back to `γ = 1`.
pub fn resolve_gamma(x: &Matrix, mode: GammaMode) -> Result<RbfParams> {
    match mode {
        GammaMode::Explicit(g) => RbfParams::new(g),
        GammaMode::Scale => {
            let v = mean_feature_variance(x);
            if v > 0.0 && v.is_finite() {
                RbfParams::new(1.0 / (x.cols() as f64 * v))
            } else {
                RbfParams::new(1.0)
            }
        }
    }
}

/// Convergence bookkeeping shared by both model kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub converged: bool,
    pub iterations: usize,
    pub dual_objective: f64,
    pub kkt_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvcModel {
    pub support_vectors: Matrix,
    /// `αᵢ yᵢ` for each retained vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub params: RbfParams,
    pub c: f64,
    /// `[negative, positive]`.
    pub classes: [String; 2],
    pub info: FitInfo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    pub support_vectors: Matrix,
    /// `αᵢ − αᵢ*` for each retained vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub params: RbfParams,
    pub c: f64,
    pub epsilon: f64,
    pub info: FitInfo,
}

fn decision(sv: &Matrix, coefs: &[f64], bias: f64, gamma: f64, x: &[f64]) -> Result<f64> {
    if x.len() != sv.cols() {
        return Err(Error::DimensionMismatch {
            expected: sv.cols(),
            found: x.len(),
        });
    }
    let mut acc = 0.0;
    for (row, &a) in sv.iter_rows().zip(coefs) {
        acc += a * rbf_sq(sq_dist(row, x), gamma);
    }
    Ok(acc + bias)
}

impl SvcModel {
    pub fn with_classes(mut self, negative: impl Into<String>, positive: impl Into<String>) -> Self {
        self.classes = [negative.into(), positive.into()];
        self
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        decision(&self.support_vectors, &self.dual_coefs, self.bias, self.params.gamma, x)
    }

    pub fn n_support(&self) -> usize {
        self.dual_coefs.len()
    }
}

impl SvrModel {
    pub fn n_support(&self) -> usize {
        self.dual_coefs.len()
    }
}

fn check_training(x: &Matrix, targets: usize) -> Result<()> {
    if x.rows() != targets {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: targets,
        });
    }
    if x.rows() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: x.rows(),
        });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    Ok(())
}

/// Trains a soft-margin RBF classifier. Labels must be `−1` or `+1`.
///
/// Hitting `max_iter` is not an error: the model comes back with
/// `info.converged == false`.
pub fn train_svc(x: &Matrix, y: &[f64], cfg: &TrainConfig) -> Result<SvcModel> {
    train_svc_with(x, y, cfg, None)
}

pub(crate) fn train_svc_with(x: &Matrix, y: &[f64], cfg: &TrainConfig, row_cache: Option<usize>) -> Result<SvcModel> {
    cfg.validate()?;
    check_training(x, y.len())?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let params = resolve_gamma(x, cfg.gamma)?;
    let n = x.rows();
    let mut kernel = match row_cache {
        Some(cap) => KernelStore::rows(x, params.gamma, cap),
        None => KernelStore::new(x, params.gamma),
    };
    let problem = smo::Problem {
        signs: y.to_vec(),
        linear: alloc::vec![-1.0; n],
        c: cfg.c,
    };
    let sol = smo::solve(&mut kernel, n, &problem, cfg.tol, cfg.max_iter_for(n), cfg.seed);

    let mut keep = Vec::new();
    let mut coefs = Vec::new();
    for (i, (&a, &yi)) in sol.alpha.iter().zip(y).enumerate() {
        if a > 0.0 {
            keep.push(i);
            coefs.push(a * yi);
        }
    }
    Ok(SvcModel {
        support_vectors: x.select_rows(&keep),
        dual_coefs: coefs,
        bias: -sol.rho,
        params,
        c: cfg.c,
        classes: ["-1".to_string(), "+1".to_string()],
        info: FitInfo {
            converged: sol.converged,
            iterations: sol.iterations,
            dual_objective: sol.objective,
            kkt_gap: sol.gap,
        },
    })
}

/// Trains an ε-insensitive RBF regressor.
pub fn train_svr(x: &Matrix, t: &[f64], cfg: &TrainConfig) -> Result<SvrModel> {
    train_svr_with(x, t, cfg, None)
}

pub(crate) fn train_svr_with(x: &Matrix, t: &[f64], cfg: &TrainConfig, row_cache: Option<usize>) -> Result<SvrModel> {
    cfg.validate()?;
    check_training(x, t.len())?;
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression targets"));
    }
    let params = resolve_gamma(x, cfg.gamma)?;
    let n = x.rows();
    let mut kernel = match row_cache {
        Some(cap) => KernelStore::rows(x, params.gamma, cap),
        None => KernelStore::new(x, params.gamma),
    };
    let mut signs = alloc::vec![1.0; 2 * n];
    let mut linear = alloc::vec![0.0; 2 * n];
    for i in 0..n {
        signs[n + i] = -1.0;
        linear[i] = cfg.epsilon - t[i];
        linear[n + i] = cfg.epsilon + t[i];
    }
    let problem = smo::Problem {
        signs,
        linear,
        c: cfg.c,
    };
    let sol = smo::solve(&mut kernel, n, &problem, cfg.tol, cfg.max_iter_for(n), cfg.seed);

    let mut keep = Vec::new();
    let mut coefs = Vec::new();
    for i in 0..n {
        let coef = sol.alpha[i] - sol.alpha[n + i];
        if coef != 0.0 {
            keep.push(i);
            coefs.push(coef);
        }
    }
    Ok(SvrModel {
        support_vectors: x.select_rows(&keep),
        dual_coefs: coefs,
        bias: -sol.rho,
        params,
        c: cfg.c,
        epsilon: cfg.epsilon,
        info: FitInfo {
            converged: sol.converged,
            iterations: sol.iterations,
            dual_objective: sol.objective,
            kkt_gap: sol.gap,
        },
    })
}

/// Predicted label and decision value. A decision value of exactly zero
/// resolves to the positive class.
pub fn predict_class<'m>(model: &'m SvcModel, x: &[f64]) -> Result<(&'m str, f64)> {
    let dv = model.decision_value(x)?;
    let label = if dv >= 0.0 { &model.classes[1] } else { &model.classes[0] };
    Ok((label.as_str(), dv))
}

pub fn predict_value(model: &SvrModel, x: &[f64]) -> Result<f64> {
    decision(&model.support_vectors, &model.dual_coefs, model.bias, model.params.gamma, x)
}
