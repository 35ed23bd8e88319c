//! Planted synthetic datasets and the brute-force references used to check
//! the solvers against them.

mod generate;
mod oracle;

pub use generate::{
    generate, CohortSpec, ConfidencePlan, Covariance, GroundTruth, LabelPlan, LabelRule, SynthSpec,
};
pub use oracle::{project, qp_oracle_svc, qp_oracle_svr, OracleConfig, QpSolution, ORACLE_MAX_N};

use crate::linalg::{psd_factor, sym_eigenvalues, Matrix};
use crate::{Error, Result};

/// Exact squared FD between two planted Gaussians.
///
/// Factors `Σb = F Fᵀ` and uses `Tr (Σa^½ Σb Σa^½)^½ = Σ √λ(Fᵀ Σa F)`,
/// which avoids the square root of `Σa` altogether.
pub fn closed_form_fd(a: &CohortSpec, b: &CohortSpec, dim: usize) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: a.mean.len(),
            found: b.mean.len(),
        });
    }
    let sa = a.covariance.to_matrix(dim)?;
    let sb = b.covariance.to_matrix(dim)?;
    closed_form_fd_parts(&a.mean, &sa, &b.mean, &sb)
}

/// [`closed_form_fd`] on raw means and covariances.
pub fn closed_form_fd_parts(mean_a: &[f64], sa: &Matrix, mean_b: &[f64], sb: &Matrix) -> Result<f64> {
    if mean_a.len() != mean_b.len() || sa.rows() != mean_a.len() || sb.rows() != mean_b.len() {
        return Err(Error::DimensionMismatch {
            expected: mean_a.len(),
            found: mean_b.len(),
        });
    }
    if mean_a == mean_b && sa == sb {
        return Ok(0.0);
    }
    let mean_term: f64 = mean_a.iter().zip(mean_b).map(|(x, y)| (x - y) * (x - y)).sum();
    let f = psd_factor(sb)?;
    let mut inner = f.transpose().matmul(sa)?.matmul(&f)?;
    inner.symmetrize();
    let cross: f64 = sym_eigenvalues(&inner)?.iter().map(|l| libm::sqrt(l.max(0.0))).sum();
    Ok((mean_term + sa.trace() + sb.trace() - 2.0 * cross).max(0.0))
}
