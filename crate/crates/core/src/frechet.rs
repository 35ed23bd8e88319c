//! Gaussian summaries of cohorts and the squared Fréchet distance between
//! them, with percentile bootstrap intervals and a bootstrap z-test.
//!
//! All distances here are **squared** (the FID convention):
//!
//! ```text
//! d² = ‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)
//! ```
//!
//! The cross term is taken from the eigenvalues of the symmetric PSD product
//! `Σa^½ Σb Σa^½`, whose spectrum equals that of `Σa Σb`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{sqrtm_psd, sym_eigenvalues, Matrix};
use crate::{rng, stats, Error, Result};

pub const DEFAULT_RIDGE_SCALE: f64 = 1e-6;
pub const DEFAULT_RESAMPLES: usize = 1000;

/// Mean and (ridged) sample covariance of one cohort.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub n: usize,
    /// Amount actually added to the covariance diagonal.
    pub ridge: f64,
}

impl GaussianSummary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Summary from known parameters (no sampling, no ridge).
    pub fn from_parameters(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.rows(),
            });
        }
        Ok(Self {
            mean,
            covariance,
            n: usize::MAX,
            ridge: 0.0,
        })
    }
}

/// Column means and unbiased covariance (divisor `n − 1`) of the selected
/// rows, symmetrized, plus a ridge of `ridge_scale · Tr(Σ) / D`.
fn fit_rows(points: &Matrix, rows: impl Iterator<Item = usize> + Clone, n: usize, ridge_scale: f64) -> Result<GaussianSummary> {
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, found: n });
    }
    if !(ridge_scale >= 0.0) {
        return Err(Error::InvalidArgument("ridge_scale must be nonnegative".into()));
    }
    let d = points.cols();
    let mut mean = alloc::vec![0.0; d];
    for i in rows.clone() {
        for (m, &v) in mean.iter_mut().zip(points.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = Matrix::zeros(d, d);
    let mut centered = alloc::vec![0.0; d];
    for i in rows {
        for ((c, &v), &m) in centered.iter_mut().zip(points.row(i)).zip(&mean) {
            *c = v - m;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let row = cov.row_mut(a);
            for b in a..d {
                row[b] += ca * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let ridge = if d > 0 { ridge_scale * cov.trace() / d as f64 } else { 0.0 };
    for a in 0..d {
        cov[(a, a)] += ridge;
    }
    Ok(GaussianSummary {
        mean,
        covariance: cov,
        n,
        ridge,
    })
}

/// Fits a [`GaussianSummary`] to the rows of `points`.
pub fn fit_gaussian(points: &Matrix, ridge_scale: f64) -> Result<GaussianSummary> {
    fit_rows(points, 0..points.rows(), points.rows(), ridge_scale)
}

/// Fits a summary to `points.row(i)` for each `i` in `indices` (repeats
/// count), without materialising the resample.
pub fn fit_gaussian_indexed(points: &Matrix, indices: &[usize], ridge_scale: f64) -> Result<GaussianSummary> {
    fit_rows(points, indices.iter().copied(), indices.len(), ridge_scale)
}

/// Squared Fréchet distance between two Gaussian summaries, clamped at 0.
pub fn frechet_distance(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    // identical summaries are at distance exactly zero; the trace identity
    // below would only reproduce that up to round-off
    if a.mean == b.mean && a.covariance == b.covariance {
        return Ok(0.0);
    }
    let mean_term: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();

    let sa = sqrtm_psd(&a.covariance)?;
    let mut inner = sa.matmul(&b.covariance)?.matmul(&sa)?;
    inner.symmetrize();
    let cross: f64 = sym_eigenvalues(&inner)?
        .into_iter()
        .map(|l| libm::sqrt(l.max(0.0)))
        .sum();

    let d2 = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(d2.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub ridge_scale: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
            ridge_scale: DEFAULT_RIDGE_SCALE,
        }
    }
}

impl BootstrapConfig {
    pub fn new(resamples: usize, seed: u64) -> Self {
        Self {
            resamples,
            seed,
            ..Self::default()
        }
    }
}

/// Point estimate plus bootstrap distribution of the squared FD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetReport {
    pub point: f64,
    pub boot: Vec<f64>,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl FrechetReport {
    /// Assembles a report from already computed replicates (in resample
    /// order), e.g. when the caller evaluated them in parallel.
    pub fn from_replicates(point: f64, boot: Vec<f64>, seed: u64) -> Self {
        let (ci_lo, ci_hi) = stats::percentile_ci95(&boot);
        Self {
            point,
            resamples: boot.len(),
            boot,
            ci_lo,
            ci_hi,
            seed,
        }
    }
}

fn check_cohorts(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Empty);
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: b.cols(),
        });
    }
    Ok(())
}

/// Resample `r` of a bootstrap run: `n_a` rows drawn with replacement from
/// `a` and `n_b` from `b`, using stream `r` of `seed`.
pub fn frechet_replicate(a: &Matrix, b: &Matrix, cfg: &BootstrapConfig, r: usize) -> Result<f64> {
    let mut rng = rng::stream_rng(cfg.seed, r as u64);
    let ia: Vec<usize> = (0..a.rows()).map(|_| rng.random_range(0..a.rows())).collect();
    let ib: Vec<usize> = (0..b.rows()).map(|_| rng.random_range(0..b.rows())).collect();
    let ga = fit_gaussian_indexed(a, &ia, cfg.ridge_scale)?;
    let gb = fit_gaussian_indexed(b, &ib, cfg.ridge_scale)?;
    frechet_distance(&ga, &gb)
}

/// Squared FD on the full cohorts plus `cfg.resamples` bootstrap replicates
/// and their 2.5/97.5 percentile interval.
pub fn bootstrap_frechet(a: &Matrix, b: &Matrix, cfg: &BootstrapConfig) -> Result<FrechetReport> {
    check_cohorts(a, b)?;
    if cfg.resamples < 2 {
        return Err(Error::InvalidArgument("need at least 2 bootstrap resamples".into()));
    }
    let d = a.cols();
    if a.rows() < d || b.rows() < d {
        log::warn!(
            "cohort sizes ({}, {}) below dimension {}; covariance relies on the ridge",
            a.rows(),
            b.rows(),
            d
        );
    }
    let point = frechet_distance(&fit_gaussian(a, cfg.ridge_scale)?, &fit_gaussian(b, cfg.ridge_scale)?)?;
    let boot = (0..cfg.resamples)
        .map(|r| frechet_replicate(a, b, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrechetReport::from_replicates(point, boot, cfg.seed))
}

/// Two-sided z-test on the difference of mean bootstrap FDs.
///
/// `z = (mean(boot₁) − mean(boot₂)) / √(var(boot₁) + var(boot₂))`;
/// negative `z` means the first report's FD is smaller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftTest {
    pub z: f64,
    pub p: f64,
    pub pair_a: String,
    pub pair_b: String,
}

pub fn shift_z_test(
    name_a: impl Into<String>,
    r1: &FrechetReport,
    name_b: impl Into<String>,
    r2: &FrechetReport,
) -> Result<ShiftTest> {
    if r1.boot.len() < 2 || r2.boot.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: r1.boot.len().min(r2.boot.len()),
        });
    }
    let pooled = stats::sample_variance(&r1.boot) + stats::sample_variance(&r2.boot);
    if !(pooled > 0.0) {
        return Err(Error::ZeroPooledVariance);
    }
    let z = (stats::mean(&r1.boot) - stats::mean(&r2.boot)) / libm::sqrt(pooled);
    Ok(ShiftTest {
        z,
        p: stats::two_sided_p(z),
        pair_a: name_a.into(),
        pair_b: name_b.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn summary(mean: &[f64], diag: &[f64]) -> GaussianSummary {
        GaussianSummary::from_parameters(mean.to_vec(), Matrix::from_diagonal(diag)).unwrap()
    }

    #[test]
    fn fit_degenerate_cloud() {
        let m = Matrix::from_rows(&[[1.5, -2.0], [1.5, -2.0]]).unwrap();
        let g = fit_gaussian(&m, 0.0).unwrap();
        assert_eq!(g.mean, vec![1.5, -2.0]);
        assert!(g.covariance.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(g.ridge, 0.0);
    }

    #[test]
    fn fit_hand_computed() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let g = fit_gaussian(&m, 0.0).unwrap();
        assert_eq!(g.mean, vec![1.0, 0.0]);
        assert_eq!(g.covariance.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_applies_ridge() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let g = fit_gaussian(&m, 0.5).unwrap();
        // trace 2, D 2 → ridge 0.5
        assert_eq!(g.ridge, 0.5);
        assert_eq!(g.covariance.as_slice(), &[2.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn fit_needs_two_points() {
        let m = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(fit_gaussian(&m, 0.0), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn closed_form_cases() {
        let a = summary(&[0.0], &[1.0]);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
        let b = summary(&[3.0], &[1.0]);
        assert!((frechet_distance(&a, &b).unwrap() - 9.0).abs() < 1e-9);
        let c = summary(&[0.0, 0.0], &[1.0, 4.0]);
        let d = summary(&[0.0, 0.0], &[4.0, 1.0]);
        assert!((frechet_distance(&c, &d).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let a = summary(&[0.0], &[1.0]);
        let b = summary(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(frechet_distance(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn z_test_identity_and_degenerate() {
        let r = FrechetReport::from_replicates(1.0, vec![1.0, 2.0, 3.0], 0);
        let t = shift_z_test("a", &r, "a", &r).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p, 1.0);
        let flat = FrechetReport::from_replicates(1.0, vec![1.0, 1.0], 0);
        assert_eq!(shift_z_test("a", &flat, "b", &flat), Err(Error::ZeroPooledVariance));
    }

    #[test]
    fn bootstrap_rejects_bad_arguments() {
        let a = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(bootstrap_frechet(&a, &a, &BootstrapConfig::new(1, 0)).is_err());
        let empty = Matrix::zeros(0, 1);
        assert_eq!(bootstrap_frechet(&empty, &a, &BootstrapConfig::new(10, 0)), Err(Error::Empty));
    }
}
