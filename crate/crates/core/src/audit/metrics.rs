use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, stats, Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
/// Redraws allowed for a degenerate (constant) Pearson resample before it is
/// skipped.
pub const MAX_REDRAWS: usize = 10;

/// Fraction of agreeing pairs with a percentile bootstrap interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub point: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub resamples: usize,
    pub seed: u64,
}

/// Pearson correlation with a percentile bootstrap interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub r: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub resamples: usize,
    pub seed: u64,
    /// Resamples dropped after [`MAX_REDRAWS`] constant redraws.
    pub skipped: usize,
}

fn check_pairs(left: usize, right: usize, min: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(Error::Empty);
    }
    if left < min {
        return Err(Error::TooFewSamples { required: min, found: left });
    }
    Ok(())
}

fn check_resamples(resamples: usize) -> Result<()> {
    if resamples < 2 {
        return Err(Error::InvalidArgument("need at least 2 bootstrap resamples".into()));
    }
    Ok(())
}

/// Accuracy of `pred` against `truth`; resamples index pairs with
/// replacement, stream `r` of `seed` for resample `r`.
pub fn accuracy_ci<T: PartialEq>(pred: &[T], truth: &[T], resamples: usize, seed: u64) -> Result<AccuracyReport> {
    check_pairs(pred.len(), truth.len(), 1)?;
    check_resamples(resamples)?;
    let n = pred.len();
    let hits: Vec<bool> = pred.iter().zip(truth).map(|(p, t)| p == t).collect();
    let point = hits.iter().filter(|&&h| h).count() as f64 / n as f64;
    let boot: Vec<f64> = (0..resamples)
        .map(|r| {
            let mut rng = rng::stream_rng(seed, r as u64);
            let k = (0..n).filter(|_| hits[rng.random_range(0..n)]).count();
            k as f64 / n as f64
        })
        .collect();
    let (ci_lo, ci_hi) = stats::percentile_ci95(&boot);
    Ok(AccuracyReport {
        point,
        ci_lo,
        ci_hi,
        n,
        resamples,
        seed,
    })
}

fn pearson_indexed(x: &[f64], y: &[f64], idx: impl Iterator<Item = usize> + Clone) -> Option<f64> {
    let n = idx.clone().count() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in idx.clone() {
        sx += x[i];
        sy += y[i];
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in idx {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (libm::sqrt(sxx) * libm::sqrt(syy))).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x.len(), y.len(), 2)?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    pearson_indexed(x, y, 0..x.len()).ok_or(Error::ConstantInput)
}

/// Pearson `r` with a percentile bootstrap interval. A resample in which
/// either side is constant is redrawn up to [`MAX_REDRAWS`] times, then
/// skipped and counted.
pub fn pearson_ci(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<CorrelationReport> {
    let r = pearson(x, y)?;
    check_resamples(resamples)?;
    let n = x.len();
    let mut boot = Vec::with_capacity(resamples);
    let mut skipped = 0;
    let mut idx = alloc::vec![0usize; n];
    for b in 0..resamples {
        let mut rng = rng::stream_rng(seed, b as u64);
        let mut value = None;
        for _ in 0..=MAX_REDRAWS {
            for slot in idx.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            value = pearson_indexed(x, y, idx.iter().copied());
            if value.is_some() {
                break;
            }
        }
        match value {
            Some(v) => boot.push(v),
            None => skipped += 1,
        }
    }
    let (ci_lo, ci_hi) = if boot.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        stats::percentile_ci95(&boot)
    };
    Ok(CorrelationReport {
        r,
        ci_lo,
        ci_hi,
        n,
        resamples,
        seed,
        skipped,
    })
}
