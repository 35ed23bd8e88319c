use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, EmbeddingRecord, LabelSchema};
use crate::linalg::{psd_factor, sym_eigen, Matrix};
use crate::{rng, Error, Result};

/// Covariance of a planted cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// `s² I`, given as the variance `s²`.
    Isotropic(f64),
    Diagonal(Vec<f64>),
    /// Row-major, one inner vector per row.
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    pub fn to_matrix(&self, dim: usize) -> Result<Matrix> {
        let m = match self {
            Self::Isotropic(v) => {
                let mut m = Matrix::identity(dim);
                for i in 0..dim {
                    m[(i, i)] = *v;
                }
                m
            }
            Self::Diagonal(d) => {
                if d.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: d.len(),
                    });
                }
                Matrix::from_diagonal(d)
            }
            Self::Full(rows) => {
                let m = Matrix::from_rows(rows)?;
                if m.rows() != dim || m.cols() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.rows(),
                    });
                }
                m
            }
        };
        let eig = sym_eigen(&m)?;
        let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if min < -1e-10 * scale {
            return Err(Error::NotPsd(min));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub name: String,
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub n: usize,
    /// Consecutive records share a group id in blocks of this size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
}

/// How clean label values are assigned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Fixed value per cohort; cohorts not listed get `default`.
    ByCohort { values: BTreeMap<String, String>, default: String },
    /// `positive` where `direction · x > threshold`, else `negative`.
    Halfspace {
        direction: Vec<f64>,
        threshold: f64,
        positive: String,
        negative: String,
    },
}

impl LabelRule {
    fn values(&self) -> Vec<String> {
        let mut out: Vec<String> = match self {
            Self::ByCohort { values, default } => values.values().cloned().chain([default.clone()]).collect(),
            Self::Halfspace { positive, negative, .. } => vec![positive.clone(), negative.clone()],
        };
        out.sort();
        out.dedup();
        out
    }

    fn assign(&self, cohort: &str, x: &[f64]) -> String {
        match self {
            Self::ByCohort { values, default } => values.get(cohort).unwrap_or(default).clone(),
            Self::Halfspace {
                direction,
                threshold,
                positive,
                negative,
            } => {
                let s: f64 = direction.iter().zip(x).map(|(a, b)| a * b).sum();
                if s > *threshold {
                    positive.clone()
                } else {
                    negative.clone()
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPlan {
    pub name: String,
    pub rule: LabelRule,
    pub flip_rate: f64,
    /// Restricts flipping to these cohorts; all cohorts when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_cohorts: Option<Vec<String>>,
    /// Also store the clean value under this label name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_name: Option<String>,
}

/// `conf = clamp(σ(w·x + bias + shift[cohort]) + noise, 0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePlan {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub noise_std: f64,
    #[serde(default)]
    pub cohort_shift: BTreeMap<String, f64>,
    /// Replaces `weights` for the listed cohorts.
    #[serde(default)]
    pub cohort_weights: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    pub cohorts: Vec<CohortSpec>,
    #[serde(default)]
    pub label_plans: Vec<LabelPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<ConfidencePlan>,
    pub seed: u64,
}

/// What the generator planted, aligned with the dataset's record order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub clean_labels: BTreeMap<String, Vec<String>>,
    pub flip_mask: BTreeMap<String, Vec<bool>>,
    /// Confidence before noise and clamping.
    pub true_confidence: Option<Vec<f64>>,
    pub cohort_names: Vec<String>,
    /// Closed-form squared FD between planted cohorts, indexed like
    /// `cohort_names`.
    pub fd_matrix: Vec<Vec<f64>>,
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-v))
}

impl SynthSpec {
    fn validate(&self) -> Result<Vec<Matrix>> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be positive".into()));
        }
        let mut covs = Vec::with_capacity(self.cohorts.len());
        for c in &self.cohorts {
            if c.mean.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: c.mean.len(),
                });
            }
            if c.n < 2 {
                return Err(Error::TooFewSamples { required: 2, found: c.n });
            }
            if c.group_size == Some(0) {
                return Err(Error::InvalidArgument("group_size must be positive".into()));
            }
            covs.push(c.covariance.to_matrix(self.dim)?);
        }
        for p in &self.label_plans {
            if !(0.0..0.5).contains(&p.flip_rate) {
                return Err(Error::InvalidArgument(format!(
                    "flip_rate for `{}` must lie in [0, 0.5)",
                    p.name
                )));
            }
            if let LabelRule::Halfspace { direction, .. } = &p.rule {
                if direction.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: direction.len(),
                    });
                }
            }
        }
        if let Some(cp) = &self.confidence {
            for w in core::iter::once(&cp.weights).chain(cp.cohort_weights.values()) {
                if w.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: w.len(),
                    });
                }
            }
            if !(cp.noise_std >= 0.0) {
                return Err(Error::InvalidArgument("noise_std must be nonnegative".into()));
            }
        }
        Ok(covs)
    }
}

/// Samples the planted dataset. Each cohort draws vectors, label flips and
/// confidence noise from its own streams of `spec.seed`, so adding a cohort
/// never perturbs the others.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, GroundTruth)> {
    let covs = spec.validate()?;
    let d = spec.dim;
    let mut records = Vec::new();
    let mut clean: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut flips: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    let mut true_conf = Vec::new();

    for (ci, (cohort, cov)) in spec.cohorts.iter().zip(&covs).enumerate() {
        let factor = psd_factor(cov)?;
        let base = 4 * ci as u64;
        let mut vec_rng = rng::stream_rng(spec.seed, base);
        let mut flip_rng = rng::stream_rng(spec.seed, base + 1);
        let mut noise_rng = rng::stream_rng(spec.seed, base + 2);
        let mut z = vec![0.0; d];
        let mut x = vec![0.0; d];
        for i in 0..cohort.n {
            for v in z.iter_mut() {
                *v = vec_rng.sample(StandardNormal);
            }
            let mut vector = Vec::with_capacity(d);
            for r in 0..d {
                let mut acc = cohort.mean[r];
                for k in 0..d {
                    acc += factor[(r, k)] * z[k];
                }
                let stored = acc as f32;
                vector.push(stored);
                x[r] = stored as f64;
            }
            let mut rec = EmbeddingRecord::new(format!("{}-{:05}", cohort.name, i), cohort.name.clone(), vector);
            if let Some(g) = cohort.group_size {
                rec = rec.with_group(format!("{}-g{:04}", cohort.name, i / g));
            }

            for plan in &spec.label_plans {
                let value = plan.rule.assign(&cohort.name, &x);
                let eligible = plan
                    .flip_cohorts
                    .as_ref()
                    .map_or(true, |cs| cs.iter().any(|c| *c == cohort.name));
                let draw: f64 = flip_rng.random();
                let flipped = eligible && draw < plan.flip_rate;
                let observed = if flipped {
                    let others: Vec<String> = plan.rule.values().into_iter().filter(|v| *v != value).collect();
                    if others.is_empty() {
                        value.clone()
                    } else {
                        others[flip_rng.random_range(0..others.len())].clone()
                    }
                } else {
                    value.clone()
                };
                if let Some(cn) = &plan.clean_name {
                    rec = rec.with_label(cn.clone(), value.clone());
                }
                rec = rec.with_label(plan.name.clone(), observed);
                clean.entry(plan.name.clone()).or_default().push(value);
                flips.entry(plan.name.clone()).or_default().push(flipped);
            }

            if let Some(cp) = &spec.confidence {
                let w = cp.cohort_weights.get(&cohort.name).unwrap_or(&cp.weights);
                let lin: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                    + cp.bias
                    + cp.cohort_shift.get(&cohort.name).copied().unwrap_or(0.0);
                let t = logistic(lin);
                let noise: f64 = noise_rng.sample::<f64, _>(StandardNormal) * cp.noise_std;
                true_conf.push(t);
                rec = rec.with_confidence((t + noise).clamp(0.0, 1.0));
            }
            records.push(rec);
        }
    }

    let mut schema = LabelSchema::new();
    for plan in &spec.label_plans {
        let values: alloc::collections::BTreeSet<String> = plan.rule.values().into_iter().collect();
        if let Some(cn) = &plan.clean_name {
            schema.insert(cn.clone(), values.clone());
        }
        schema.insert(plan.name.clone(), values);
    }
    let ds = Dataset::with_schema(d, records, schema)?;

    let k = spec.cohorts.len();
    let mut fd = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = super::closed_form_fd(&spec.cohorts[i], &spec.cohorts[j], d)?;
            fd[i][j] = v;
            fd[j][i] = v;
        }
    }
    let truth = GroundTruth {
        clean_labels: clean,
        flip_mask: flips,
        true_confidence: spec.confidence.as_ref().map(|_| true_conf),
        cohort_names: spec.cohorts.iter().map(|c| c.name.clone()).collect(),
        fd_matrix: fd,
    };
    Ok((ds, truth))
}
