//! Planted scenarios shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use shiftaudit_core::dataset::{filter_by_cohort, split, Dataset, SplitSpec};
use shiftaudit_core::linalg::Matrix;
use shiftaudit_core::rng;
use shiftaudit_core::synth::{generate, CohortSpec, ConfidencePlan, Covariance, GroundTruth, LabelPlan, LabelRule, SynthSpec};

pub fn iso_cohort(name: &str, mean: Vec<f64>, n: usize) -> CohortSpec {
    CohortSpec {
        name: name.into(),
        mean,
        covariance: Covariance::Isotropic(1.0),
        n,
        group_size: None,
    }
}

pub fn axis(d: usize, k: usize, v: f64) -> Vec<f64> {
    let mut m = vec![0.0; d];
    m[k] = v;
    m
}

/// `n` rows of `mean + sd ⊙ z`, drawn directly (not through the generator).
pub fn gaussian_rows(seed: u64, mean: &[f64], sd: &[f64], n: usize) -> Matrix {
    let mut r = rng::seeded(seed);
    let d = mean.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for k in 0..d {
            let z: f64 = r.sample(StandardNormal);
            data.push(mean[k] + sd[k] * z);
        }
    }
    Matrix::new(n, d, data).unwrap()
}

/// Train cohort N(0, I) and two shifted cohorts at squared FD 0.5 and 5.
pub fn near_far_spec(seed: u64, n: usize) -> SynthSpec {
    let d = 8;
    SynthSpec {
        dim: d,
        cohorts: vec![
            iso_cohort("train", vec![0.0; d], n),
            iso_cohort("near", axis(d, 0, 0.5f64.sqrt()), n),
            iso_cohort("far", axis(d, 0, 5.0f64.sqrt()), n),
        ],
        label_plans: vec![],
        confidence: None,
        seed,
    }
}

/// Two modality clusters whose `modality` labels are flipped at `flip_rate`;
/// the clean value is kept as `modality_true`.
pub fn denoise_spec(seed: u64, flip_rate: f64) -> SynthSpec {
    let d = 16;
    SynthSpec {
        dim: d,
        cohorts: vec![
            iso_cohort("japan_nbi", axis(d, 0, 1.3), 2232),
            iso_cohort("japan_wl", axis(d, 0, -1.3), 2232),
        ],
        label_plans: vec![LabelPlan {
            name: "modality".into(),
            rule: LabelRule::ByCohort {
                values: BTreeMap::from([("japan_nbi".to_string(), "nbi".to_string())]),
                default: "wl".into(),
            },
            flip_rate,
            flip_cohorts: None,
            clean_name: Some("modality_true".into()),
        }],
        confidence: None,
        seed,
    }
}

/// An isolated cluster of 142 CE frames among 858 WL frames, all labels
/// flipped at 13%.
pub fn relabel_spec(seed: u64) -> SynthSpec {
    let d = 4;
    let mut ce = vec![0.0; d];
    ce[0] = 12.0;
    ce[1] = 12.0;
    SynthSpec {
        dim: d,
        cohorts: vec![iso_cohort("japan_wl", vec![0.0; d], 858), iso_cohort("japan_ce", ce, 142)],
        label_plans: vec![LabelPlan {
            name: "modality".into(),
            rule: LabelRule::ByCohort {
                values: BTreeMap::from([("japan_ce".to_string(), "ce".to_string())]),
                default: "wl".into(),
            },
            flip_rate: 0.13,
            flip_cohorts: None,
            clean_name: Some("modality_true".into()),
        }],
        confidence: None,
        seed,
    }
}

/// Israel at the origin, Japan displaced along e₂ with partly different
/// confidence weights and a bias shift.
pub fn table5_spec(seed: u64) -> SynthSpec {
    let d = 8;
    SynthSpec {
        dim: d,
        cohorts: vec![iso_cohort("israel_wl", vec![0.0; d], 1500), iso_cohort("japan_wl", axis(d, 2, 3.0), 1000)],
        label_plans: vec![],
        confidence: Some(ConfidencePlan {
            weights: vec![1.0, -0.8, 0.0, 0.5, 0.0, 0.0, 0.3, 0.0],
            bias: 0.0,
            noise_std: 0.12,
            cohort_shift: BTreeMap::from([("japan_wl".to_string(), -0.5)]),
            cohort_weights: BTreeMap::from([("japan_wl".to_string(), vec![0.3, -0.5, 0.0, 0.9, 0.8, 0.0, 0.3, 0.0])]),
        }),
        seed,
    }
}

pub struct Table5Split {
    pub israel_train: Dataset,
    pub israel_test: Dataset,
    pub japan_train: Dataset,
    pub japan_test: Dataset,
}

pub fn table5_split(seed: u64) -> Table5Split {
    let (ds, _) = generate(&table5_spec(seed)).unwrap();
    let (israel_train, israel_test) = split(&filter_by_cohort(&ds, &["israel_wl"]), &SplitSpec::new(0.8, seed)).unwrap();
    let (japan_train, japan_test) =
        split(&filter_by_cohort(&ds, &["japan_wl"]), &SplitSpec::new(0.8, seed.wrapping_add(1))).unwrap();
    Table5Split {
        israel_train,
        israel_test,
        japan_train,
        japan_test,
    }
}

pub fn generated(spec: &SynthSpec) -> (Dataset, GroundTruth) {
    generate(spec).unwrap()
}

/// Mean silhouette of 2-d points under the given cluster labels.
pub fn silhouette(coords: &[[f64; 2]], labels: &[usize]) -> f64 {
    let n = coords.len();
    let k = labels.iter().max().unwrap() + 1;
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(coords[i], coords[j]);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        let a = sums[own] / counts[own].max(1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

/// Random `n × n` PSD matrix `AᵀA / n`.
pub fn random_psd(seed: u64, n: usize) -> Matrix {
    let mut r = rng::seeded(seed);
    let a: Vec<f64> = (0..n * n).map(|_| r.sample(StandardNormal)).collect();
    let a = Matrix::new(n, n, a).unwrap();
    let mut m = a.transpose().matmul(&a).unwrap();
    for v in 0..n {
        m[(v, v)] += 1e-3;
    }
    let scaled: Vec<f64> = m.as_slice().iter().map(|x| x / n as f64).collect();
    Matrix::new(n, n, scaled).unwrap()
}
