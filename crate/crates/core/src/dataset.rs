//! Embedding records, cohort filtering and seeded train/test splits.
//!
//! Vectors are stored as `f32` (the on-disk precision); everything that does
//! arithmetic on them goes through [`Dataset::matrix`] at `f64`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{rng, Error, Result};

pub type LabelMap = BTreeMap<String, String>;
pub type LabelSchema = BTreeMap<String, BTreeSet<String>>;

/// One embedded frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub cohort: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    #[serde(default)]
    pub labels: LabelMap,
    /// Downstream detector confidence in `[0, 1]`. Absent is not zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, cohort: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            cohort: cohort.into(),
            group_id: None,
            labels: LabelMap::new(),
            confidence: None,
            vector,
        }
    }

    pub fn with_label(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.labels.insert(name.into(), value.into());
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group_id = Some(group.into());
        self
    }

    pub fn label(&self, name: &str) -> Option<&str> {
        self.labels.get(name).map(String::as_str)
    }
}

/// An immutable, validated collection of records sharing one dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    records: Vec<EmbeddingRecord>,
    dim: usize,
    label_schema: LabelSchema,
}

impl Dataset {
    /// Validates `records` and infers the label schema from observed values.
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut schema = LabelSchema::new();
        for r in &records {
            for (k, v) in &r.labels {
                schema.entry(k.clone()).or_default().insert(v.clone());
            }
        }
        Self::with_schema(dim, records, schema)
    }

    /// Validates `records` against an explicit schema. Every observed value
    /// must be allowed by it.
    pub fn with_schema(dim: usize, records: Vec<EmbeddingRecord>, schema: LabelSchema) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.vector.len(),
                });
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding vector"));
            }
            if let Some(c) = r.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::ConfidenceOutOfRange {
                        id: r.id.clone(),
                        value: c,
                    });
                }
            }
            for (k, v) in &r.labels {
                match schema.get(k) {
                    None => return Err(Error::UnknownLabel(k.clone())),
                    Some(allowed) if !allowed.contains(v) => {
                        return Err(Error::ValueOutsideSchema {
                            label: k.clone(),
                            value: v.clone(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Self {
            records,
            dim,
            label_schema: schema,
        })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn label_schema(&self) -> &LabelSchema {
        &self.label_schema
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Distinct cohort tags in first-appearance order.
    pub fn cohorts(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.cohort.as_str()) {
                out.push(r.cohort.clone());
            }
        }
        out
    }

    /// Embeddings as an `n × dim` matrix of `f64`.
    pub fn matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.dim);
        for r in &self.records {
            data.extend(r.vector.iter().map(|&v| v as f64));
        }
        Matrix::new(self.len(), self.dim, data).expect("validated shape")
    }

    /// Confidence values, failing on the first record without one.
    pub fn confidences(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.confidence.ok_or_else(|| Error::MissingConfidence(r.id.clone())))
            .collect()
    }

    /// Subset by position, keeping the schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            dim: self.dim,
            label_schema: self.label_schema.clone(),
        }
    }

    /// Records of `self` followed by those of `other`; schemas are merged.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut schema = self.label_schema.clone();
        for (k, vs) in &other.label_schema {
            schema.entry(k.clone()).or_default().extend(vs.iter().cloned());
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Dataset::with_schema(self.dim, records, schema)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    FrameLevel,
    GroupLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
            mode: SplitMode::FrameLevel,
        }
    }

    pub fn group_level(mut self) -> Self {
        self.mode = SplitMode::GroupLevel;
        self
    }

    /// `floor(n · train_fraction)`.
    pub fn train_size(&self, n: usize) -> usize {
        libm::floor(n as f64 * self.train_fraction) as usize
    }
}

/// Seeded partition into `(train, test)`.
///
/// Frame level shuffles records and sends the first `floor(n · fraction)` to
/// train. Group level shuffles groups (in first-appearance order) and adds
/// whole groups to train until it holds at least that many records. Both
/// sides keep the original load order.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument("train_fraction must lie in (0, 1)".into()));
    }
    if ds.is_empty() {
        return Err(Error::Empty);
    }
    let n = ds.len();
    let target = spec.train_size(n);
    let mut rng = rng::seeded(spec.seed);
    let mut in_train = alloc::vec![false; n];

    match spec.mode {
        SplitMode::FrameLevel => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for &i in &order[..target] {
                in_train[i] = true;
            }
        }
        SplitMode::GroupLevel => {
            let mut groups: Vec<&str> = Vec::new();
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in ds.records.iter().enumerate() {
                let g = r
                    .group_id
                    .as_deref()
                    .ok_or_else(|| Error::MissingGroupId(r.id.clone()))?;
                members
                    .entry(g)
                    .or_insert_with(|| {
                        groups.push(g);
                        Vec::new()
                    })
                    .push(i);
            }
            groups.shuffle(&mut rng);
            let mut taken = 0usize;
            for g in groups {
                if taken >= target {
                    break;
                }
                for &i in &members[g] {
                    in_train[i] = true;
                }
                taken += members[g].len();
            }
        }
    }

    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Records whose cohort is in `cohorts`, in original order.
pub fn filter_by_cohort<S: AsRef<str>>(ds: &Dataset, cohorts: &[S]) -> Dataset {
    let wanted: BTreeSet<&str> = cohorts.iter().map(AsRef::as_ref).collect();
    let idx: Vec<usize> = ds
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| wanted.contains(r.cohort.as_str()))
        .map(|(i, _)| i)
        .collect();
    ds.subset(&idx)
}

/// Ids present in both datasets, in the order of `a`.
pub fn overlapping_ids(a: &Dataset, b: &Dataset) -> Vec<String> {
    let bs: BTreeSet<&str> = b.records.iter().map(|r| r.id.as_str()).collect();
    a.records
        .iter()
        .filter(|r| bs.contains(r.id.as_str()))
        .map(|r| r.id.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn toy(n: usize) -> Dataset {
        let recs = (0..n)
            .map(|i| {
                let cohort = ["israel_wl", "japan_wl", "japan_nbi"][i % 3];
                EmbeddingRecord::new(format!("r{i}"), cohort, vec![i as f32, 1.0])
                    .with_group(format!("g{}", i / 2))
            })
            .collect();
        Dataset::new(2, recs).unwrap()
    }

    #[test]
    fn rejects_ragged_vectors_and_duplicates() {
        let a = EmbeddingRecord::new("a", "c", vec![1.0, 2.0]);
        let b = EmbeddingRecord::new("b", "c", vec![1.0]);
        assert!(matches!(
            Dataset::new(2, vec![a.clone(), b]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(Dataset::new(2, vec![a.clone(), a]), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn rejects_confidence_out_of_range() {
        let a = EmbeddingRecord::new("a", "c", vec![1.0]).with_confidence(1.5);
        assert!(matches!(
            Dataset::new(1, vec![a]),
            Err(Error::ConfidenceOutOfRange { .. })
        ));
    }

    #[test]
    fn split_sizes_follow_floor() {
        let spec = SplitSpec::new(0.8, 1);
        assert_eq!(spec.train_size(4464), 3571);
        let ds = toy(10);
        let (tr, te) = split(&ds, &SplitSpec::new(0.5, 3)).unwrap();
        assert_eq!(tr.len(), 5);
        assert_eq!(te.len(), 5);
    }

    #[test]
    fn split_is_deterministic() {
        let ds = toy(10);
        let a = split(&ds, &SplitSpec::new(0.5, 42)).unwrap();
        let b = split(&ds, &SplitSpec::new(0.5, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group_split_keeps_groups_whole() {
        let ds = toy(6);
        let (tr, te) = split(&ds, &SplitSpec::new(0.5, 9).group_level()).unwrap();
        let tg: BTreeSet<_> = tr.records().iter().map(|r| r.group_id.clone()).collect();
        assert!(te.records().iter().all(|r| !tg.contains(&r.group_id)));
        assert_eq!(tr.len() + te.len(), 6);
        assert!(tr.len() >= 3);
    }

    #[test]
    fn group_split_requires_group_ids() {
        let ds = Dataset::new(1, vec![EmbeddingRecord::new("a", "c", vec![0.0])]).unwrap();
        assert!(matches!(
            split(&ds, &SplitSpec::new(0.5, 0).group_level()),
            Err(Error::MissingGroupId(_))
        ));
    }

    #[test]
    fn filter_cases() {
        let ds = toy(9);
        let nbi = filter_by_cohort(&ds, &["japan_nbi"]);
        assert_eq!(nbi.len(), 3);
        assert!(nbi.records().iter().all(|r| r.cohort == "japan_nbi"));
        assert_eq!(filter_by_cohort(&ds, &ds.cohorts()), ds);
        let none = filter_by_cohort(&ds, &["absent"]);
        assert!(none.is_empty());
        assert_eq!(none.dim(), 2);
    }
}
