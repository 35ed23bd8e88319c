use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy_ci, AccuracyReport};
use crate::dataset::Dataset;
use crate::kernel_probe::{predict_class, train_svc, FitInfo, TrainConfig};
use crate::{Error, Result};

/// Binary probe prediction for one test record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePrediction {
    pub id: String,
    pub positive: bool,
    pub decision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseOutcome {
    pub label_name: String,
    pub positive_value: String,
    pub predictions: Vec<ProbePrediction>,
    /// Probe predictions against the clean reference.
    pub probe_accuracy: Option<AccuracyReport>,
    /// The test set's own (noisy) labels against the clean reference.
    pub noisy_agreement: Option<AccuracyReport>,
    pub fit: FitInfo,
}

/// `+1` / `−1` per record for `label == positive_value`.
pub fn binary_targets(ds: &Dataset, label_name: &str, positive_value: &str) -> Result<Vec<f64>> {
    ds.records()
        .iter()
        .map(|r| match r.label(label_name) {
            Some(v) if v == positive_value => Ok(1.0),
            Some(_) => Ok(-1.0),
            None => Err(Error::MissingLabel {
                id: r.id.clone(),
                label: label_name.into(),
            }),
        })
        .collect()
}

fn positives(ds: &Dataset, label_name: &str, positive_value: &str) -> Result<Vec<bool>> {
    Ok(binary_targets(ds, label_name, positive_value)?
        .into_iter()
        .map(|t| t > 0.0)
        .collect())
}

/// Trains an RBF classifier on the (possibly noisy) `label_name` of
/// `ds_train` and predicts `positive_value` vs the rest on `ds_test`.
///
/// With `reference_label` set, the test set's values under that label are
/// taken as clean truth and two reports are produced side by side. Input
/// labels are never modified.
pub fn denoise_via_probe(
    ds_train: &Dataset,
    ds_test: &Dataset,
    label_name: &str,
    positive_value: &str,
    reference_label: Option<&str>,
    cfg: &TrainConfig,
    resamples: usize,
    seed: u64,
) -> Result<DenoiseOutcome> {
    if !ds_train.label_schema().contains_key(label_name) {
        return Err(Error::UnknownLabel(label_name.into()));
    }
    let y = binary_targets(ds_train, label_name, positive_value)?;
    let model = train_svc(&ds_train.matrix(), &y, cfg)?;
    let x_test = ds_test.matrix();
    let predictions = ds_test
        .records()
        .iter()
        .zip(x_test.iter_rows())
        .map(|(r, row)| {
            let (_, dv) = predict_class(&model, row)?;
            Ok(ProbePrediction {
                id: r.id.clone(),
                positive: dv >= 0.0,
                decision: dv,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (probe_accuracy, noisy_agreement) = match reference_label {
        None => (None, None),
        Some(reference) => {
            let truth = positives(ds_test, reference, positive_value)?;
            let pred: Vec<bool> = predictions.iter().map(|p| p.positive).collect();
            let noisy = positives(ds_test, label_name, positive_value)?;
            (
                Some(accuracy_ci(&pred, &truth, resamples, seed)?),
                Some(accuracy_ci(&noisy, &truth, resamples, seed)?),
            )
        }
    };

    Ok(DenoiseOutcome {
        label_name: label_name.into(),
        positive_value: positive_value.into(),
        predictions,
        probe_accuracy,
        noisy_agreement,
        fit: model.info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EmbeddingRecord;
    use crate::kernel_probe::GammaMode;
    use alloc::format;
    use alloc::vec;

    fn two_blobs(offset: usize) -> Dataset {
        let recs = (0..20)
            .map(|i| {
                let pos = i % 2 == 0;
                let x = if pos { 3.0 } else { -3.0 } + (i as f32) * 0.01;
                let v = if pos { "nbi" } else { "wl" };
                EmbeddingRecord::new(format!("r{}", i + offset), "c", vec![x, 0.5])
                    .with_label("modality", v)
                    .with_label("truth", v)
            })
            .collect();
        Dataset::new(2, recs).unwrap()
    }

    #[test]
    fn noiseless_probe_is_perfect() {
        let cfg = TrainConfig {
            gamma: GammaMode::Explicit(0.5),
            ..TrainConfig::default()
        };
        let out = denoise_via_probe(&two_blobs(0), &two_blobs(100), "modality", "nbi", Some("truth"), &cfg, 200, 3).unwrap();
        assert_eq!(out.probe_accuracy.as_ref().unwrap().point, 1.0);
        assert_eq!(out.noisy_agreement.as_ref().unwrap().point, 1.0);
        assert_eq!(out.predictions.len(), 20);
    }

    #[test]
    fn single_class_propagates() {
        let out = denoise_via_probe(&two_blobs(0), &two_blobs(100), "modality", "ce", None, &TrainConfig::default(), 10, 0);
        assert_eq!(out.unwrap_err(), Error::SingleClass);
        let out = denoise_via_probe(&two_blobs(0), &two_blobs(100), "nope", "ce", None, &TrainConfig::default(), 10, 0);
        assert_eq!(out.unwrap_err(), Error::UnknownLabel("nope".into()));
    }
}
