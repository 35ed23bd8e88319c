//! Predicting detector confidence from embeddings across the three
//! train/test scenarios: in-domain, transfer, and union-trained transfer.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{pearson_ci, CorrelationReport};
use crate::dataset::{overlapping_ids, Dataset};
use crate::kernel_probe::{predict_value, train_svr, FitInfo, TrainConfig};
use crate::{Error, Result};

/// Regression target derived from the stored confidence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceTarget {
    #[default]
    Raw,
    /// `−ln(max(conf, 1e-6))`.
    NegLog,
}

impl ConfidenceTarget {
    pub fn apply(self, conf: f64) -> f64 {
        match self {
            Self::Raw => conf,
            Self::NegLog => -libm::log(conf.max(1e-6)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub train: TrainConfig,
    pub resamples: usize,
    pub seed: u64,
    #[serde(default)]
    pub target: ConfidenceTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Train Israel, test Israel.
    InDomain,
    /// Train Israel, test Japan.
    Transfer,
    /// Train Israel ∪ Japan, test Japan.
    Union,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::InDomain, Scenario::Transfer, Scenario::Union];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub n_train: usize,
    pub n_test: usize,
    pub correlation: CorrelationReport,
    pub fit: FitInfo,
}

pub struct ScenarioInputs<'a> {
    pub israel_train: &'a Dataset,
    pub israel_test: &'a Dataset,
    pub japan_train: &'a Dataset,
    pub japan_test: &'a Dataset,
}

fn targets(ds: &Dataset, target: ConfidenceTarget) -> Result<Vec<f64>> {
    Ok(ds.confidences()?.into_iter().map(|c| target.apply(c)).collect())
}

impl ScenarioInputs<'_> {
    fn validate(&self) -> Result<()> {
        for ds in [self.israel_train, self.israel_test, self.japan_train, self.japan_test] {
            ds.confidences()?;
        }
        if let Some(id) = overlapping_ids(self.japan_train, self.japan_test).into_iter().next() {
            return Err(Error::IdOverlap(id));
        }
        Ok(())
    }
}

/// One row of the experiment. Rows share nothing mutable, so they can run in
/// any order or in parallel.
pub fn run_scenario(inputs: &ScenarioInputs<'_>, scenario: Scenario, cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    inputs.validate()?;
    let union;
    let (train, test) = match scenario {
        Scenario::InDomain => (inputs.israel_train, inputs.israel_test),
        Scenario::Transfer => (inputs.israel_train, inputs.japan_test),
        Scenario::Union => {
            union = inputs.israel_train.concat(inputs.japan_train)?;
            (&union, inputs.japan_test)
        }
    };
    let model = train_svr(&train.matrix(), &targets(train, cfg.target)?, &cfg.train)?;
    let truth = targets(test, cfg.target)?;
    let pred = test
        .matrix()
        .iter_rows()
        .map(|row| predict_value(&model, row))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport {
        scenario,
        n_train: train.len(),
        n_test: test.len(),
        correlation: pearson_ci(&pred, &truth, cfg.resamples, cfg.seed)?,
        fit: model.info,
    })
}

/// All three rows, in table order.
pub fn run_table5_scenarios(inputs: &ScenarioInputs<'_>, cfg: &ScenarioConfig) -> Result<Vec<ScenarioReport>> {
    inputs.validate()?;
    Scenario::ALL.iter().map(|&s| run_scenario(inputs, s, cfg)).collect()
}

/// Human-readable row name.
pub fn scenario_name(s: Scenario) -> String {
    match s {
        Scenario::InDomain => "train israel, test israel".into(),
        Scenario::Transfer => "train israel, test japan".into(),
        Scenario::Union => "train israel+japan, test japan".into(),
    }
}
