//! Audit workflows composed from the lower-level modules.

mod denoise;
mod labels;
mod metrics;
mod scenarios;

use alloc::vec::Vec;

pub use denoise::{binary_targets, denoise_via_probe, DenoiseOutcome, ProbePrediction};
pub use labels::{relabel_selection, LabelStore, LabelView, LoggedAction, RelabelAction};
pub use metrics::{accuracy_ci, pearson, pearson_ci, AccuracyReport, CorrelationReport, DEFAULT_RESAMPLES, MAX_REDRAWS};
pub use scenarios::{
    run_scenario, run_table5_scenarios, scenario_name, ConfidenceTarget, Scenario, ScenarioConfig, ScenarioInputs,
    ScenarioReport,
};

use crate::{Error, Result};

/// Agreement of the current `label_name` with `reference` over every record
/// carrying both, in id order.
pub fn label_accuracy(view: &LabelView, label_name: &str, reference: &str, resamples: usize, seed: u64) -> Result<AccuracyReport> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for labels in view.values() {
        if let (Some(a), Some(b)) = (labels.get(label_name), labels.get(reference)) {
            pred.push(a.as_str());
            truth.push(b.as_str());
        }
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument(alloc::format!(
            "no record carries both `{label_name}` and `{reference}`"
        )));
    }
    accuracy_ci(&pred, &truth, resamples, seed)
}
