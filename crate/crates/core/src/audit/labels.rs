//! Event-sourced label history.
//!
//! Base labels come from the dataset and are never modified. Every change is
//! a [`RelabelAction`] appended to the log; the current view is the fold of
//! the log over the base.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelMap, LabelSchema};
use crate::{Error, Result};

/// Labels per record id.
pub type LabelView = BTreeMap<String, LabelMap>;

/// Forces one label value onto a selection of records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelAction {
    pub selection: BTreeSet<String>,
    pub label_name: String,
    pub new_value: String,
    pub author: String,
    /// Milliseconds since the Unix epoch, supplied by the caller.
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// An action with its position in the log (1-based, gap-free).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedAction {
    pub seq: u64,
    #[serde(flatten)]
    pub action: RelabelAction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelStore {
    base: LabelView,
    schema: LabelSchema,
    log: Vec<LoggedAction>,
    current: LabelView,
}

impl LabelStore {
    pub fn new(base: LabelView, schema: LabelSchema) -> Self {
        Self {
            current: base.clone(),
            base,
            schema,
            log: Vec::new(),
        }
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        let base = ds
            .records()
            .iter()
            .map(|r| (r.id.clone(), r.labels.clone()))
            .collect();
        Self::new(base, ds.label_schema().clone())
    }

    /// Rebuilds a store by replaying `log` over `base`.
    pub fn replay(base: LabelView, schema: LabelSchema, log: &[LoggedAction]) -> Result<Self> {
        let mut store = Self::new(base, schema);
        for entry in log {
            if entry.seq != store.next_seq() {
                return Err(Error::LogOutOfOrder(entry.seq));
            }
            store.append(entry.action.clone())?;
        }
        Ok(store)
    }

    fn next_seq(&self) -> u64 {
        self.log.len() as u64 + 1
    }

    fn validate(&self, action: &RelabelAction) -> Result<()> {
        if action.selection.is_empty() {
            return Err(Error::InvalidArgument("selection is empty".into()));
        }
        let unknown: Vec<String> = action
            .selection
            .iter()
            .filter(|id| !self.base.contains_key(*id))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownIds(unknown));
        }
        let allowed = self
            .schema
            .get(&action.label_name)
            .ok_or_else(|| Error::UnknownLabel(action.label_name.clone()))?;
        if !allowed.contains(&action.new_value) {
            return Err(Error::ValueOutsideSchema {
                label: action.label_name.clone(),
                value: action.new_value.clone(),
            });
        }
        Ok(())
    }

    /// Validates and appends `action`; nothing changes on error.
    pub fn append(&mut self, action: RelabelAction) -> Result<&LoggedAction> {
        self.validate(&action)?;
        apply(&mut self.current, &action);
        let seq = self.next_seq();
        self.log.push(LoggedAction { seq, action });
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn view(&self) -> &LabelView {
        &self.current
    }

    pub fn base(&self) -> &LabelView {
        &self.base
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn log(&self) -> &[LoggedAction] {
        &self.log
    }

    pub fn label(&self, id: &str, name: &str) -> Option<&str> {
        self.current.get(id)?.get(name).map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.base.contains_key(id)
    }
}

fn apply(view: &mut LabelView, action: &RelabelAction) {
    for id in &action.selection {
        view.entry(id.clone())
            .or_default()
            .insert(action.label_name.clone(), action.new_value.clone());
    }
}

/// Appends `action` and returns the updated view.
pub fn relabel_selection(store: &mut LabelStore, action: RelabelAction) -> Result<&LabelView> {
    store.append(action)?;
    Ok(store.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EmbeddingRecord;
    use alloc::format;
    use alloc::vec;

    fn cluster() -> Dataset {
        let labels = ["CE", "CE", "CE", "WL", "WL"];
        let recs = labels
            .iter()
            .enumerate()
            .map(|(i, l)| EmbeddingRecord::new(format!("f{i}"), "japan", vec![i as f32]).with_label("modality", *l))
            .collect();
        Dataset::new(1, recs).unwrap()
    }

    fn action(ids: &[&str], value: &str) -> RelabelAction {
        RelabelAction {
            selection: ids.iter().map(|s| String::from(*s)).collect(),
            label_name: "modality".into(),
            new_value: value.into(),
            author: "tester".into(),
            timestamp_ms: 0,
            note: None,
        }
    }

    #[test]
    fn forced_label_applies_to_selection() {
        let mut store = LabelStore::from_dataset(&cluster());
        let view = relabel_selection(&mut store, action(&["f0", "f1", "f2", "f3", "f4"], "CE")).unwrap();
        assert!(view.values().all(|l| l["modality"] == "CE"));
        assert_eq!(store.log().len(), 1);
        assert_eq!(store.log()[0].seq, 1);
        assert_eq!(store.base()["f3"]["modality"], "WL");
    }

    #[test]
    fn replay_reproduces_view() {
        let ds = cluster();
        let mut store = LabelStore::from_dataset(&ds);
        store.append(action(&["f3"], "CE")).unwrap();
        store.append(action(&["f0", "f4"], "WL")).unwrap();
        let again = LabelStore::replay(store.base().clone(), store.schema().clone(), store.log()).unwrap();
        assert_eq!(again, store);
    }

    #[test]
    fn rejects_unknown_ids_and_values() {
        let mut store = LabelStore::from_dataset(&cluster());
        assert_eq!(
            store.append(action(&["f0", "nope"], "CE")).unwrap_err(),
            Error::UnknownIds(vec!["nope".into()])
        );
        assert!(matches!(
            store.append(action(&["f0"], "NBI")),
            Err(Error::ValueOutsideSchema { .. })
        ));
        assert!(store.append(action(&[], "CE")).is_err());
        assert!(store.log().is_empty());
    }

    #[test]
    fn replay_rejects_gaps() {
        let mut store = LabelStore::from_dataset(&cluster());
        store.append(action(&["f3"], "CE")).unwrap();
        let mut log = store.log().to_vec();
        log[0].seq = 5;
        assert_eq!(
            LabelStore::replay(store.base().clone(), store.schema().clone(), &log),
            Err(Error::LogOutOfOrder(5))
        );
    }
}
