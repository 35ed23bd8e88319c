use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use shiftaudit_core::audit::LabelView;
use shiftaudit_core::dataset::{Dataset, EmbeddingRecord, LabelMap};
use shiftaudit_core::tsne::Projection;

use super::IoResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub cohort: String,
    pub labels: LabelMap,
    pub confidence: Option<f64>,
}

/// Joins projected coordinates with record metadata and the given label view.
pub fn projection_points(ds: &Dataset, view: &LabelView, proj: &Projection) -> Vec<ProjectionPoint> {
    let by_id: BTreeMap<&str, &EmbeddingRecord> = ds.records().iter().map(|r| (r.id.as_str(), r)).collect();
    proj.ids
        .iter()
        .zip(&proj.coords)
        .filter_map(|(id, c)| {
            let rec = by_id.get(id.as_str())?;
            Some(ProjectionPoint {
                id: id.clone(),
                x: c[0],
                y: c[1],
                cohort: rec.cohort.clone(),
                labels: view.get(id).cloned().unwrap_or_default(),
                confidence: rec.confidence,
            })
        })
        .collect()
}

/// `id,x,y` rows.
pub fn write_projection_csv<W: Write>(writer: W, proj: &Projection) -> IoResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "x", "y"])?;
    for (id, c) in proj.ids.iter().zip(&proj.coords) {
        w.write_record([id.clone(), c[0].to_string(), c[1].to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
