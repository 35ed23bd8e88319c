use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use shiftaudit_core::dataset::{Dataset, EmbeddingRecord};

use super::{file_err, IoError, IoResult};

/// Column layout parsed from a header row.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub group: bool,
    pub labels: Vec<String>,
    pub confidence: bool,
    pub dim: usize,
}

impl Layout {
    pub fn for_dataset(ds: &Dataset, with_embeddings: bool) -> Self {
        Self {
            group: ds.records().iter().any(|r| r.group_id.is_some()),
            labels: ds.label_schema().keys().cloned().collect(),
            confidence: ds.records().iter().any(|r| r.confidence.is_some()),
            dim: if with_embeddings { ds.dim() } else { 0 },
        }
    }

    fn width(&self) -> usize {
        2 + usize::from(self.group) + self.labels.len() + usize::from(self.confidence) + self.dim
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["id".to_string(), "cohort".to_string()];
        if self.group {
            h.push("group_id".into());
        }
        h.extend(self.labels.iter().map(|l| format!("label.{l}")));
        if self.confidence {
            h.push("confidence".into());
        }
        h.extend((0..self.dim).map(|k| format!("e{k}")));
        h
    }

    /// `id,cohort[,group_id][,label.<name>]*[,confidence][,e0..]`, in that order.
    pub fn parse(header: &StringRecord, with_embeddings: bool) -> IoResult<Self> {
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 2 || cols[0] != "id" || cols[1] != "cohort" {
            return Err(IoError::Header("must start with `id,cohort`".into()));
        }
        let mut i = 2;
        let group = cols.get(i) == Some(&"group_id");
        i += usize::from(group);
        let mut labels: Vec<String> = Vec::new();
        while let Some(name) = cols.get(i).and_then(|c| c.strip_prefix("label.")) {
            if name.is_empty() || labels.iter().any(|l| l == name) {
                return Err(IoError::Header(format!("bad or repeated label column `label.{name}`")));
            }
            labels.push(name.to_string());
            i += 1;
        }
        let confidence = cols.get(i) == Some(&"confidence");
        i += usize::from(confidence);
        let rest = &cols[i..];
        for (k, c) in rest.iter().enumerate() {
            if *c != format!("e{k}") {
                return Err(IoError::Header(format!("unexpected column `{c}` at position {}", i + k)));
            }
        }
        if with_embeddings && rest.is_empty() {
            return Err(IoError::Header("no embedding columns".into()));
        }
        if !with_embeddings && !rest.is_empty() {
            return Err(IoError::Header("metadata file must not hold embedding columns".into()));
        }
        Ok(Self {
            group,
            labels,
            confidence,
            dim: rest.len(),
        })
    }

    /// Record from one data row; `row` is 1-based for messages.
    pub fn record(&self, cells: &StringRecord, row: usize, header: &StringRecord) -> IoResult<EmbeddingRecord> {
        if cells.len() != self.width() {
            return Err(IoError::RaggedRow {
                row,
                expected: self.width(),
                found: cells.len(),
            });
        }
        let id = &cells[0];
        if id.is_empty() {
            return Err(IoError::EmptyId { row });
        }
        let mut i = 2;
        let group = if self.group {
            i += 1;
            Some(&cells[2]).filter(|g| !g.is_empty())
        } else {
            None
        };
        let mut labels = Vec::new();
        for name in &self.labels {
            if !cells[i].is_empty() {
                labels.push((name.clone(), cells[i].to_string()));
            }
            i += 1;
        }
        let bad = |col: usize| IoError::BadNumber {
            row,
            column: header[col].to_string(),
            value: cells[col].to_string(),
        };
        let mut confidence = None;
        if self.confidence {
            if !cells[i].is_empty() {
                confidence = Some(cells[i].trim().parse::<f64>().map_err(|_| bad(i))?);
            }
            i += 1;
        }
        let vector = (i..i + self.dim)
            .map(|c| cells[c].trim().parse::<f32>().map_err(|_| bad(c)))
            .collect::<IoResult<Vec<f32>>>()?;

        let mut rec = EmbeddingRecord::new(id, &cells[1], vector);
        rec.group_id = group.map(str::to_string);
        rec.labels = labels.into_iter().collect();
        rec.confidence = confidence;
        Ok(rec)
    }

    pub fn row(&self, r: &EmbeddingRecord) -> Vec<String> {
        let mut out = vec![r.id.clone(), r.cohort.clone()];
        if self.group {
            out.push(r.group_id.clone().unwrap_or_default());
        }
        for l in &self.labels {
            out.push(r.labels.get(l).cloned().unwrap_or_default());
        }
        if self.confidence {
            out.push(r.confidence.map(|c| c.to_string()).unwrap_or_default());
        }
        if self.dim > 0 {
            out.extend(r.vector.iter().map(|v| v.to_string()));
        }
        out
    }
}

/// Parses metadata rows (and embeddings when the layout has them).
pub(crate) fn read_rows<R: Read>(reader: R, with_embeddings: bool) -> IoResult<(Layout, Vec<EmbeddingRecord>)> {
    let mut rdr = ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let layout = Layout::parse(&header, with_embeddings)?;
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        records.push(layout.record(&row?, i + 1, &header)?);
    }
    Ok((layout, records))
}

/// Reads a dataset in CSV form; the label schema is the set of observed values.
pub fn read_csv<R: Read>(reader: R) -> IoResult<Dataset> {
    let (layout, records) = read_rows(reader, true)?;
    Ok(Dataset::new(layout.dim, records)?)
}

pub fn load_csv(path: &Path) -> IoResult<Dataset> {
    read_csv(File::open(path).map_err(file_err(path))?)
}

pub(crate) fn write_rows<W: Write>(writer: W, ds: &Dataset, with_embeddings: bool) -> IoResult<()> {
    let layout = Layout::for_dataset(ds, with_embeddings);
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(layout.header())?;
    for r in ds.records() {
        w.write_record(layout.row(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv_to<W: Write>(writer: W, ds: &Dataset) -> IoResult<()> {
    write_rows(writer, ds, true)
}

pub fn write_csv(path: &Path, ds: &Dataset) -> IoResult<()> {
    write_csv_to(File::create(path).map_err(file_err(path))?, ds)
}
