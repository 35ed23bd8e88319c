use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shiftaudit_core::dataset::Dataset;

use super::csv_format::{read_rows, write_rows};
use super::{file_err, IoError, IoResult};

/// JSON manifest of the binary layout. File names are relative to the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub count: usize,
    pub vector_file: String,
    pub metadata_file: String,
    pub byte_order: String,
    pub dtype: String,
}

fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new("")).join(name)
}

pub fn load_binary(manifest_path: &Path) -> IoResult<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(file_err(manifest_path))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.byte_order != "little" || m.dtype != "f32" {
        return Err(IoError::Manifest(format!(
            "byte_order `{}`, dtype `{}` (only little-endian f32 is supported)",
            m.byte_order, m.dtype
        )));
    }
    if m.dim == 0 {
        return Err(IoError::Manifest("dim must be positive".into()));
    }
    let vpath = sibling(manifest_path, &m.vector_file);
    let bytes = match fs::read(&vpath) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(IoError::MissingVectorFile(vpath)),
        Err(e) => return Err(file_err(&vpath)(e)),
    };
    let expected = (m.count * m.dim * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(IoError::SizeMismatch {
            expected,
            found: bytes.len() as u64,
        });
    }
    let mpath = sibling(manifest_path, &m.metadata_file);
    let (_, mut records) = read_rows(File::open(&mpath).map_err(file_err(&mpath))?, false)?;
    if records.len() != m.count {
        return Err(IoError::RowCount {
            manifest: m.count,
            metadata: records.len(),
        });
    }
    for (rec, chunk) in records.iter_mut().zip(bytes.chunks_exact(m.dim * 4)) {
        rec.vector = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
    }
    Ok(Dataset::new(m.dim, records)?)
}

/// Writes `<stem>.meta.csv` and `<stem>.f32` next to the manifest.
pub fn write_binary(manifest_path: &Path, ds: &Dataset) -> IoResult<Manifest> {
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| IoError::Manifest("manifest path has no file name".into()))?;
    let m = Manifest {
        dim: ds.dim(),
        count: ds.len(),
        vector_file: format!("{stem}.f32"),
        metadata_file: format!("{stem}.meta.csv"),
        byte_order: "little".into(),
        dtype: "f32".into(),
    };
    let mpath = sibling(manifest_path, &m.metadata_file);
    write_rows(File::create(&mpath).map_err(file_err(&mpath))?, ds, false)?;

    let vpath = sibling(manifest_path, &m.vector_file);
    let mut w = BufWriter::new(File::create(&vpath).map_err(file_err(&vpath))?);
    for r in ds.records() {
        for v in &r.vector {
            w.write_all(&v.to_le_bytes()).map_err(file_err(&vpath))?;
        }
    }
    w.flush().map_err(file_err(&vpath))?;
    fs::write(manifest_path, serde_json::to_string_pretty(&m)? + "\n").map_err(file_err(manifest_path))?;
    Ok(m)
}
