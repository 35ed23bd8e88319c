use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use shiftaudit_core::audit::{LabelStore, LoggedAction};
use shiftaudit_core::dataset::Dataset;

use super::{file_err, IoError, IoResult};

/// `<data>.actions.ndjson` beside the dataset file.
pub fn default_log_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".actions.ndjson");
    data.with_file_name(name)
}

/// One action per line. A missing file is an empty log.
pub fn read_action_log(path: &Path) -> IoResult<Vec<LoggedAction>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(file_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(file_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::ActionLine { line: i + 1, source })?);
    }
    Ok(out)
}

/// Base labels from `ds` with the log at `log_path` replayed on top.
pub fn load_label_store(ds: &Dataset, log_path: &Path) -> IoResult<LabelStore> {
    let base = LabelStore::from_dataset(ds);
    let log = read_action_log(log_path)?;
    Ok(LabelStore::replay(base.base().clone(), base.schema().clone(), &log)?)
}

/// Append-only writer; every entry is flushed to disk before returning.
#[derive(Debug)]
pub struct ActionLog {
    file: File,
    path: PathBuf,
}

impl ActionLog {
    pub fn open(path: &Path) -> IoResult<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(file_err(path))?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, entry: &LoggedAction) -> IoResult<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(file_err(&self.path))?;
        self.file.sync_data().map_err(file_err(&self.path))
    }
}
