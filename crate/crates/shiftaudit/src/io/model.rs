use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use shiftaudit_core::kernel_probe::{FitInfo, RbfParams, SvcModel, SvrModel};
use shiftaudit_core::linalg::Matrix;

use super::{file_err, IoError, IoResult};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svc,
    Svr,
}

/// Serialized probe. Support vectors are base64 strings of little-endian
/// f64 rows so reloading reproduces predictions bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub kind: ModelKind,
    pub gamma: f64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<[String; 2]>,
    pub dim: usize,
    pub support_vectors: Vec<String>,
    pub dual_coefs: Vec<f64>,
    pub fit: FitInfo,
    /// Settings that produced the model; ignored on load.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Svc(SvcModel),
    Svr(SvrModel),
}

fn encode_rows(m: &Matrix) -> Vec<String> {
    m.iter_rows()
        .map(|row| {
            let bytes: Vec<u8> = row.iter().flat_map(|v| v.to_le_bytes()).collect();
            STANDARD.encode(bytes)
        })
        .collect()
}

fn decode_rows(rows: &[String], dim: usize) -> IoResult<Matrix> {
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (i, s) in rows.iter().enumerate() {
        let bytes = STANDARD
            .decode(s)
            .map_err(|e| IoError::Model(format!("support vector {i}: {e}")))?;
        if bytes.len() != dim * 8 {
            return Err(IoError::Model(format!(
                "support vector {i} holds {} bytes, expected {}",
                bytes.len(),
                dim * 8
            )));
        }
        data.extend(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
    }
    Ok(Matrix::new(rows.len(), dim, data)?)
}

impl ModelDocument {
    pub fn from_model(model: &Model, config: serde_json::Value) -> Self {
        match model {
            Model::Svc(m) => Self {
                format_version: MODEL_FORMAT_VERSION,
                kind: ModelKind::Svc,
                gamma: m.params.gamma,
                c: m.c,
                epsilon: None,
                bias: m.bias,
                classes: Some(m.classes.clone()),
                dim: m.support_vectors.cols(),
                support_vectors: encode_rows(&m.support_vectors),
                dual_coefs: m.dual_coefs.clone(),
                fit: m.info,
                config,
            },
            Model::Svr(m) => Self {
                format_version: MODEL_FORMAT_VERSION,
                kind: ModelKind::Svr,
                gamma: m.params.gamma,
                c: m.c,
                epsilon: Some(m.epsilon),
                bias: m.bias,
                classes: None,
                dim: m.support_vectors.cols(),
                support_vectors: encode_rows(&m.support_vectors),
                dual_coefs: m.dual_coefs.clone(),
                fit: m.info,
                config,
            },
        }
    }

    pub fn into_model(self) -> IoResult<Model> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(IoError::Model(format!("unsupported format_version {}", self.format_version)));
        }
        if self.support_vectors.len() != self.dual_coefs.len() {
            return Err(IoError::Model("support_vectors and dual_coefs differ in length".into()));
        }
        let support_vectors = decode_rows(&self.support_vectors, self.dim)?;
        let params = RbfParams::new(self.gamma)?;
        Ok(match self.kind {
            ModelKind::Svc => Model::Svc(SvcModel {
                support_vectors,
                dual_coefs: self.dual_coefs,
                bias: self.bias,
                params,
                c: self.c,
                classes: self
                    .classes
                    .ok_or_else(|| IoError::Model("svc model without classes".into()))?,
                info: self.fit,
            }),
            ModelKind::Svr => Model::Svr(SvrModel {
                support_vectors,
                dual_coefs: self.dual_coefs,
                bias: self.bias,
                params,
                c: self.c,
                epsilon: self
                    .epsilon
                    .ok_or_else(|| IoError::Model("svr model without epsilon".into()))?,
                info: self.fit,
            }),
        })
    }
}

pub fn save_model(path: &Path, model: &Model, config: serde_json::Value) -> IoResult<()> {
    let doc = ModelDocument::from_model(model, config);
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n").map_err(file_err(path))
}

pub fn load_model(path: &Path) -> IoResult<Model> {
    let text = fs::read_to_string(path).map_err(file_err(path))?;
    serde_json::from_str::<ModelDocument>(&text)?.into_model()
}
