//! JSON API over one loaded dataset and its label store.
//!
//! Reads run concurrently. Relabels are serialized behind the store's write
//! lock and reach the action log on disk before they are acknowledged, so a
//! read issued after an acknowledgment always sees the change. Projections,
//! probe training and Fréchet bootstraps run one at a time.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shiftaudit_core::audit::{self, LabelStore, LoggedAction, RelabelAction};
use shiftaudit_core::dataset::{filter_by_cohort, Dataset};
use shiftaudit_core::frechet::{bootstrap_frechet, BootstrapConfig, FrechetReport};
use shiftaudit_core::kernel_probe::{
    predict_class, predict_value, train_svc, train_svr, FitInfo, GammaMode, TrainConfig,
};
use shiftaudit_core::tsne::{tsne_embed, Projection, TsneConfig};
use tokio::sync::RwLock;

use crate::io::{self, ActionLog, IoError};

pub const MAIN_PROJECTION: &str = "main";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: &'static str,
    detail: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            error,
            detail: detail.into(),
        }
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "detail": self.detail }))).into_response()
    }
}

impl From<shiftaudit_core::Error> for ApiError {
    fn from(e: shiftaudit_core::Error) -> Self {
        use shiftaudit_core::Error as E;
        let kind = match &e {
            E::UnknownIds(_) => "unknown_ids",
            E::UnknownLabel(_) => "unknown_label",
            E::ValueOutsideSchema { .. } => "value_outside_schema",
            E::MissingLabel { .. } => "missing_label",
            E::InvalidArgument(_) => "invalid_argument",
            _ => "unprocessable",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, kind, e.to_string())
    }
}

impl From<IoError> for ApiError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Data(inner) => inner.into(),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeEntry {
    pub probe_id: String,
    pub kind: &'static str,
    pub label_name: Option<String>,
    pub positive: Option<String>,
    pub fit: FitInfo,
    pub n_support: usize,
    pub gamma: f64,
    pub c: f64,
}

pub struct AppState {
    dataset: Arc<Dataset>,
    store: RwLock<LabelStore>,
    log: Mutex<ActionLog>,
    tsne: TsneConfig,
    projections: RwLock<BTreeMap<String, Arc<Projection>>>,
    probes: RwLock<Vec<ProbeEntry>>,
    frechet_cache: RwLock<BTreeMap<(String, String, usize, u64), FrechetReport>>,
    compute: tokio::sync::Mutex<()>,
}

pub type Shared = Arc<AppState>;

impl AppState {
    /// Replays the log at `log_path` (if any) and keeps it open for appends.
    pub fn open(dataset: Dataset, log_path: &Path, tsne: TsneConfig) -> Result<Shared, IoError> {
        let store = io::load_label_store(&dataset, log_path)?;
        let log = ActionLog::open(log_path)?;
        Ok(Arc::new(Self {
            dataset: Arc::new(dataset),
            store: RwLock::new(store),
            log: Mutex::new(log),
            tsne,
            projections: RwLock::new(BTreeMap::new()),
            probes: RwLock::new(Vec::new()),
            frechet_cache: RwLock::new(BTreeMap::new()),
            compute: tokio::sync::Mutex::new(()),
        }))
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/dataset/summary", get(summary))
        .route("/api/projection", get(projection))
        .route("/api/records", get(records))
        .route("/api/selection/relabel", post(relabel))
        .route("/api/probe/train", post(probe_train))
        .route("/api/metrics/accuracy", get(accuracy))
        .route("/api/frechet", get(frechet))
        .route("/api/actions", get(actions))
        .with_state(state)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}

pub async fn serve(state: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

/// Runs CPU-bound work off the async workers, one job at a time.
async fn exclusive<T, F>(state: &Shared, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    let _guard = state.compute.lock().await;
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn summary(State(state): State<Shared>) -> ApiResult<Value> {
    let ds = &state.dataset;
    let cohorts: Vec<Value> = ds
        .cohorts()
        .into_iter()
        .map(|c| {
            let count = ds.records().iter().filter(|r| r.cohort == c).count();
            json!({ "name": c, "count": count })
        })
        .collect();
    let store = state.store.read().await;
    let projections: Vec<String> = state.projections.read().await.keys().cloned().collect();
    Ok(Json(json!({
        "n": ds.len(),
        "dim": ds.dim(),
        "cohorts": cohorts,
        "label_schema": store.schema(),
        "with_confidence": ds.records().iter().filter(|r| r.confidence.is_some()).count(),
        "actions": store.log().len(),
        "projections": projections,
    })))
}

#[derive(Deserialize)]
struct ProjectionQuery {
    name: Option<String>,
}

async fn projection(State(state): State<Shared>, q: Result<Query<ProjectionQuery>, QueryRejection>) -> ApiResult<Value> {
    let Query(q) = q?;
    let name = q.name.unwrap_or_else(|| MAIN_PROJECTION.to_string());
    let existing = state.projections.read().await.get(&name).cloned();
    let proj = match existing {
        Some(p) => p,
        None if name == MAIN_PROJECTION => {
            let ds = state.dataset.clone();
            let cfg = state.tsne.clone();
            let st = state.clone();
            // a queued request may find the projection already computed
            let p = exclusive(&state, move || {
                if let Some(p) = st.projections.blocking_read().get(MAIN_PROJECTION) {
                    return Ok(p.clone());
                }
                let p = Arc::new(tsne_embed(&ds.matrix(), &ds.ids(), &cfg)?);
                st.projections.blocking_write().insert(MAIN_PROJECTION.to_string(), p.clone());
                Ok(p)
            })
            .await?;
            p
        }
        None => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_projection",
                format!("no projection named `{name}`"),
            ))
        }
    };
    let store = state.store.read().await;
    let points = io::projection_points(&state.dataset, store.view(), &proj);
    Ok(Json(json!({
        "name": name,
        "points": points,
        "final_kl": proj.final_kl,
        "unconverged_rows": &proj.unconverged_rows,
        "config": &proj.config,
    })))
}

#[derive(Deserialize)]
struct RecordsQuery {
    ids: Option<String>,
}

async fn records(State(state): State<Shared>, q: Result<Query<RecordsQuery>, QueryRejection>) -> ApiResult<Value> {
    let Query(q) = q?;
    let ds = &state.dataset;
    let by_id: BTreeMap<&str, usize> = ds.records().iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let wanted: Vec<usize> = match q.ids.as_deref() {
        None | Some("") => (0..ds.len()).collect(),
        Some(list) => {
            let ids: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            let unknown: Vec<String> = ids.iter().filter(|id| !by_id.contains_key(*id)).map(|s| s.to_string()).collect();
            if !unknown.is_empty() {
                return Err(shiftaudit_core::Error::UnknownIds(unknown).into());
            }
            ids.iter().map(|id| by_id[id]).collect()
        }
    };
    let store = state.store.read().await;
    let out: Vec<Value> = wanted
        .into_iter()
        .map(|i| {
            let r = &ds.records()[i];
            json!({
                "id": r.id,
                "cohort": r.cohort,
                "group_id": r.group_id,
                "labels": store.view().get(&r.id),
                "base_labels": r.labels,
                "confidence": r.confidence,
            })
        })
        .collect();
    Ok(Json(json!({ "records": out })))
}

#[derive(Deserialize)]
struct RelabelRequest {
    ids: Vec<String>,
    label_name: String,
    value: String,
    #[serde(default = "anonymous")]
    author: String,
    #[serde(default)]
    note: Option<String>,
}

fn anonymous() -> String {
    "anonymous".into()
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

async fn relabel(State(state): State<Shared>, body: Result<Json<RelabelRequest>, JsonRejection>) -> ApiResult<Value> {
    let Json(req) = body?;
    let action = RelabelAction {
        selection: req.ids.into_iter().collect(),
        label_name: req.label_name,
        new_value: req.value,
        author: req.author,
        timestamp_ms: now_ms(),
        note: req.note,
    };
    let mut store = state.store.write().await;
    let mut next = store.clone();
    audit::relabel_selection(&mut next, action)?;
    let entry: LoggedAction = next.log().last().cloned().expect("action was just appended");
    state
        .log
        .lock()
        .map_err(|_| ApiError::internal("action log lock poisoned"))?
        .append(&entry)?;
    *store = next;
    Ok(Json(json!({ "action": entry })))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GammaParam {
    Named(String),
    Value(f64),
}

impl GammaParam {
    fn mode(&self) -> Result<GammaMode, ApiError> {
        match self {
            Self::Named(s) if s == "scale" => Ok(GammaMode::Scale),
            Self::Value(g) if *g > 0.0 && g.is_finite() => Ok(GammaMode::Explicit(*g)),
            _ => Err(ApiError::bad_request("gamma must be \"scale\" or a positive number")),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProbeTask {
    Svc,
    Svr,
}

#[derive(Deserialize)]
struct ProbeRequest {
    task: ProbeTask,
    label_name: Option<String>,
    positive: Option<String>,
    #[serde(default = "one")]
    c: f64,
    gamma: Option<GammaParam>,
    #[serde(default)]
    seed: u64,
    epsilon: Option<f64>,
}

fn one() -> f64 {
    1.0
}

async fn probe_train(State(state): State<Shared>, body: Result<Json<ProbeRequest>, JsonRejection>) -> ApiResult<Value> {
    let Json(req) = body?;
    let cfg = TrainConfig {
        c: req.c,
        gamma: match &req.gamma {
            Some(g) => g.mode()?,
            None => GammaMode::Scale,
        },
        epsilon: req.epsilon.unwrap_or(TrainConfig::default().epsilon),
        seed: req.seed,
        ..TrainConfig::default()
    };
    let ds = state.dataset.clone();
    let (kind, targets) = match req.task {
        ProbeTask::Svc => {
            let (Some(label), Some(positive)) = (&req.label_name, &req.positive) else {
                return Err(ApiError::bad_request("svc needs label_name and positive"));
            };
            let store = state.store.read().await;
            let view = store.view();
            if !store.schema().contains_key(label) {
                return Err(shiftaudit_core::Error::UnknownLabel(label.clone()).into());
            }
            let y = ds
                .records()
                .iter()
                .map(|r| match view.get(&r.id).and_then(|l| l.get(label)) {
                    Some(v) => Ok(if v == positive { 1.0 } else { -1.0 }),
                    None => Err(shiftaudit_core::Error::MissingLabel {
                        id: r.id.clone(),
                        label: label.clone(),
                    }),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            ("svc", y)
        }
        ProbeTask::Svr => ("svr", ds.confidences()?),
    };
    let state2 = state.clone();
    let label_name = req.label_name.clone();
    let positive = req.positive.clone();
    let result = exclusive(&state, move || {
        let x = ds.matrix();
        let mut predictions = Vec::with_capacity(ds.len());
        let entry = if kind == "svc" {
            let pos = positive.clone().unwrap_or_default();
            let m = train_svc(&x, &targets, &cfg)?.with_classes(format!("not_{pos}"), pos);
            for (r, row) in ds.records().iter().zip(x.iter_rows()) {
                let (class, dv) = predict_class(&m, row)?;
                predictions.push(json!({ "id": r.id, "prediction": class, "decision": dv }));
            }
            (m.info, m.n_support(), m.params.gamma)
        } else {
            let m = train_svr(&x, &targets, &cfg)?;
            for (r, row) in ds.records().iter().zip(x.iter_rows()) {
                predictions.push(json!({ "id": r.id, "value": predict_value(&m, row)? }));
            }
            (m.info, m.n_support(), m.params.gamma)
        };
        let mut probes = state2.probes.blocking_write();
        let probe = ProbeEntry {
            probe_id: format!("probe-{}", probes.len() + 1),
            kind,
            label_name,
            positive,
            fit: entry.0,
            n_support: entry.1,
            gamma: entry.2,
            c: cfg.c,
        };
        probes.push(probe.clone());
        Ok(json!({ "probe": probe, "predictions": predictions }))
    })
    .await?;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct AccuracyQuery {
    label_name: String,
    reference: String,
    #[serde(default = "default_b")]
    b: usize,
    #[serde(default)]
    seed: u64,
}

fn default_b() -> usize {
    1000
}

async fn accuracy(State(state): State<Shared>, q: Result<Query<AccuracyQuery>, QueryRejection>) -> ApiResult<Value> {
    let Query(q) = q?;
    let store = state.store.read().await;
    let report = audit::label_accuracy(store.view(), &q.label_name, &q.reference, q.b, q.seed)?;
    Ok(Json(json!({
        "label_name": q.label_name,
        "reference": q.reference,
        "log_length": store.log().len(),
        "accuracy": report,
    })))
}

#[derive(Deserialize)]
struct FrechetQuery {
    #[serde(rename = "ref")]
    reference: String,
    cohort: String,
    #[serde(default = "default_b")]
    b: usize,
    #[serde(default)]
    seed: u64,
}

async fn frechet(State(state): State<Shared>, q: Result<Query<FrechetQuery>, QueryRejection>) -> ApiResult<Value> {
    let Query(q) = q?;
    let key = (q.reference.clone(), q.cohort.clone(), q.b, q.seed);
    let cached = state.frechet_cache.read().await.get(&key).cloned();
    let report = match cached {
        Some(r) => r,
        None => {
            let ds = state.dataset.clone();
            let (reference, cohort, b, seed) = key.clone();
            let r = exclusive(&state, move || {
                let a = filter_by_cohort(&ds, &[&reference]);
                let c = filter_by_cohort(&ds, &[&cohort]);
                for (name, sub) in [(&reference, &a), (&cohort, &c)] {
                    if sub.is_empty() {
                        return Err(ApiError::new(
                            StatusCode::NOT_FOUND,
                            "unknown_cohort",
                            format!("no records in cohort `{name}`"),
                        ));
                    }
                }
                Ok(bootstrap_frechet(&a.matrix(), &c.matrix(), &BootstrapConfig::new(b, seed))?)
            })
            .await?;
            state.frechet_cache.write().await.insert(key, r.clone());
            r
        }
    };
    Ok(Json(json!({
        "ref": q.reference,
        "cohort": q.cohort,
        "point": report.point,
        "ci_lo": report.ci_lo,
        "ci_hi": report.ci_hi,
        "resamples": report.resamples,
        "seed": report.seed,
    })))
}

async fn actions(State(state): State<Shared>) -> ApiResult<Value> {
    let store = state.store.read().await;
    Ok(Json(json!({ "actions": store.log() })))
}
