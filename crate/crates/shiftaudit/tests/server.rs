use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use shiftaudit::io::load_dataset;
use shiftaudit::server::{router, AppState, Shared};
use shiftaudit_core::dataset::filter_by_cohort;
use shiftaudit_core::frechet::{bootstrap_frechet, BootstrapConfig};
use shiftaudit_core::tsne::TsneConfig;
use tempfile::{tempdir, TempDir};
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    log: PathBuf,
    state: Shared,
}

fn tsne_cfg() -> TsneConfig {
    TsneConfig { perplexity: 10.0, iterations: 250, ..TsneConfig::default() }
}

fn fixture() -> Fixture {
    let dir = tempdir().unwrap();
    let out = dir.path().join("data");
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/cluster.json");
    let st = Command::new(env!("CARGO_BIN_EXE_shiftaudit"))
        .args(["synth", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"])
        .output()
        .unwrap();
    assert!(st.status.success());
    let data = out.join("data.csv");
    let log = dir.path().join("actions.ndjson");
    let state = AppState::open(load_dataset(&data).unwrap(), &log, tsne_cfg()).unwrap();
    Fixture { _dir: dir, data, log, state }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    call(app, req).await
}

#[tokio::test]
async fn summary_and_records() {
    let f = fixture();
    let app = router(f.state.clone());
    let (status, body) = get(&app, "/api/dataset/summary").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["n"], 200);
    assert_eq!(body["dim"], 4);
    assert_eq!(body["actions"], 0);
    assert_eq!(body["cohorts"], json!([{"name": "japan_wl", "count": 170}, {"name": "japan_ce", "count": 30}]));
    assert_eq!(body["label_schema"]["modality_true"], json!(["ce", "wl"]));
    assert_eq!(body["with_confidence"], 200);

    let (status, body) = get(&app, "/api/records").await;
    assert_eq!(status, StatusCode::OK);
    let all = body["records"].as_array().unwrap();
    assert_eq!(all.len(), 200);
    let id = all[0]["id"].as_str().unwrap().to_string();
    let (status, body) = get(&app, &format!("/api/records?ids={id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["records"][0]["labels"], all[0]["labels"]);

    let (status, body) = get(&app, "/api/records?ids=nope").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unknown_ids");
    assert!(body["detail"].as_str().unwrap().contains("nope"));
}

#[tokio::test]
async fn projection_points() {
    let f = fixture();
    let app = router(f.state.clone());
    let (status, body) = get(&app, "/api/projection").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["name"], "main");
    let points = body["points"].as_array().unwrap();
    assert_eq!(points.len(), 200);
    for p in points {
        assert!(p["x"].as_f64().unwrap().is_finite() && p["y"].as_f64().unwrap().is_finite());
        assert!(p["labels"]["modality"].is_string());
        assert!(p["cohort"].is_string());
    }
    assert!(body["final_kl"].as_f64().unwrap() >= 0.0);
    let (_, again) = get(&app, "/api/projection?name=main").await;
    assert_eq!(again["points"], body["points"]);
    let (_, summary) = get(&app, "/api/dataset/summary").await;
    assert_eq!(summary["projections"], json!(["main"]));

    let (status, body) = get(&app, "/api/projection?name=other").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_projection");
}

fn selection(f: &Fixture, cohort: &str, k: usize) -> Vec<String> {
    let ds = load_dataset(&f.data).unwrap();
    filter_by_cohort(&ds, &[cohort]).records().iter().take(k).map(|r| r.id.clone()).collect()
}

#[tokio::test]
async fn relabel_flows_into_metrics_and_log() {
    let f = fixture();
    let app = router(f.state.clone());
    let acc = "/api/metrics/accuracy?label_name=modality&reference=modality_true&b=200&seed=1";
    let (status, before) = get(&app, acc).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before["log_length"], 0);

    // records whose noisy label disagrees with the truth
    let (_, recs) = get(&app, "/api/records").await;
    let wrong: Vec<(String, String)> = recs["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["labels"]["modality"] != r["labels"]["modality_true"])
        .take(5)
        .map(|r| (r["id"].as_str().unwrap().to_string(), r["labels"]["modality_true"].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(wrong.len(), 5);
    for (i, (id, truth)) in wrong.iter().enumerate() {
        let body = json!({"ids": [id], "label_name": "modality", "value": truth, "author": "tester"}).to_string();
        let (status, res) = post(&app, "/api/selection/relabel", &body).await;
        assert_eq!(status, StatusCode::OK, "{res}");
        assert_eq!(res["action"]["seq"], i as u64 + 1);
    }

    let (_, after) = get(&app, acc).await;
    assert_eq!(after["log_length"], 5);
    let (p0, p1) = (before["accuracy"]["point"].as_f64().unwrap(), after["accuracy"]["point"].as_f64().unwrap());
    assert!((p1 - p0 - 5.0 / 200.0).abs() < 1e-12, "{p0} -> {p1}");

    let lines = fs::read_to_string(&f.log).unwrap();
    assert_eq!(lines.lines().count(), 5);
    let (_, actions) = get(&app, "/api/actions").await;
    let seqs: Vec<u64> = actions["actions"].as_array().unwrap().iter().map(|a| a["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, vec![1, 2, 3, 4, 5]);
    assert_eq!(actions["actions"][0]["author"], "tester");

    let (_, rec) = get(&app, &format!("/api/records?ids={}", wrong[0].0)).await;
    assert_eq!(rec["records"][0]["labels"]["modality"], wrong[0].1.as_str());

    // a restarted server replays the same log
    let reopened = AppState::open(load_dataset(&f.data).unwrap(), &f.log, tsne_cfg()).unwrap();
    let (_, replayed) = get(&router(reopened), acc).await;
    assert_eq!(replayed, after);

    // the CLI reports bit-identical numbers for the same data and log
    let out = Command::new(env!("CARGO_BIN_EXE_shiftaudit"))
        .args(["label-accuracy", "--data", f.data.to_str().unwrap(), "--actions", f.log.to_str().unwrap()])
        .args(["--label", "modality", "--reference", "modality_true", "--b", "200", "--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let cli: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cli["log_length"], 5);
    for key in ["point", "ci_lo", "ci_hi"] {
        let a = cli["accuracy"][key].as_f64().unwrap();
        let b = after["accuracy"][key].as_f64().unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{key}");
    }
}

#[tokio::test]
async fn relabel_rejections_leave_state_untouched() {
    let f = fixture();
    let app = router(f.state.clone());
    let ids = selection(&f, "japan_wl", 2);
    let body = json!({"ids": [ids[0], "ghost-7"], "label_name": "modality", "value": "ce"}).to_string();
    let (status, res) = post(&app, "/api/selection/relabel", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(res["error"], "unknown_ids");
    assert!(res["detail"].as_str().unwrap().contains("ghost-7"));

    let body = json!({"ids": [ids[0]], "label_name": "modality", "value": "xray"}).to_string();
    let (status, res) = post(&app, "/api/selection/relabel", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(res["error"], "value_outside_schema");

    let body = json!({"ids": [ids[0]], "label_name": "colour", "value": "ce"}).to_string();
    let (status, _) = post(&app, "/api/selection/relabel", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, res) = post(&app, "/api/selection/relabel", "{\"ids\": [").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(res["error"].is_string() && res["detail"].is_string());
    let (status, _) = post(&app, "/api/selection/relabel", "{\"ids\": []}").await;
    assert!(status.is_client_error());

    let (_, actions) = get(&app, "/api/actions").await;
    assert_eq!(actions["actions"], json!([]));
    assert!(!f.log.exists() || fs::read_to_string(&f.log).unwrap().is_empty());

    let (status, _) = get(&app, "/api/metrics/accuracy?label_name=modality").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&app, "/api/metrics/accuracy?label_name=modality&reference=colour").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn concurrent_relabels_get_distinct_sequence_numbers() {
    let f = fixture();
    let app = router(f.state.clone());
    let ids = selection(&f, "japan_wl", 10);
    let tasks: Vec<_> = ids
        .iter()
        .map(|id| {
            let app = app.clone();
            let body = json!({"ids": [id], "label_name": "modality", "value": "ce"}).to_string();
            tokio::spawn(async move { post(&app, "/api/selection/relabel", &body).await })
        })
        .collect();
    let mut seqs = Vec::new();
    for t in tasks {
        let (status, res) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        seqs.push(res["action"]["seq"].as_u64().unwrap());
    }
    seqs.sort_unstable();
    assert_eq!(seqs, (1..=10).collect::<Vec<_>>());
    assert_eq!(fs::read_to_string(&f.log).unwrap().lines().count(), 10);
    let (_, recs) = get(&app, &format!("/api/records?ids={}", ids.join(","))).await;
    assert!(recs["records"].as_array().unwrap().iter().all(|r| r["labels"]["modality"] == "ce"));
}

#[tokio::test]
async fn probe_training_uses_current_labels() {
    let f = fixture();
    let app = router(f.state.clone());
    let body = json!({"task": "svc", "label_name": "modality", "positive": "ce", "c": 1.0, "gamma": "scale"}).to_string();
    let (status, res) = post(&app, "/api/probe/train", &body).await;
    assert_eq!(status, StatusCode::OK, "{res}");
    assert_eq!(res["probe"]["probe_id"], "probe-1");
    assert_eq!(res["probe"]["fit"]["converged"], true);
    let preds = res["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 200);

    // the well separated clusters let the probe undo the label noise
    let (_, recs) = get(&app, "/api/records").await;
    let agree = preds
        .iter()
        .zip(recs["records"].as_array().unwrap())
        .filter(|(p, r)| {
            let truth = r["labels"]["modality_true"].as_str().unwrap();
            (p["prediction"] == "ce") == (truth == "ce")
        })
        .count();
    assert_eq!(agree, 200);

    let body = json!({"task": "svr", "gamma": 0.5, "epsilon": 0.05}).to_string();
    let (status, res) = post(&app, "/api/probe/train", &body).await;
    assert_eq!(status, StatusCode::OK, "{res}");
    assert_eq!(res["probe"]["probe_id"], "probe-2");
    assert!(res["predictions"][0]["value"].is_number());

    let (status, _) = post(&app, "/api/probe/train", &json!({"task": "svc"}).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json!({"task": "svc", "label_name": "modality", "positive": "ce", "gamma": -1.0}).to_string();
    let (status, _) = post(&app, "/api/probe/train", &body).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let body = json!({"task": "svc", "label_name": "colour", "positive": "ce"}).to_string();
    let (status, res) = post(&app, "/api/probe/train", &body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(res["error"], "unknown_label");
}

#[tokio::test]
async fn frechet_matches_library() {
    let f = fixture();
    let app = router(f.state.clone());
    let (status, res) = get(&app, "/api/frechet?ref=japan_wl&cohort=japan_ce&b=100&seed=3").await;
    assert_eq!(status, StatusCode::OK, "{res}");
    let ds = load_dataset(&f.data).unwrap();
    let a = filter_by_cohort(&ds, &["japan_wl"]).matrix();
    let b = filter_by_cohort(&ds, &["japan_ce"]).matrix();
    let want = bootstrap_frechet(&a, &b, &BootstrapConfig::new(100, 3)).unwrap();
    assert_eq!(res["point"].as_f64().unwrap().to_bits(), want.point.to_bits());
    assert_eq!(res["ci_lo"].as_f64().unwrap().to_bits(), want.ci_lo.to_bits());
    assert_eq!(res["resamples"], 100);
    let (_, cached) = get(&app, "/api/frechet?ref=japan_wl&cohort=japan_ce&b=100&seed=3").await;
    assert_eq!(cached, res);

    let (status, res) = get(&app, "/api/frechet?ref=japan_wl&cohort=mars&b=100").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(res["detail"].as_str().unwrap().contains("mars"));
    let (status, _) = get(&app, "/api/frechet?ref=japan_wl&cohort=japan_ce&b=1").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}
