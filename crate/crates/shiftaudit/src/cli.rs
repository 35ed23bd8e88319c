//! Subcommands of the `shiftaudit` binary.
//!
//! Every command writes one primary artifact (JSON or CSV) that echoes the
//! effective configuration, and maps failures onto exit codes: 1 for usage
//! errors, 2 for data errors, 3 when a solver stopped before converging (the
//! artifact is still written in that case).

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use shiftaudit_core::audit::{
    self, accuracy_ci, binary_targets, denoise_via_probe, pearson_ci, run_table5_scenarios, scenario_name, ConfidenceTarget,
    ScenarioConfig, ScenarioInputs,
};
use shiftaudit_core::dataset::{filter_by_cohort, split, Dataset, SplitSpec};
use shiftaudit_core::frechet::{bootstrap_frechet, shift_z_test, BootstrapConfig, FrechetReport, DEFAULT_RIDGE_SCALE};
use shiftaudit_core::kernel_probe::{predict_class, predict_value, train_svc, train_svr, GammaMode, TrainConfig};
use shiftaudit_core::synth::{generate, SynthSpec};
use shiftaudit_core::tsne::{tsne_embed, TsneConfig};

use crate::io::{self, IoError, Model};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "shiftaudit", version, about = "Label-free distribution-shift auditing of embedding datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Seed for every random draw of the command.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout when absent; a directory for `synth`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Svc,
    Svr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Raw,
    NegLog,
}

impl From<Target> for ConfidenceTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Raw => ConfidenceTarget::Raw,
            Target::NegLog => ConfidenceTarget::NegLog,
        }
    }
}

fn parse_gamma(s: &str) -> Result<GammaMode, String> {
    if s == "scale" {
        return Ok(GammaMode::Scale);
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaMode::Explicit(g)),
        _ => Err(format!("expected `scale` or a positive number, got `{s}`")),
    }
}

#[derive(Clone, Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// `scale` or an explicit kernel width.
    #[arg(long, default_value = "scale", value_parser = parse_gamma)]
    pub gamma: GammaMode,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl ProbeArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            c: self.c,
            epsilon: self.epsilon,
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Squared Fréchet distance of each cohort to a reference cohort, with
    /// bootstrap intervals and pairwise z-tests.
    Frechet {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long, value_delimiter = ',', required = true)]
        cohorts: Vec<String>,
        #[arg(long = "b", default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = DEFAULT_RIDGE_SCALE)]
        ridge_scale: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Exact t-SNE projection.
    Tsne {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 200.0)]
        learning_rate: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Trains an RBF probe and writes it as a model document.
    ProbeTrain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        /// Label to classify (svc).
        #[arg(long)]
        label: Option<String>,
        /// Label value treated as the positive class (svc).
        #[arg(long)]
        positive: Option<String>,
        /// Regression target derived from confidence (svr).
        #[arg(long, value_enum, default_value_t = Target::Raw)]
        target: Target,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Scores a saved probe on a dataset.
    ProbeEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Reference label for classifier accuracy (svc).
        #[arg(long)]
        label: Option<String>,
        #[arg(long, value_enum, default_value_t = Target::Raw)]
        target: Target,
        #[arg(long = "b", default_value_t = 1000)]
        resamples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Replaces noisy labels with probe predictions and scores both against
    /// a clean reference label when one is given.
    Denoise {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        positive: String,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long = "b", default_value_t = 1000)]
        resamples: usize,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// The three-scenario confidence prediction experiment.
    PredictPerf {
        #[arg(long)]
        data: PathBuf,
        /// Cohort the detector was developed on.
        #[arg(long)]
        source: String,
        /// Cohort under shift.
        #[arg(long)]
        shifted: String,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, value_enum, default_value_t = Target::Raw)]
        target: Target,
        #[arg(long = "b", default_value_t = 1000)]
        resamples: usize,
        #[command(flatten)]
        probe: ProbeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Generates a planted dataset and its ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Agreement between two labels after replaying the action log.
    LabelAccuracy {
        #[arg(long)]
        data: PathBuf,
        /// Action log (defaults to `<data>.actions.ndjson`).
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(long)]
        label: String,
        #[arg(long)]
        reference: String,
        #[arg(long = "b", default_value_t = 1000)]
        resamples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Serves the inspection API.
    Serve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub artifacts_written: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

fn data_error(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: msg.into(),
    }
}

impl From<shiftaudit_core::Error> for Failure {
    fn from(e: shiftaudit_core::Error) -> Self {
        let code = match e {
            shiftaudit_core::Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Data(inner) => inner.into(),
            other => data_error(other.to_string()),
        }
    }
}

type Run = Result<CommandResult, Failure>;

/// Writes `bytes` to `--out`, or stdout when it is absent.
fn write_artifact(out: Option<&Path>, bytes: &[u8]) -> Result<Vec<PathBuf>, Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| data_error(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, bytes).map_err(|e| data_error(format!("{}: {e}", p.display())))?;
            Ok(vec![p.to_path_buf()])
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| data_error(format!("stdout: {e}")))?;
            Ok(Vec::new())
        }
    }
}

fn json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn finish(common: &Common, json: Value, csv: Option<Vec<u8>>, converged: bool, summary: String) -> Run {
    let bytes = match (common.format, csv) {
        (Format::Csv, Some(b)) => b,
        (Format::Csv, None) => return Err(usage("this command has no CSV output; use --format json")),
        (Format::Json, _) => json_bytes(&json),
    };
    let artifacts_written = write_artifact(common.out.as_deref(), &bytes)?;
    Ok(CommandResult {
        exit_code: if converged { EXIT_OK } else { EXIT_NOT_CONVERGED },
        artifacts_written,
        summary,
    })
}

fn require_cohort(ds: &Dataset, name: &str) -> Result<Dataset, Failure> {
    let sub = filter_by_cohort(ds, &[name]);
    if sub.is_empty() {
        return Err(data_error(format!("unknown cohort `{name}`")));
    }
    Ok(sub)
}

fn check_resamples(b: usize) -> Result<(), Failure> {
    if b < 2 {
        return Err(usage(format!("--b must be at least 2, got {b}")));
    }
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Frechet {
            data,
            reference,
            cohorts,
            resamples,
            ridge_scale,
            common,
        } => cmd_frechet(&data, &reference, &cohorts, resamples, ridge_scale, &common),
        Command::Tsne {
            data,
            perplexity,
            iterations,
            learning_rate,
            common,
        } => {
            let cfg = TsneConfig {
                perplexity,
                iterations,
                learning_rate,
                seed: common.seed(),
                ..TsneConfig::default()
            };
            cmd_tsne(&data, cfg, &common)
        }
        Command::ProbeTrain {
            data,
            task,
            label,
            positive,
            target,
            probe,
            common,
        } => cmd_probe_train(&data, task, label, positive, target, &probe, &common),
        Command::ProbeEval {
            model,
            data,
            label,
            target,
            resamples,
            common,
        } => cmd_probe_eval(&model, &data, label, target, resamples, &common),
        Command::Denoise {
            train,
            test,
            label,
            positive,
            reference,
            resamples,
            probe,
            common,
        } => cmd_denoise(&train, &test, &label, &positive, reference.as_deref(), resamples, &probe, &common),
        Command::PredictPerf {
            data,
            source,
            shifted,
            train_fraction,
            target,
            resamples,
            probe,
            common,
        } => cmd_predict_perf(&data, &source, &shifted, train_fraction, target, resamples, &probe, &common),
        Command::Synth { spec, common } => cmd_synth(&spec, &common),
        Command::LabelAccuracy {
            data,
            actions,
            label,
            reference,
            resamples,
            common,
        } => cmd_label_accuracy(&data, actions, &label, &reference, resamples, &common),
        Command::Serve {
            data,
            actions,
            addr,
            perplexity,
            iterations,
            common,
        } => {
            let tsne = TsneConfig {
                perplexity,
                iterations,
                seed: common.seed(),
                ..TsneConfig::default()
            };
            cmd_serve(&data, actions, addr, tsne)
        }
    }
}

fn frechet_summary(reference: &str, cohort: &str, n_ref: usize, n: usize, r: &FrechetReport) -> Value {
    json!({
        "ref": reference,
        "cohort": cohort,
        "n_ref": n_ref,
        "n_cohort": n,
        "point": r.point,
        "ci_lo": r.ci_lo,
        "ci_hi": r.ci_hi,
        "resamples": r.resamples,
        "seed": r.seed,
    })
}

fn cmd_frechet(data: &Path, reference: &str, cohorts: &[String], b: usize, ridge_scale: f64, common: &Common) -> Run {
    check_resamples(b)?;
    if !(ridge_scale >= 0.0) {
        return Err(usage("--ridge-scale must be nonnegative"));
    }
    let ds = io::load_dataset(data)?;
    let ref_ds = require_cohort(&ds, reference)?;
    let cfg = BootstrapConfig {
        resamples: b,
        seed: common.seed(),
        ridge_scale,
    };
    let ref_x = ref_ds.matrix();
    let mut reports = Vec::new();
    for c in cohorts {
        let sub = require_cohort(&ds, c)?;
        let r = bootstrap_frechet(&ref_x, &sub.matrix(), &cfg)?;
        reports.push((c.clone(), sub.len(), r));
    }
    let mut z_tests = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, _, ra) = &reports[i];
            let (bname, _, rb) = &reports[j];
            z_tests.push(shift_z_test(a.clone(), ra, bname.clone(), rb)?);
        }
    }
    let summaries: Vec<Value> = reports
        .iter()
        .map(|(c, n, r)| frechet_summary(reference, c, ref_ds.len(), *n, r))
        .collect();
    let json = json!({
        "command": "frechet",
        "config": {
            "data": path_str(data),
            "ref": reference,
            "cohorts": cohorts,
            "b": b,
            "seed": common.seed(),
            "ridge_scale": ridge_scale,
        },
        "reports": summaries,
        "z_tests": z_tests,
    });
    let csv = csv_bytes(
        &["ref", "cohort", "point", "ci_lo", "ci_hi"],
        reports.iter().map(|(c, _, r)| {
            vec![reference.to_string(), c.clone(), r.point.to_string(), r.ci_lo.to_string(), r.ci_hi.to_string()]
        }),
    );
    let summary = reports
        .iter()
        .map(|(c, _, r)| format!("{c}: {:.4} [{:.4}, {:.4}]", r.point, r.ci_lo, r.ci_hi))
        .collect::<Vec<_>>()
        .join("; ");
    finish(common, json, Some(csv), true, summary)
}

fn cmd_tsne(data: &Path, cfg: TsneConfig, common: &Common) -> Run {
    let ds = io::load_dataset(data)?;
    let n = ds.len();
    if n < 4 {
        return Err(data_error(format!("t-SNE needs at least 4 records, found {n}")));
    }
    if !(cfg.perplexity > 1.0) || cfg.perplexity >= (n - 1) as f64 {
        return Err(usage(format!(
            "--perplexity must lie in (1, n - 1) = (1, {}), got {}",
            n - 1,
            cfg.perplexity
        )));
    }
    let proj = tsne_embed(&ds.matrix(), &ds.ids(), &cfg)?;
    let converged = proj.unconverged_rows.is_empty();
    if !converged {
        log::warn!("perplexity calibration did not converge on {} rows", proj.unconverged_rows.len());
    }
    let store = audit::LabelStore::from_dataset(&ds);
    let points = io::projection_points(&ds, store.view(), &proj);
    let json = json!({
        "command": "tsne",
        "config": { "data": path_str(data), "tsne": &proj.config },
        "final_kl": proj.final_kl,
        "kl_trace": &proj.kl_trace,
        "unconverged_rows": &proj.unconverged_rows,
        "points": points,
    });
    let mut csv = Vec::new();
    io::write_projection_csv(&mut csv, &proj)?;
    finish(common, json, Some(csv), converged, format!("{n} points, final KL {:.4}", proj.final_kl))
}

fn svc_classes(positive: &str) -> (String, String) {
    (format!("not_{positive}"), positive.to_string())
}

fn cmd_probe_train(
    data: &Path,
    task: Task,
    label: Option<String>,
    positive: Option<String>,
    target: Target,
    probe: &ProbeArgs,
    common: &Common,
) -> Run {
    if common.format == Format::Csv {
        return Err(usage("probe-train writes JSON model documents only"));
    }
    let ds = io::load_dataset(data)?;
    let cfg = probe.config(common.seed());
    let x = ds.matrix();
    let (model, config) = match task {
        Task::Svc => {
            let (Some(label), Some(positive)) = (label, positive) else {
                return Err(usage("--task svc needs --label and --positive"));
            };
            let y = binary_targets(&ds, &label, &positive)?;
            let (neg, pos) = svc_classes(&positive);
            let m = train_svc(&x, &y, &cfg)?.with_classes(neg, pos);
            let config = json!({ "data": path_str(data), "task": "svc", "label": label, "positive": positive, "train": &cfg });
            (Model::Svc(m), config)
        }
        Task::Svr => {
            let t_kind = ConfidenceTarget::from(target);
            let t: Vec<f64> = ds.confidences()?.into_iter().map(|c| t_kind.apply(c)).collect();
            let m = train_svr(&x, &t, &cfg)?;
            let config = json!({ "data": path_str(data), "task": "svr", "target": t_kind, "train": &cfg });
            (Model::Svr(m), config)
        }
    };
    let info = match &model {
        Model::Svc(m) => m.info,
        Model::Svr(m) => m.info,
    };
    let doc = io::ModelDocument::from_model(&model, config);
    let json = serde_json::to_value(&doc).map_err(|e| data_error(e.to_string()))?;
    finish(
        common,
        json,
        None,
        info.converged,
        format!("{} iterations, converged = {}", info.iterations, info.converged),
    )
}

fn cmd_probe_eval(model_path: &Path, data: &Path, label: Option<String>, target: Target, b: usize, common: &Common) -> Run {
    check_resamples(b)?;
    let model = io::load_model(model_path)?;
    let ds = io::load_dataset(data)?;
    let x = ds.matrix();
    let seed = common.seed();
    let base_config = json!({ "model": path_str(model_path), "data": path_str(data), "b": b, "seed": seed });
    match model {
        Model::Svc(m) => {
            let Some(label) = label else {
                return Err(usage("evaluating a classifier needs --label"));
            };
            let mut pred = Vec::with_capacity(ds.len());
            let mut truth = Vec::with_capacity(ds.len());
            let mut rows = Vec::with_capacity(ds.len());
            for (r, row) in ds.records().iter().zip(x.iter_rows()) {
                let (class, dv) = predict_class(&m, row)?;
                let actual = r.label(&label).ok_or_else(|| {
                    Failure::from(shiftaudit_core::Error::MissingLabel {
                        id: r.id.clone(),
                        label: label.clone(),
                    })
                })?;
                let actual = if actual == m.classes[1] { &m.classes[1] } else { &m.classes[0] };
                pred.push(class.to_string());
                truth.push(actual.clone());
                rows.push(vec![r.id.clone(), class.to_string(), dv.to_string()]);
            }
            let report = accuracy_ci(&pred, &truth, b, seed)?;
            let json = json!({
                "command": "probe-eval",
                "config": { "run": base_config, "label": label },
                "kind": "svc",
                "accuracy": &report,
                "predictions": rows.iter().map(|r| json!({"id": r[0], "prediction": r[1], "decision": r[2].parse::<f64>().unwrap()})).collect::<Vec<_>>(),
            });
            let csv = csv_bytes(&["id", "prediction", "decision"], rows);
            finish(common, json, Some(csv), true, format!("accuracy {:.4}", report.point))
        }
        Model::Svr(m) => {
            let t_kind = ConfidenceTarget::from(target);
            let truth: Vec<f64> = ds.confidences()?.into_iter().map(|c| t_kind.apply(c)).collect();
            let pred = x
                .iter_rows()
                .map(|row| predict_value(&m, row))
                .collect::<shiftaudit_core::Result<Vec<f64>>>()?;
            let report = pearson_ci(&pred, &truth, b, seed)?;
            let json = json!({
                "command": "probe-eval",
                "config": { "run": base_config, "target": t_kind },
                "kind": "svr",
                "correlation": &report,
                "predictions": ds.records().iter().zip(&pred).map(|(r, p)| json!({"id": r.id, "value": p})).collect::<Vec<_>>(),
            });
            let csv = csv_bytes(
                &["id", "value"],
                ds.records().iter().zip(&pred).map(|(r, p)| vec![r.id.clone(), p.to_string()]),
            );
            finish(common, json, Some(csv), true, format!("pearson r {:.4}", report.r))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_denoise(
    train: &Path,
    test: &Path,
    label: &str,
    positive: &str,
    reference: Option<&str>,
    b: usize,
    probe: &ProbeArgs,
    common: &Common,
) -> Run {
    check_resamples(b)?;
    let train_ds = io::load_dataset(train)?;
    let test_ds = io::load_dataset(test)?;
    let cfg = probe.config(common.seed());
    let out = denoise_via_probe(&train_ds, &test_ds, label, positive, reference, &cfg, b, common.seed())?;
    let json = json!({
        "command": "denoise",
        "config": {
            "train": path_str(train),
            "test": path_str(test),
            "label": label,
            "positive": positive,
            "reference": reference,
            "b": b,
            "seed": common.seed(),
            "train_config": &cfg,
        },
        "outcome": &out,
    });
    let csv = csv_bytes(
        &["id", "positive", "decision"],
        out.predictions
            .iter()
            .map(|p| vec![p.id.clone(), p.positive.to_string(), p.decision.to_string()]),
    );
    let summary = match (&out.probe_accuracy, &out.noisy_agreement) {
        (Some(p), Some(n)) => format!("probe accuracy {:.4}, noisy label agreement {:.4}", p.point, n.point),
        _ => format!("{} predictions", out.predictions.len()),
    };
    finish(common, json, Some(csv), out.fit.converged, summary)
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict_perf(
    data: &Path,
    source: &str,
    shifted: &str,
    train_fraction: f64,
    target: Target,
    b: usize,
    probe: &ProbeArgs,
    common: &Common,
) -> Run {
    check_resamples(b)?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(usage("--train-fraction must lie in (0, 1)"));
    }
    let ds = io::load_dataset(data)?;
    let seed = common.seed();
    let (src_train, src_test) = split(&require_cohort(&ds, source)?, &SplitSpec::new(train_fraction, seed))?;
    let (sh_train, sh_test) = split(
        &require_cohort(&ds, shifted)?,
        &SplitSpec::new(train_fraction, seed.wrapping_add(1)),
    )?;
    let cfg = ScenarioConfig {
        train: probe.config(seed),
        resamples: b,
        seed,
        target: target.into(),
    };
    let inputs = ScenarioInputs {
        israel_train: &src_train,
        israel_test: &src_test,
        japan_train: &sh_train,
        japan_test: &sh_test,
    };
    let reports = run_table5_scenarios(&inputs, &cfg)?;
    let converged = reports.iter().all(|r| r.fit.converged);
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("reports serialize");
            v["name"] = json!(scenario_name(r.scenario));
            v
        })
        .collect();
    let json = json!({
        "command": "predict-perf",
        "config": {
            "data": path_str(data),
            "source": source,
            "shifted": shifted,
            "train_fraction": train_fraction,
            "scenario": &cfg,
        },
        "scenarios": rows,
    });
    let csv = csv_bytes(
        &["scenario", "n_train", "n_test", "r", "ci_lo", "ci_hi"],
        reports.iter().map(|r| {
            vec![
                scenario_name(r.scenario),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.correlation.r.to_string(),
                r.correlation.ci_lo.to_string(),
                r.correlation.ci_hi.to_string(),
            ]
        }),
    );
    let summary = reports
        .iter()
        .map(|r| format!("{}: r = {:.3}", scenario_name(r.scenario), r.correlation.r))
        .collect::<Vec<_>>()
        .join("; ");
    finish(common, json, Some(csv), converged, summary)
}

fn cmd_synth(spec_path: &Path, common: &Common) -> Run {
    let Some(out_dir) = common.out.as_deref() else {
        return Err(usage("synth needs --out <directory>"));
    };
    let text = fs::read_to_string(spec_path).map_err(|e| data_error(format!("{}: {e}", spec_path.display())))?;
    let mut spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| data_error(format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let (ds, truth) = generate(&spec)?;
    fs::create_dir_all(out_dir).map_err(|e| data_error(format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    match common.format {
        Format::Csv => {
            let p = out_dir.join("data.csv");
            io::write_csv(&p, &ds)?;
            written.push(p);
        }
        Format::Json => {
            let p = out_dir.join("data.json");
            let m = io::write_binary(&p, &ds)?;
            written.push(out_dir.join(&m.metadata_file));
            written.push(out_dir.join(&m.vector_file));
            written.push(p);
        }
    }
    let truth_path = out_dir.join("truth.json");
    let doc = json!({ "command": "synth", "config": { "spec": &spec }, "truth": &truth });
    written.extend(write_artifact(Some(&truth_path), &json_bytes(&doc))?);
    Ok(CommandResult {
        exit_code: EXIT_OK,
        artifacts_written: written,
        summary: format!("{} records in {} cohorts", ds.len(), spec.cohorts.len()),
    })
}

fn cmd_label_accuracy(
    data: &Path,
    actions: Option<PathBuf>,
    label: &str,
    reference: &str,
    b: usize,
    common: &Common,
) -> Run {
    check_resamples(b)?;
    let ds = io::load_dataset(data)?;
    let log_path = actions.unwrap_or_else(|| io::default_log_path(data));
    let store = io::load_label_store(&ds, &log_path)?;
    let report = audit::label_accuracy(store.view(), label, reference, b, common.seed())?;
    let json = json!({
        "command": "label-accuracy",
        "config": {
            "data": path_str(data),
            "actions": path_str(&log_path),
            "label": label,
            "reference": reference,
            "b": b,
            "seed": common.seed(),
        },
        "log_length": store.log().len(),
        "accuracy": &report,
    });
    let csv = csv_bytes(
        &["point", "ci_lo", "ci_hi", "n"],
        [vec![
            report.point.to_string(),
            report.ci_lo.to_string(),
            report.ci_hi.to_string(),
            report.n.to_string(),
        ]],
    );
    finish(common, json, Some(csv), true, format!("accuracy {:.4} over {} records", report.point, report.n))
}

fn cmd_serve(data: &Path, actions: Option<PathBuf>, addr: SocketAddr, tsne: TsneConfig) -> Run {
    let ds = io::load_dataset(data)?;
    let log_path = actions.unwrap_or_else(|| io::default_log_path(data));
    let state = crate::server::AppState::open(ds, &log_path, tsne)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| data_error(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(crate::server::serve(state, addr))
        .map_err(|e| data_error(format!("server on {addr}: {e}")))?;
    Ok(CommandResult {
        exit_code: EXIT_OK,
        artifacts_written: vec![log_path],
        summary: "server stopped".into(),
    })
}
