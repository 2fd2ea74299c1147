//! Command-line front end: `gen`, `train`, `eval` and `report`.
//!
//! Every command reads one JSON [`RunConfig`] (`--config`), applies
//! `--set key=value` overrides with dotted keys, and exits with
//! [`EXIT_CONFIG`] on unknown keys or missing paths.

use crate::caseio::{load_dataset, save_dataset};
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, LayerConfig, ModelError, Task, UgcnParams};
use crate::pipeline::{generate_family, FamilyConfig};
use crate::scenario::ScenarioSet;
use crate::train::eval::{EvalOptions, Predictor, UgcnPredictor};
use crate::train::{
    eval_fdi, eval_forecast, initial_state, train_dense, train_from, DenseBaseline, DenseConfig, FeatureNorm,
    MetricsReport, TrainConfig, TrainError, TrainState,
};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GEN: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_SHAPE: i32 = 5;

const SEED_ENV: &str = "UGCN_SEED";
const CHECKPOINT_FILE: &str = "checkpoint.ugcn";
const DENSE_FILE: &str = "dense.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub horizons: Vec<usize>,
    pub omegas: Vec<f64>,
    pub train_fraction: f64,
    pub normalize_gso: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: (0..6).collect(),
            omegas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            train_fraction: 0.8,
            normalize_gso: true,
        }
    }
}

/// All settings of all commands. `seed` drives generation, initialisation
/// and batch sampling; `train.seed` and `dense.seed` are replaced by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub gen: FamilyConfig,
    pub model: LayerConfig,
    pub train: TrainConfig,
    pub dense: DenseConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gen: FamilyConfig::default(),
            model: LayerConfig::forecast(),
            train: TrainConfig::default(),
            dense: DenseConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Gen(String),
    #[error("{0}")]
    Diverged(String),
    #[error("incompatible checkpoint: {0}")]
    Shape(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Gen(_) => EXIT_GEN,
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::Shape(_) => EXIT_SHAPE,
            CliError::Io(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn model_err(e: ModelError) -> CliError {
    match e {
        ModelError::DimensionMismatch(_) | ModelError::TooFewNodes { .. } => CliError::Shape(e.to_string()),
        ModelError::Config(_) => CliError::Config(e.to_string()),
        _ => CliError::Io(e.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(name = "ugcn", version, about = "Topology-transferable graph convolution for grid state forecasting and FDI localisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; keys not given keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.epochs=5` (value parsed as JSON, else string).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Global seed (falls back to UGCN_SEED, then the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Ugcn,
    Dense,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Augment a base case and write one dataset file per system.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Shorthand for `--set gen.task=...`.
        #[arg(long)]
        task: Option<String>,
        /// Shorthand for `--set gen.case=...`.
        #[arg(long)]
        case: Option<String>,
        /// Shorthand for `--set gen.q=...`.
        #[arg(long)]
        q: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Write the binary container (`.ugds`) instead of JSON.
        #[arg(long)]
        binary: bool,
    },
    /// Train UGCN (or the dense baseline) on dataset files or directories.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Output directory for the checkpoint and history.csv.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier `train`.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ugcn")]
        model: ModelKind,
        /// Dataset the dense baseline trains on (default: the `*-base` system).
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Zero-shot evaluation on unseen systems.
    ///
    /// CSV columns: `horizon,mse,samples` (forecast) or
    /// `omega,accuracy,precision,recall,f1` (FDI). With `--model dense` and
    /// a UGCN checkpoint, `comparison.csv` holds both models side by side:
    /// `horizon,ugcn_mse,dense_mse` or `omega,ugcn_accuracy,dense_accuracy`.
    Eval {
        #[command(flatten)]
        common: Common,
        /// UGCN checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dense baseline file written by `train --model dense`.
        #[arg(long)]
        dense: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ugcn")]
        model: ModelKind,
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Merge metrics reports into one comparison table (text and CSV).
    Report {
        #[arg(required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        /// Optional CSV output file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flattens a JSON value into `key = default` lines.
fn describe(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                describe(&key, x, out);
            }
        }
        _ => out.push_str(&format!("  {prefix} = {v}\n")),
    }
}

fn config_help() -> String {
    let mut s = String::from("Config keys and defaults (set in --config JSON or with --set):\n");
    describe("", &serde_json::to_value(RunConfig::default()).expect("config serializes"), &mut s);
    s
}

fn unknown(key: &str) -> CliError {
    CliError::Config(format!("unknown key `{key}`"))
}

/// Sets a dotted key in `user`, creating objects as needed. `schema` is the
/// full default config and decides which keys exist.
fn set_path(user: &mut Value, schema: &Value, key: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let (mut cur, mut sch) = (user, schema);
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        sch = sch.get(*p).ok_or_else(|| unknown(key))?;
        let obj = cur.as_object_mut().ok_or_else(|| unknown(key))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn task_of(user: &Value) -> Result<Task, CliError> {
    let t = user
        .pointer("/model/task")
        .or_else(|| user.pointer("/gen/task"))
        .cloned()
        .unwrap_or(Value::Null);
    if t.is_null() {
        return Ok(Task::Forecast);
    }
    serde_json::from_value(t).map_err(|e| CliError::Config(format!("task: {e}")))
}

/// Config file, then `--set` overrides, on top of the defaults. The model
/// defaults follow the task (`model.task`, else `gen.task`).
fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut user = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<Value>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    let schema = serde_json::to_value(RunConfig::default()).expect("config serializes");
    for s in &common.set {
        let (k, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        set_path(&mut user, &schema, k.trim(), raw.trim())?;
    }
    let task = task_of(&user)?;
    let mut base = RunConfig::default();
    if task == Task::Fdi {
        base.model = LayerConfig::fdi();
    }
    base.gen.task = task;
    let mut v = serde_json::to_value(base).expect("config serializes");
    merge(&mut v, user);
    let mut cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    } else if let Ok(s) = std::env::var(SEED_ENV) {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={s} is not an integer")))?;
    }
    cfg.train.seed = cfg.seed;
    cfg.dense.seed = cfg.seed;
    Ok(cfg)
}

fn jobs(common: &Common) -> usize {
    common.jobs.unwrap_or_else(crate::par::default_jobs).max(1)
}

fn is_dataset(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("json") | Some("ugds"))
}

/// Expands directories to their dataset files (sorted by name).
fn dataset_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_dataset(f))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::Config(format!("no such dataset path: {}", p.display())));
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no dataset files found".into()));
    }
    Ok(out)
}

fn load_sets(inputs: &[PathBuf]) -> Result<Vec<ScenarioSet>, CliError> {
    dataset_paths(inputs)?
        .iter()
        .map(|p| load_dataset(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))))
        .collect()
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn cmd_gen(cfg: RunConfig, jobs: usize, out: &Path, binary: bool) -> Result<(), CliError> {
    let sets = generate_family(&cfg.gen, cfg.seed, jobs).map_err(|e| CliError::Gen(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let ext = if binary { "ugds" } else { "json" };
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &sets {
        let path = out.join(format!("{}.{ext}", s.name));
        save_dataset(&path, s).map_err(|e| io_err(&path, e))?;
        *hist.entry(s.n()).or_default() += 1;
    }
    println!("systems {}", sets.len());
    println!("buses  count");
    for (n, c) in hist {
        println!("{n:5}  {c}");
    }
    Ok(())
}

fn checkpoint_with_state(layer: &LayerConfig, state: &TrainState, cfg: &TrainConfig) -> Checkpoint {
    let mut ck = Checkpoint::new(layer.clone(), state.best_params.clone());
    ck.extra.push(("norm".into(), serde_json::to_vec(&state.norm).expect("norm serializes")));
    ck.extra.push(("train_state".into(), serde_json::to_vec(state).expect("state serializes")));
    ck.extra.push(("train_config".into(), serde_json::to_vec(cfg).expect("config serializes")));
    ck
}

fn checkpoint_error(path: &Path, e: CheckpointError) -> CliError {
    match e {
        CheckpointError::ShapeMismatch(m) => CliError::Shape(m),
        CheckpointError::Io(err) if err.kind() == std::io::ErrorKind::NotFound => {
            CliError::Config(format!("no such checkpoint: {}", path.display()))
        }
        e => CliError::Io(format!("{}: {e}", path.display())),
    }
}

fn cmd_train(
    cfg: RunConfig,
    jobs: usize,
    data: &[PathBuf],
    out: &Path,
    resume: Option<&Path>,
    model: ModelKind,
    base: Option<&Path>,
) -> Result<(), CliError> {
    let sets = load_sets(data)?;
    if model == ModelKind::Dense {
        let base_set = match base {
            Some(p) => load_dataset(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => sets
                .iter()
                .find(|s| s.name.ends_with("-base"))
                .cloned()
                .ok_or_else(|| CliError::Config("dense training needs --base or a `*-base` dataset".into()))?,
        };
        let norm = FeatureNorm::fit(&[&base_set]);
        let task = base_set_task(&base_set);
        let d = train_dense(&base_set, task, cfg.model.horizons, norm, &cfg.dense).map_err(model_err)?;
        return write(&out.join(DENSE_FILE), serde_json::to_vec(&d).expect("dense serializes"));
    }
    let layer = cfg.model.clone();
    if let Some(s) = sets.iter().find(|s| base_set_task(s) != layer.task) {
        return Err(CliError::Config(format!(
            "dataset {} is not a {:?} dataset; set model.task",
            s.name, layer.task
        )));
    }
    layer.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let state = match resume {
        Some(p) => {
            let ck = load_checkpoint(p).map_err(|e| checkpoint_error(p, e))?;
            if ck.config != layer {
                return Err(CliError::Config(format!("{} was trained with a different model config", p.display())));
            }
            let raw = ck
                .extra("train_state")
                .ok_or_else(|| CliError::Config(format!("{} holds no training state", p.display())))?;
            serde_json::from_slice::<TrainState>(raw).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?
        }
        None => initial_state(UgcnParams::init(&layer, cfg.seed), &layer, &sets, &cfg.train).map_err(train_err)?,
    };
    let ck_path = out.join(CHECKPOINT_FILE);
    let hist_path = out.join("history.csv");
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut save_err = None;
    let result = train_from(state, &layer, &sets, &cfg.train, jobs, |s| {
        let res = save_checkpoint(&ck_path, &checkpoint_with_state(&layer, s, &cfg.train))
            .map_err(|e| io_err(&ck_path, e))
            .and_then(|_| write(&hist_path, s.history_csv()));
        if let Err(e) = res {
            save_err.get_or_insert(e);
        }
    });
    if let Some(e) = save_err {
        return Err(e);
    }
    let state = match result {
        Ok(s) => s,
        Err(TrainError::DivergedLoss { epoch, step, last_good }) => {
            save_checkpoint(&ck_path, &checkpoint_with_state(&layer, &last_good, &cfg.train)).map_err(|e| io_err(&ck_path, e))?;
            write(&hist_path, last_good.history_csv())?;
            return Err(CliError::Diverged(format!(
                "loss diverged at epoch {epoch}, step {step}; last finite state saved to {}",
                ck_path.display()
            )));
        }
        Err(e) => return Err(train_err(e)),
    };
    save_checkpoint(&ck_path, &checkpoint_with_state(&layer, &state, &cfg.train)).map_err(|e| io_err(&ck_path, e))?;
    write(&hist_path, state.history_csv())?;
    if let Some(last) = state.history.last() {
        println!("epochs {} loss {:.6} val {:.6} best_val {:.6}", state.epoch, last.loss, last.val_loss, state.best_val);
    }
    Ok(())
}

fn base_set_task(set: &ScenarioSet) -> Task {
    if set.attacks.is_empty() {
        Task::Forecast
    } else {
        Task::Fdi
    }
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::InvalidConfig(m) => CliError::Config(m),
        TrainError::NoData => CliError::Config("no training windows in the given datasets".into()),
        TrainError::Model(m) => model_err(m),
        e @ TrainError::DivergedLoss { .. } => CliError::Diverged(e.to_string()),
    }
}

fn evaluate(model: &dyn Predictor, sets: &[ScenarioSet], cfg: &RunConfig, opts: &EvalOptions) -> Result<MetricsReport, CliError> {
    let mut r = match model.task() {
        Task::Forecast => eval_forecast(model, sets, &cfg.eval.horizons, opts),
        Task::Fdi => eval_fdi(model, sets, &cfg.eval.omegas, opts),
    }
    .map_err(model_err)?;
    r.config = serde_json::to_value(&cfg.eval).expect("config serializes");
    Ok(r)
}

fn write_report(dir: &Path, stem: &str, r: &MetricsReport) -> Result<(), CliError> {
    let mut json = serde_json::to_vec_pretty(r).expect("report serializes");
    json.push(b'\n');
    write(&dir.join(format!("{stem}.json")), json)?;
    write(&dir.join(format!("{stem}.csv")), r.to_csv())
}

fn comparison_csv(u: &MetricsReport, d: &MetricsReport) -> String {
    match u.task {
        Task::Forecast => {
            let mut s = String::from("horizon,ugcn_mse,dense_mse\n");
            for m in &u.forecast {
                let dm = d.mse_at(m.horizon).map(|v| v.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{},{dm}\n", m.horizon, m.mse));
            }
            s
        }
        Task::Fdi => {
            let mut s = String::from("omega,ugcn_accuracy,dense_accuracy\n");
            for m in &u.fdi {
                let dm = d.fdi_at(m.omega).map(|v| v.accuracy.to_string()).unwrap_or_default();
                s.push_str(&format!("{},{},{dm}\n", m.omega, m.accuracy));
            }
            s
        }
    }
}

fn cmd_eval(
    mut cfg: RunConfig,
    jobs: usize,
    checkpoint: Option<&Path>,
    dense: Option<&Path>,
    model: ModelKind,
    data: &[PathBuf],
    out: &Path,
) -> Result<(), CliError> {
    let sets = load_sets(data)?;
    let ugcn = checkpoint
        .map(|p| -> Result<(Checkpoint, FeatureNorm), CliError> {
            let ck = load_checkpoint(p).map_err(|e| checkpoint_error(p, e))?;
            let norm = ck
                .extra("norm")
                .and_then(|raw| serde_json::from_slice(raw).ok())
                .ok_or_else(|| CliError::Config(format!("{} holds no feature normalisation", p.display())))?;
            Ok((ck, norm))
        })
        .transpose()?;
    let opts = |norm| EvalOptions {
        norm,
        train_fraction: cfg.eval.train_fraction,
        normalize_gso: cfg.eval.normalize_gso,
        jobs,
    };
    let mut ugcn_report = None;
    if let Some((ck, norm)) = &ugcn {
        cfg.model = ck.config.clone();
        if ck.config.task == Task::Forecast {
            cfg.eval.horizons.retain(|&h| h < ck.config.horizons);
        }
        let before = ck.params.checksum();
        let p = UgcnPredictor {
            params: &ck.params,
            layer: &ck.config,
        };
        let r = evaluate(&p, &sets, &cfg, &opts(*norm))?;
        debug_assert_eq!(before, ck.params.checksum());
        write_report(out, "ugcn", &r)?;
        ugcn_report = Some(r);
    }
    match model {
        ModelKind::Ugcn => {
            if ugcn.is_none() {
                return Err(CliError::Config("eval needs --checkpoint".into()));
            }
        }
        ModelKind::Dense => {
            let p = dense.ok_or_else(|| CliError::Config("--model dense needs --dense".into()))?;
            let raw = std::fs::read(p).map_err(|_| CliError::Config(format!("no such dense model: {}", p.display())))?;
            let d: DenseBaseline = serde_json::from_slice(&raw).map_err(|e| CliError::Shape(format!("{}: {e}", p.display())))?;
            if d.task == Task::Forecast {
                cfg.eval.horizons.retain(|&h| h < d.horizons);
            }
            let mut r = evaluate(&d, &sets, &cfg, &opts(d.norm))?;
            r.notes = sets.iter().map(|s| format!("{}: {}", s.name, d.padding_note(s.n()))).collect();
            write_report(out, "dense", &r)?;
            if let Some(u) = &ugcn_report {
                write(&out.join("comparison.csv"), comparison_csv(u, &r))?;
            }
        }
    }
    Ok(())
}

type Key = (String, String, String);

fn report_rows(r: &MetricsReport) -> Vec<(Key, f64)> {
    let mut out = Vec::new();
    let mut push = |system: &str, forecast: &[crate::train::HorizonMetric], fdi: &[crate::train::FdiMetric]| {
        for m in forecast {
            out.push(((format!("mse@h{}", m.horizon), system.to_string(), r.model.clone()), m.mse));
        }
        for m in fdi {
            out.push(((format!("accuracy@{}", m.omega), system.to_string(), r.model.clone()), m.accuracy));
            out.push(((format!("f1@{}", m.omega), system.to_string(), r.model.clone()), m.f1));
        }
    };
    push("all", &r.forecast, &r.fdi);
    for s in &r.systems {
        push(&s.name, &s.forecast, &s.fdi);
    }
    out
}

/// Merged table of several reports: one row per (metric, system, model).
/// Returns the CSV text and any warnings.
pub fn merge_reports(reports: &[MetricsReport]) -> Result<(String, Vec<String>), CliError> {
    let first = reports.first().ok_or_else(|| CliError::Config("no reports".into()))?;
    let mut warnings = Vec::new();
    for r in &reports[1..] {
        if r.schema_version != first.schema_version {
            return Err(CliError::Config(format!(
                "schema mismatch: version {} vs {}",
                r.schema_version, first.schema_version
            )));
        }
        if r.task != first.task {
            return Err(CliError::Config(format!("schema mismatch: {:?} report merged with {:?}", r.task, first.task)));
        }
        if r.config != first.config {
            warnings.push(format!("report `{}` was produced with a different config than `{}`", r.model, first.model));
        }
    }
    let mut rows: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
    for r in reports {
        for ((metric, system, model), v) in report_rows(r) {
            rows.entry((metric, system)).or_default().push((model, v));
        }
    }
    let mut csv = String::from("metric,system,model,value\n");
    for ((metric, system), vals) in rows {
        for (model, v) in vals {
            csv.push_str(&format!("{metric},{system},{model},{v}\n"));
        }
    }
    Ok((csv, warnings))
}

fn cmd_report(paths: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let reports = paths
        .iter()
        .map(|p| {
            let raw = std::fs::read(p).map_err(|_| CliError::Config(format!("no such report: {}", p.display())))?;
            serde_json::from_slice::<MetricsReport>(&raw).map_err(|e| CliError::Config(format!("schema mismatch in {}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (csv, warnings) = merge_reports(&reports)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{:<16} {:<16} {:<10} {:>14}", "metric", "system", "model", "value");
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let v: f64 = f[3].parse().unwrap_or(f64::NAN);
        println!("{:<16} {:<16} {:<10} {:>14.6e}", f[0], f[1], f[2], v);
    }
    if let Some(o) = out {
        write(o, csv)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            common,
            task,
            case,
            q,
            out,
            binary,
        } => {
            let mut common = common;
            let shorthand = [
                task.map(|t| format!("gen.task=\"{t}\"")),
                case.map(|c| format!("gen.case=\"{c}\"")),
                q.map(|q| format!("gen.q={q}")),
            ];
            common.set.extend(shorthand.into_iter().flatten());
            let cfg = load_config(&common)?;
            cmd_gen(cfg, jobs(&common), &out, binary)
        }
        Command::Train {
            common,
            data,
            out,
            resume,
            model,
            base,
        } => {
            let cfg = load_config(&common)?;
            cmd_train(cfg, jobs(&common), &data, &out, resume.as_deref(), model, base.as_deref())
        }
        Command::Eval {
            common,
            checkpoint,
            dense,
            model,
            data,
            out,
        } => {
            let cfg = load_config(&common)?;
            cmd_eval(cfg, jobs(&common), checkpoint.as_deref(), dense.as_deref(), model, &data, &out)
        }
        Command::Report { reports, out } => cmd_report(&reports, out.as_deref()),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let help = config_help();
    let mut cmd = Cli::command();
    for name in ["gen", "train", "eval"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_long_help(help.clone()));
    }
    let parsed = cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
