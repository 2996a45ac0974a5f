//! Staged pipeline: generate/ingest -> detect -> correlate -> evaluate ->
//! diagnose, all driven by one config file and one root seed.
//!
//! Every artifact is reproducible from config plus seed; a manifest records
//! the tool version, config hash, and every behavioral mode in effect.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stepcorr::detect::{CompareMode, DetectorBank};
use stepcorr::eval::{
    run_experiment, write_report_csv, write_trace_csv, EngineKind, ExperimentConfig, GridSpec,
};
use stepcorr::event::{write_event_csv, EventTypeCatalog, EventVector};
use stepcorr::generator::{generate_stream, GeneratorSpec};
use stepcorr::graph::{CorrelationGraph, PredictMode};
use stepcorr::ingest::{write_context_csv, ContextVector, StreamSchema};
use stepcorr::pm::{HistoryTrie, PmConfig};
use stepcorr::seed;
use stepcorr::Error;

use crate::commands::{default_stream_names, diagnostics_csv, read_context_input};
use crate::util::write_atomic;

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pipeline config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Run only these stages (comma-separated subset of
    /// generate,detect,correlate,evaluate,diagnose).
    #[arg(long)]
    pub stages: Option<String>,
}

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

fn default_stages() -> Vec<String> {
    ["generate", "detect", "correlate", "evaluate", "diagnose"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_tightness() -> f64 {
    3.0
}

fn default_warmup() -> u64 {
    25
}

fn default_mode() -> String {
    "before".into()
}

fn default_engine() -> String {
    "stepwise".into()
}

fn default_k() -> Vec<usize> {
    vec![3]
}

fn default_h() -> Vec<u64> {
    vec![1]
}

fn default_m() -> Vec<usize> {
    vec![1]
}

fn default_lookahead() -> usize {
    1
}

fn default_bound_policy() -> String {
    "random".into()
}

fn default_predict_mode() -> String {
    "from-current".into()
}

fn default_max_lag() -> usize {
    20
}

fn default_max_combo_k() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputSection {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub align: Option<String>,
    #[serde(default = "default_on_error")]
    pub on_error: String,
    #[serde(default = "default_ts")]
    pub timestamp_column: String,
}

fn default_format() -> String {
    "csv".into()
}

fn default_on_error() -> String {
    "skip".into()
}

fn default_ts() -> String {
    "timestamp".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorSection {
    #[serde(default = "default_tightness")]
    pub tightness: f64,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    #[serde(default = "default_mode")]
    pub mode: String,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            tightness: default_tightness(),
            warmup: default_warmup(),
            mode: default_mode(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineSection {
    #[serde(default = "default_engine")]
    pub kind: String,
    #[serde(default = "default_max_combo_k")]
    pub max_combo_k: usize,
    #[serde(default = "default_bound_policy")]
    pub bound_policy: String,
    #[serde(default = "default_predict_mode")]
    pub predict_mode: String,
    #[serde(default = "default_m")]
    pub order: Vec<usize>,
    #[serde(default = "default_lookahead")]
    pub lookahead: usize,
    #[serde(default)]
    pub p_thr: f64,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            kind: default_engine(),
            max_combo_k: default_max_combo_k(),
            bound_policy: default_bound_policy(),
            predict_mode: default_predict_mode(),
            order: default_m(),
            lookahead: default_lookahead(),
            p_thr: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSection {
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_h")]
    pub h: Vec<u64>,
    #[serde(default = "default_m")]
    pub m: Vec<usize>,
    #[serde(default)]
    pub eval_warmup: u64,
    #[serde(default)]
    pub write_trace: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            k: default_k(),
            h: default_h(),
            m: default_m(),
            eval_warmup: 0,
            write_trace: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsSection {
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            max_lag: default_max_lag(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default = "default_stages")]
    pub stages: Vec<String>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub input: Option<InputSection>,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub root_seed: u64,
    pub stages_run: Vec<String>,
    pub modes: ManifestModes,
    pub artifacts: Vec<(String, String)>,
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<ManifestFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestModes {
    pub compare_mode: String,
    pub align_policy: Option<String>,
    pub bound_policy: String,
    pub predict_mode: String,
    pub fn_rule: String,
    pub pm_conflict_rule: String,
    pub subset_distribution: String,
    pub eval_warmup: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFailure {
    pub stage: String,
    pub message: String,
}

// ---------------------------------------------------------------------------
// orchestration
// ---------------------------------------------------------------------------

struct StageState {
    vectors: Option<Vec<ContextVector>>,
    schema: Option<StreamSchema>,
    events: Option<Vec<EventVector>>,
    artifacts: Vec<(String, String)>,
}

pub fn run(args: PipelineArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading pipeline config {}", args.config.display()))?;
    let mut config: PipelineConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    if let Some(stages) = &args.stages {
        config.stages = stages.split(',').map(|s| s.trim().to_string()).collect();
    }
    validate_stages(&config.stages)?;
    let config_hash = format!("sha256:{:x}", Sha256::digest(text.as_bytes()));

    let mut state = StageState {
        vectors: None,
        schema: None,
        events: None,
        artifacts: Vec::new(),
    };
    let mut completed: Vec<String> = Vec::new();
    let mut failure: Option<ManifestFailure> = None;

    for stage in &config.stages {
        let result = run_stage(stage, &config, &mut state);
        match result {
            Ok(()) => completed.push(stage.clone()),
            Err(e) => {
                failure = Some(ManifestFailure {
                    stage: stage.clone(),
                    message: format!("{e:#}"),
                });
                break;
            }
        }
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        root_seed: config.seed,
        stages_run: completed.clone(),
        modes: ManifestModes {
            compare_mode: config.detector.mode.clone(),
            align_policy: config.input.as_ref().and_then(|i| i.align.clone()),
            bound_policy: config.engine.bound_policy.clone(),
            predict_mode: config.engine.predict_mode.clone(),
            fn_rule: "covered-miss".into(),
            pm_conflict_rule: "max-probability-longest-match".into(),
            subset_distribution: "uniform".into(),
            eval_warmup: config.evaluation.eval_warmup,
        },
        artifacts: state.artifacts.clone(),
        partial: failure.is_some(),
        failure: failure.clone(),
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    write_atomic(&config.out_dir.join("manifest.json"), &manifest_bytes)?;

    match failure {
        Some(f) => bail!("stage `{}` failed: {}", f.stage, f.message),
        None => {
            println!(
                "pipeline complete: stages [{}] -> {}",
                completed.join(", "),
                config.out_dir.display()
            );
            Ok(())
        }
    }
}

fn validate_stages(stages: &[String]) -> Result<()> {
    let known = ["generate", "detect", "correlate", "evaluate", "diagnose"];
    if stages.is_empty() {
        bail!(Error::InvalidSpec("stages list is empty".into()));
    }
    for s in stages {
        if !known.contains(&s.as_str()) {
            bail!(Error::InvalidSpec(format!(
                "unknown stage `{s}`; expected a subset of {known:?}"
            )));
        }
    }
    Ok(())
}

fn run_stage(stage: &str, config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    match stage {
        "generate" => stage_generate(config, state),
        "detect" => stage_detect(config, state),
        "correlate" => stage_correlate(config, state),
        "evaluate" => stage_evaluate(config, state),
        "diagnose" => stage_diagnose(config, state),
        other => bail!("unknown stage `{other}`"),
    }
}

fn artifact(state: &mut StageState, name: &str, path: &Path) {
    state
        .artifacts
        .push((name.to_string(), path.display().to_string()));
}

fn stage_generate(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    let Some(spec) = &config.generator else {
        bail!(Error::InvalidSpec(
            "generate stage needs a `generator` section".into()
        ));
    };
    // every stage derives its randomness from the one root seed
    let mut spec = spec.clone();
    spec.seed = seed::derive(config.seed, "generate");
    let generated = generate_stream(&spec)?;
    let schema = StreamSchema::new(default_stream_names(spec.n))?;

    let data_path = config.out_dir.join("data.csv");
    let mut buf = Vec::new();
    write_context_csv(&mut buf, &generated.vectors, &schema)?;
    write_atomic(&data_path, &buf)?;
    artifact(state, "context", &data_path);

    let truth_path = config.out_dir.join("truth.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "stream"])?;
    for g in &generated.truth {
        w.write_record([g.step.to_string(), g.stream.to_string()])?;
    }
    let bytes = w.into_inner().context("flushing truth csv")?;
    write_atomic(&truth_path, &bytes)?;
    artifact(state, "ground_truth", &truth_path);

    state.vectors = Some(generated.vectors);
    state.schema = Some(schema);
    Ok(())
}

fn load_input(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    if state.vectors.is_some() {
        return Ok(());
    }
    let Some(input) = &config.input else {
        bail!(Error::InvalidSpec(
            "no context data: run the generate stage or provide an `input` section".into()
        ));
    };
    let format = input.format.parse()?;
    let align = input.align.as_deref().map(str::parse).transpose()?;
    let on_error = input.on_error.parse()?;
    let (vectors, schema, _skipped) = read_context_input(
        &input.path,
        format,
        align,
        on_error,
        &input.timestamp_column,
    )?;
    state.vectors = Some(vectors);
    state.schema = Some(schema);
    Ok(())
}

fn stage_detect(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    load_input(config, state)?;
    let vectors = state.vectors.as_ref().expect("loaded above");
    let schema = state.schema.as_ref().expect("loaded above");
    let mode: CompareMode = config.detector.mode.parse()?;
    let mut bank = DetectorBank::new(
        schema.n(),
        config.detector.tightness,
        config.detector.warmup,
        mode,
    )?;
    let events = bank.detect_all(vectors)?;
    let catalog = EventTypeCatalog::from_schema(schema);

    let events_path = config.out_dir.join("events.csv");
    let mut buf = Vec::new();
    write_event_csv(&mut buf, &events, catalog.names())?;
    write_atomic(&events_path, &buf)?;
    artifact(state, "events", &events_path);

    state.events = Some(events);
    Ok(())
}

fn require_events(state: &StageState) -> Result<&[EventVector]> {
    state.events.as_deref().ok_or_else(|| {
        anyhow::anyhow!(Error::InvalidSpec(
            "no event stream: include the detect stage before correlate/evaluate".into()
        ))
    })
}

fn stage_correlate(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    let events = require_events(state)?;
    let kind: EngineKind = config.engine.kind.parse()?;
    let random = config.engine.bound_policy == "random";
    let states = stepcorr::eval::bound_trace(
        events,
        config.engine.max_combo_k,
        seed::derive(config.seed, "bound"),
        random,
    );
    let model_path = config.out_dir.join("model.json");
    match kind {
        EngineKind::Stepwise => {
            let n = state
                .schema
                .as_ref()
                .map(|s| s.n())
                .unwrap_or(events[0].bits.len());
            let mut graph = CorrelationGraph::new(n as u16);
            for s in states {
                graph.observe(s);
            }
            let mut buf = Vec::new();
            graph.to_writer(&mut buf)?;
            write_atomic(&model_path, &buf)?;
        }
        EngineKind::Pm => {
            let order = config.engine.order.first().copied().unwrap_or(1);
            let mut trie = HistoryTrie::new(PmConfig::new(
                order,
                config.engine.lookahead,
                config.engine.p_thr,
            )?);
            for s in states {
                trie.observe(s);
            }
            let mut buf = Vec::new();
            trie.to_writer(&mut buf)?;
            write_atomic(&model_path, &buf)?;
        }
    }
    artifact(state, "model", &model_path);
    Ok(())
}

fn stage_evaluate(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    let events = require_events(state)?;
    let cfg = ExperimentConfig {
        engine: config.engine.kind.parse()?,
        grid: GridSpec {
            max_combo_k: config.evaluation.k.clone(),
            horizons: config.evaluation.h.clone(),
            orders: config.evaluation.m.clone(),
        },
        seed: seed::derive(config.seed, "evaluate"),
        bound_random: config.engine.bound_policy == "random",
        predict_mode: config.engine.predict_mode.parse::<PredictMode>()?,
        lookahead: config.engine.lookahead,
        p_thr: config.engine.p_thr,
        eval_warmup: config.evaluation.eval_warmup,
    };
    let report = run_experiment(events, &cfg)?;
    let report_path = config.out_dir.join("report.csv");
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &report.rows)?;
    write_atomic(&report_path, &buf)?;
    artifact(state, "report", &report_path);
    if config.evaluation.write_trace {
        let trace_path = config.out_dir.join("trace.csv");
        let mut tbuf = Vec::new();
        write_trace_csv(&mut tbuf, &report.traces)?;
        write_atomic(&trace_path, &tbuf)?;
        artifact(state, "trace", &trace_path);
    }
    Ok(())
}

fn stage_diagnose(config: &PipelineConfig, state: &mut StageState) -> Result<()> {
    load_input(config, state)?;
    let vectors = state.vectors.as_ref().expect("loaded above");
    let schema = state.schema.as_ref().expect("loaded above");
    let out = diagnostics_csv(vectors, schema, config.diagnostics.max_lag)?;
    let diag_path = config.out_dir.join("diagnostics.csv");
    write_atomic(&diag_path, &out)?;
    artifact(state, "diagnostics", &diag_path);
    Ok(())
}
