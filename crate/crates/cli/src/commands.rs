//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};

use stepcorr::detect::{CompareMode, DetectorBank};
use stepcorr::eval::{
    run_experiment, write_report_csv, write_trace_csv, EngineKind, ExperimentConfig, GridSpec,
};
use stepcorr::event::{read_event_csv, write_event_csv, EventSet, EventTypeCatalog, EventVector};
use stepcorr::generator::{generate_stream, GeneratorSpec};
use stepcorr::graph::{CorrelationGraph, PredictMode};
use stepcorr::ingest::{
    self, align_streams, parse_context_stream, write_context_csv, AlignPolicy, ContextVector,
    ErrorPolicy, StreamFormat, StreamSchema,
};
use stepcorr::pm::{HistoryTrie, PmConfig};
use stepcorr::{diagnostics, Error};

use crate::util::{parse_list, write_atomic};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic context stream from a JSON spec.
    Generate(GenerateArgs),
    /// Turn numeric streams into a binary event stream via control charts.
    Detect(DetectArgs),
    /// Build or update a correlation model from an event stream.
    Correlate(CorrelateArgs),
    /// Query a persisted model for forecasts.
    Predict(PredictArgs),
    /// Score per-step recommendations over a parameter grid.
    Evaluate(EvaluateArgs),
    /// Hurst exponent and (partial) autocorrelation per stream.
    Diagnose(DiagnoseArgs),
    /// Run the staged pipeline from one config file.
    Pipeline(crate::pipeline::PipelineArgs),
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(args) => generate(args),
        Command::Detect(args) => detect(args),
        Command::Correlate(args) => correlate(args),
        Command::Predict(args) => predict(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Diagnose(args) => diagnose(args),
        Command::Pipeline(args) => crate::pipeline::run(args),
    }
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output context CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional ground-truth CSV of injected changes.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn load_generator_spec(path: &Path) -> Result<GeneratorSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading generator spec {}", path.display()))?;
    let spec: GeneratorSpec =
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    Ok(spec)
}

pub fn default_stream_names(n: u16) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = load_generator_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let generated = generate_stream(&spec)?;
    let schema = StreamSchema::new(default_stream_names(spec.n))?;
    let mut buf = Vec::new();
    write_context_csv(&mut buf, &generated.vectors, &schema)?;
    write_atomic(&args.out, &buf)?;
    if let Some(truth_path) = &args.truth {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(["step", "stream"])?;
        for g in &generated.truth {
            w.write_record([g.step.to_string(), g.stream.to_string()])?;
        }
        let bytes = w.into_inner().context("flushing truth csv")?;
        write_atomic(truth_path, &bytes)?;
    }
    println!(
        "generated {} steps x {} streams into {} ({} injected changes)",
        generated.vectors.len(),
        spec.n,
        args.out.display(),
        generated.truth.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input context stream.
    #[arg(long)]
    pub input: PathBuf,
    /// Input encoding.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Alignment for partial NDJSON sources (strict | hold). Omit for
    /// complete records.
    #[arg(long)]
    pub align: Option<String>,
    /// Malformed-record policy (skip | abort).
    #[arg(long, default_value = "skip")]
    pub on_error: String,
    /// Control-limit multiplier.
    #[arg(long, default_value_t = 3.0)]
    pub tightness: f64,
    /// Minimum samples before a detector may signal.
    #[arg(long, default_value_t = 25)]
    pub warmup: u64,
    /// Limit comparison order (before | literal).
    #[arg(long, default_value = "before")]
    pub mode: String,
    /// Name of the timestamp column, excluded from detection.
    #[arg(long, default_value = "timestamp")]
    pub timestamp_column: String,
    /// Output event-stream CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub struct DetectOutcome {
    pub events: Vec<EventVector>,
    pub catalog: EventTypeCatalog,
    pub skipped: u64,
}

pub fn read_context_input(
    input: &Path,
    format: StreamFormat,
    align: Option<AlignPolicy>,
    on_error: ErrorPolicy,
    timestamp_column: &str,
) -> Result<(Vec<ContextVector>, StreamSchema, u64)> {
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let schema = match format {
        StreamFormat::Csv => ingest::schema_from_csv_header(bytes.as_slice(), timestamp_column)?,
        StreamFormat::Ndjson => {
            ingest::schema_from_ndjson_first_line(bytes.as_slice(), timestamp_column)?
        }
    };
    match (format, align) {
        (StreamFormat::Ndjson, Some(policy)) => {
            let records = ingest::read_partial_ndjson(bytes.as_slice(), &schema)?;
            let out = align_streams(&records, schema.n(), policy)?;
            Ok((out.vectors, schema, out.dropped))
        }
        _ => {
            let out = parse_context_stream(bytes.as_slice(), &schema, format, on_error)?;
            Ok((out.vectors, schema, out.skipped))
        }
    }
}

pub fn detect_outcome(args: &DetectArgs) -> Result<DetectOutcome> {
    let format: StreamFormat = args.format.parse()?;
    let align = args
        .align
        .as_deref()
        .map(str::parse::<AlignPolicy>)
        .transpose()?;
    let on_error: ErrorPolicy = args.on_error.parse()?;
    let mode: CompareMode = args.mode.parse()?;
    let (vectors, schema, skipped) =
        read_context_input(&args.input, format, align, on_error, &args.timestamp_column)?;
    let mut bank = DetectorBank::new(schema.n(), args.tightness, args.warmup, mode)?;
    let events = bank.detect_all(&vectors)?;
    Ok(DetectOutcome {
        events,
        catalog: EventTypeCatalog::from_schema(&schema),
        skipped,
    })
}

fn detect(args: DetectArgs) -> Result<()> {
    let out = detect_outcome(&args)?;
    let mut buf = Vec::new();
    write_event_csv(&mut buf, &out.events, out.catalog.names())?;
    write_atomic(&args.out, &buf)?;
    let fired: u64 = out
        .events
        .iter()
        .map(|ev| ev.bits.iter().filter(|b| **b).count() as u64)
        .sum();
    println!(
        "detected {} events over {} steps x {} streams into {} ({} records skipped)",
        fired,
        out.events.len(),
        out.catalog.len(),
        args.out.display(),
        out.skipped
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Input event-stream CSV.
    #[arg(long)]
    pub events: PathBuf,
    /// Correlation engine (stepwise | pm).
    #[arg(long, default_value = "stepwise")]
    pub engine: String,
    /// Bound on concurrent events per state.
    #[arg(long, default_value_t = 3)]
    pub max_combo_k: usize,
    /// Oversized-state reduction (random | lowest-index).
    #[arg(long, default_value = "random")]
    pub bound_policy: String,
    /// Root seed for the random bound policy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum order m (pm engine).
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Lookahead l (pm engine).
    #[arg(long, default_value_t = 1)]
    pub lookahead: usize,
    /// Cut-off probability threshold (pm engine).
    #[arg(long, default_value_t = 0.0)]
    pub pthr: f64,
    /// Model document to write; an existing document is updated.
    #[arg(long)]
    pub model: PathBuf,
    /// Ignore an existing model document and start fresh.
    #[arg(long, default_value_t = false)]
    pub fresh: bool,
}

fn bound_states_for(
    args_seed: u64,
    policy: &str,
    k: usize,
    events: &[EventVector],
) -> Result<Vec<EventSet>> {
    let random = match policy {
        "random" => true,
        "lowest-index" => false,
        other => bail!(Error::InvalidParameter(format!(
            "unknown bound policy `{other}`"
        ))),
    };
    Ok(stepcorr::eval::bound_trace(events, k, args_seed, random))
}

fn correlate(args: CorrelateArgs) -> Result<()> {
    let engine: EngineKind = args.engine.parse()?;
    let bytes =
        fs::read(&args.events).with_context(|| format!("reading {}", args.events.display()))?;
    let (events, names) = read_event_csv(bytes.as_slice())?;
    let states = bound_states_for(args.seed, &args.bound_policy, args.max_combo_k, &events)?;
    match engine {
        EngineKind::Stepwise => {
            let mut graph = if args.model.exists() && !args.fresh {
                let file = fs::File::open(&args.model)?;
                CorrelationGraph::from_reader(file)?
            } else {
                CorrelationGraph::new(names.len() as u16)
            };
            for s in states {
                graph.observe(s);
            }
            let mut buf = Vec::new();
            graph.to_writer(&mut buf)?;
            write_atomic(&args.model, &buf)?;
            println!(
                "correlated {} steps: {} states, {} edges -> {}",
                graph.steps(),
                graph.state_count(),
                graph
                    .observed_states()
                    .map(|s| graph.edge_row(s).map_or(0, |r| r.len()))
                    .sum::<usize>(),
                args.model.display()
            );
        }
        EngineKind::Pm => {
            let mut trie = if args.model.exists() && !args.fresh {
                let file = fs::File::open(&args.model)?;
                HistoryTrie::from_reader(file)?
            } else {
                HistoryTrie::new(PmConfig::new(args.order, args.lookahead, args.pthr)?)
            };
            for s in states {
                trie.observe(s);
            }
            let mut buf = Vec::new();
            trie.to_writer(&mut buf)?;
            write_atomic(&args.model, &buf)?;
            println!(
                "indexed {} steps into a depth-{} history trie -> {}",
                trie.observed(),
                trie.depth(),
                args.model.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Persisted correlation model (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[command(subcommand)]
    pub query: PredictQuery,
}

#[derive(Debug, Subcommand)]
pub enum PredictQuery {
    /// Next-step state distribution.
    Next {
        /// Show only the top N states.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Single recommended next state.
    Recommend {
        /// Recommendation mode (from-current | marginal).
        #[arg(long, default_value = "from-current")]
        mode: String,
    },
    /// Probability that a set of event types occurs at the next step.
    EventSet {
        /// Event set, e.g. "{1,3}" or "1,3"; "{}" for the empty set.
        #[arg(long)]
        set: String,
    },
    /// Multi-step transition probability on the frozen chain.
    Nstep {
        #[arg(long, value_name = "SET")]
        from: String,
        #[arg(long, value_name = "SET")]
        to: String,
        #[arg(long)]
        steps: u64,
    },
}

fn predict(args: PredictArgs) -> Result<()> {
    let file = fs::File::open(&args.model)
        .with_context(|| format!("opening model {}", args.model.display()))?;
    let graph = CorrelationGraph::from_reader(file)?;
    match args.query {
        PredictQuery::Next { top } => {
            let (dist, mass) = graph.next_distribution()?;
            let mut entries: Vec<(&EventSet, f64)> =
                dist.probs().iter().map(|(s, p)| (s, *p)).collect();
            entries.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.0.cmp(b.0))
            });
            if let Some(top) = top {
                entries.truncate(top);
            }
            for (s, p) in entries {
                println!("{s}\t{p:.6}");
            }
            if mass < 1.0 - 1e-12 {
                println!(
                    "# {:.6} of the prior mass had undefined rows and was renormalized",
                    1.0 - mass
                );
            }
        }
        PredictQuery::Recommend { mode } => {
            let mode: PredictMode = mode.parse()?;
            let state = graph.recommend(mode)?;
            println!("{state}");
        }
        PredictQuery::EventSet { set } => {
            let target: EventSet = set.parse()?;
            let p = graph.event_set_probability(&target)?;
            println!("{target}\t{p:.6}");
        }
        PredictQuery::Nstep { from, to, steps } => {
            let u: EventSet = from.parse()?;
            let v: EventSet = to.parse()?;
            let p = graph.n_step_transition(&u, &v, steps)?;
            println!("{u} -> {v} in {steps}\t{p:.6}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Input event-stream CSV.
    #[arg(long)]
    pub events: PathBuf,
    /// Engine under evaluation (stepwise | pm).
    #[arg(long, default_value = "stepwise")]
    pub engine: String,
    /// Bound values, comma-separated.
    #[arg(long, default_value = "3")]
    pub k: String,
    /// Horizons, comma-separated.
    #[arg(long, default_value = "1")]
    pub h: String,
    /// Orders for the pm engine, comma-separated.
    #[arg(long, default_value = "1")]
    pub m: String,
    /// Lookahead for the pm engine.
    #[arg(long, default_value_t = 1)]
    pub lookahead: usize,
    /// Cut-off threshold for the pm engine.
    #[arg(long, default_value_t = 0.0)]
    pub pthr: f64,
    /// Root seed (drives the random bound policy).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Oversized-state reduction (random | lowest-index).
    #[arg(long, default_value = "random")]
    pub bound_policy: String,
    /// Stepwise recommendation mode (from-current | marginal).
    #[arg(long, default_value = "from-current")]
    pub predict_mode: String,
    /// Leading steps observed but not scored.
    #[arg(long, default_value_t = 0)]
    pub eval_warmup: u64,
    /// Output report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-step cumulative score trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

pub fn experiment_config(args: &EvaluateArgs) -> Result<ExperimentConfig> {
    let engine: EngineKind = args.engine.parse()?;
    let bound_random = match args.bound_policy.as_str() {
        "random" => true,
        "lowest-index" => false,
        other => bail!(Error::InvalidParameter(format!(
            "unknown bound policy `{other}`"
        ))),
    };
    Ok(ExperimentConfig {
        engine,
        grid: GridSpec {
            max_combo_k: parse_list(&args.k, "k")?,
            horizons: parse_list(&args.h, "h")?,
            orders: parse_list(&args.m, "m")?,
        },
        seed: args.seed,
        bound_random,
        predict_mode: args.predict_mode.parse()?,
        lookahead: args.lookahead,
        p_thr: args.pthr,
        eval_warmup: args.eval_warmup,
    })
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = experiment_config(&args)?;
    let bytes =
        fs::read(&args.events).with_context(|| format!("reading {}", args.events.display()))?;
    let (events, _names) = read_event_csv(bytes.as_slice())?;
    let report = run_experiment(&events, &cfg)?;
    let mut buf = Vec::new();
    write_report_csv(&mut buf, &report.rows)?;
    write_atomic(&args.out, &buf)?;
    if let Some(trace_path) = &args.trace {
        let mut tbuf = Vec::new();
        write_trace_csv(&mut tbuf, &report.traces)?;
        write_atomic(trace_path, &tbuf)?;
    }
    println!(
        "evaluated {} grid cells over {} steps -> {} (fn-rule: covered-miss, bound: {}, mode: {})",
        report.rows.len(),
        events.len(),
        args.out.display(),
        args.bound_policy,
        args.predict_mode,
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Input context CSV (raw numeric streams).
    #[arg(long)]
    pub input: PathBuf,
    /// Largest autocorrelation lag.
    #[arg(long, default_value_t = 20)]
    pub max_lag: usize,
    /// Name of the timestamp column, excluded from diagnostics.
    #[arg(long, default_value = "timestamp")]
    pub timestamp_column: String,
    /// Output CSV (one row per stream).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn diagnostics_csv(
    vectors: &[ContextVector],
    schema: &StreamSchema,
    max_lag: usize,
) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "stream".to_string(),
        "status".to_string(),
        "hurst".to_string(),
        "clamped".to_string(),
        "windows".to_string(),
    ];
    header.extend((0..=max_lag).map(|k| format!("acf_{k}")));
    header.extend((1..=max_lag).map(|k| format!("pacf_{k}")));
    w.write_record(&header)?;
    for (i, name) in schema.names().iter().enumerate() {
        let series: Vec<f64> = vectors.iter().map(|cv| cv.values[i]).collect();
        let mut rec = vec![name.clone()];
        match diagnostics::diagnose_series(&series, max_lag) {
            Ok(d) => {
                rec.push("ok".into());
                rec.push(format!("{:.6}", d.hurst.h));
                rec.push(d.hurst.clamped.to_string());
                rec.push(d.hurst.window_sizes.len().to_string());
                rec.extend(d.acf.iter().map(|v| format!("{v:.6}")));
                rec.extend(d.pacf.iter().map(|v| format!("{v:.6}")));
            }
            Err(e) => {
                let status = match e {
                    Error::ZeroRange | Error::ZeroVariance => "constant".to_string(),
                    Error::InvalidParameter(_) => "too-short".to_string(),
                    other => return Err(other.into()),
                };
                rec.push(status);
                rec.resize(header.len(), String::new());
            }
        }
        w.write_record(&rec)?;
    }
    w.into_inner().context("flushing diagnostics csv")
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let bytes =
        fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let schema = ingest::schema_from_csv_header(bytes.as_slice(), &args.timestamp_column)?;
    let parsed = parse_context_stream(
        bytes.as_slice(),
        &schema,
        StreamFormat::Csv,
        ErrorPolicy::Abort,
    )?;
    let out = diagnostics_csv(&parsed.vectors, &schema, args.max_lag)?;
    write_atomic(&args.out, &out)?;
    println!(
        "diagnosed {} streams over {} steps -> {}",
        schema.n(),
        parsed.vectors.len(),
        args.out.display()
    );
    Ok(())
}
