//! Per-step forecast validation: precision and recall under exact-match
//! semantics within a bounded horizon.
//!
//! Each step the engine issues one recommended next state. A prediction made
//! at step t counts as a true positive when the exact predicted state occurs
//! at some step in (t, t+h]; the earliest matching pending record resolves.
//! Records passing the horizon unresolved become false positives. A false
//! negative is charged at a step whose actual state differs from every
//! pending prediction covering it (steps covered by no window, e.g. during
//! engine warm-up, are not charged).

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{bound_state, encode_state, BoundPolicy, EventSet, EventVector};
use crate::graph::{CorrelationGraph, PredictMode};
use crate::pm::{HistoryTrie, PmConfig};
use crate::seed;

/// TP/FP/FN bookkeeping; counters only ever grow.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl Tally {
    /// TP / (TP + FP); absent when nothing resolved.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_pos;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    /// TP / (TP + FN); absent when the denominator is zero.
    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_neg;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }
}

/// A recommendation awaiting resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub issued_at: u64,
    pub predicted: EventSet,
}

/// Cumulative score after one validation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepScore {
    pub t: u64,
    pub tally: Tally,
}

/// Sliding validator for one (engine, horizon) run.
#[derive(Debug, Clone)]
pub struct Scorer {
    horizon: u64,
    pending: VecDeque<PredictionRecord>,
    tally: Tally,
    trace: Vec<StepScore>,
}

impl Scorer {
    pub fn new(horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        Ok(Self {
            horizon,
            pending: VecDeque::new(),
            tally: Tally::default(),
            trace: Vec::new(),
        })
    }

    pub fn tally(&self) -> Tally {
        self.tally
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn step_trace(&self) -> &[StepScore] {
        &self.trace
    }

    /// Record a recommendation issued at step t (valid within (t, t+h]).
    pub fn issue(&mut self, predicted: EventSet, t: u64) {
        self.pending.push_back(PredictionRecord {
            issued_at: t,
            predicted,
        });
    }

    /// Resolve pending records against the actual state of step t.
    pub fn validate_step(&mut self, actual: &EventSet, t: u64) {
        // earliest pending record covering t with an exact match resolves tp
        let mut matched = None;
        let mut covered = false;
        for (i, rec) in self.pending.iter().enumerate() {
            if rec.issued_at < t && t <= rec.issued_at + self.horizon {
                covered = true;
                if rec.predicted == *actual {
                    matched = Some(i);
                    break;
                }
            }
        }
        if let Some(i) = matched {
            self.pending.remove(i);
            self.tally.true_pos += 1;
        } else if covered {
            // the actual state was covered by some window but predicted by none
            self.tally.false_neg += 1;
        }
        // records whose window closed at t expire as false positives
        while let Some(front) = self.pending.front() {
            if front.issued_at + self.horizon <= t {
                self.pending.pop_front();
                self.tally.false_pos += 1;
            } else {
                break;
            }
        }
        self.trace.push(StepScore {
            t,
            tally: self.tally,
        });
    }
}

/// A per-step recommender: observe the bounded state, then optionally emit a
/// prediction for the next step(s).
pub trait Forecaster {
    fn observe(&mut self, state: &EventSet);
    /// None while the model cannot recommend (warm-up, undefined rows).
    fn recommend(&self) -> Option<EventSet>;
    fn label(&self) -> &'static str;
}

/// First-order stepwise engine backed by the correlation graph.
#[derive(Debug, Clone)]
pub struct StepwiseForecaster {
    graph: CorrelationGraph,
    mode: PredictMode,
}

impl StepwiseForecaster {
    pub fn new(n: u16, mode: PredictMode) -> Self {
        Self {
            graph: CorrelationGraph::new(n),
            mode,
        }
    }

    pub fn graph(&self) -> &CorrelationGraph {
        &self.graph
    }
}

impl Forecaster for StepwiseForecaster {
    fn observe(&mut self, state: &EventSet) {
        self.graph.observe(state.clone());
    }

    fn recommend(&self) -> Option<EventSet> {
        self.graph.recommend(self.mode).ok()
    }

    fn label(&self) -> &'static str {
        "stepwise"
    }
}

/// Variable-order partial-matching engine.
#[derive(Debug, Clone)]
pub struct PartialMatchForecaster {
    trie: HistoryTrie,
}

impl PartialMatchForecaster {
    pub fn new(config: PmConfig) -> Self {
        Self {
            trie: HistoryTrie::new(config),
        }
    }

    pub fn trie(&self) -> &HistoryTrie {
        &self.trie
    }
}

impl Forecaster for PartialMatchForecaster {
    fn observe(&mut self, state: &EventSet) {
        self.trie.observe(state.clone());
    }

    fn recommend(&self) -> Option<EventSet> {
        self.trie.recommend()
    }

    fn label(&self) -> &'static str {
        "pm"
    }
}

/// Which engine an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Stepwise,
    Pm,
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stepwise" => Ok(EngineKind::Stepwise),
            "pm" | "partial-matching" => Ok(EngineKind::Pm),
            other => Err(Error::InvalidParameter(format!("unknown engine `{other}`"))),
        }
    }
}

/// Parameter grid: bound k values, horizons, and (pm only) orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub max_combo_k: Vec<usize>,
    pub horizons: Vec<u64>,
    pub orders: Vec<usize>,
}

/// Full experiment configuration; everything an experiment needs to be
/// reproduced besides the event stream itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub engine: EngineKind,
    pub grid: GridSpec,
    pub seed: u64,
    pub bound_random: bool,
    pub predict_mode: PredictMode,
    pub lookahead: usize,
    pub p_thr: f64,
    /// Steps at the head of the trace observed but not scored.
    pub eval_warmup: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            engine: EngineKind::Stepwise,
            grid: GridSpec {
                max_combo_k: vec![3],
                horizons: vec![1],
                orders: vec![1],
            },
            seed: 0,
            bound_random: true,
            predict_mode: PredictMode::FromCurrent,
            lookahead: 1,
            p_thr: 0.0,
            eval_warmup: 0,
        }
    }
}

/// One report row: a single grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub engine: String,
    pub k: usize,
    pub h: u64,
    pub m: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub steps: u64,
    pub skipped: u64,
    pub tally: Tally,
}

/// Experiment output: rows plus per-step score traces keyed like the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub traces: Vec<(String, Vec<StepScore>)>,
}

/// Outcome of streaming one engine over one bounded trace.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub tally: Tally,
    pub steps: u64,
    pub skipped: u64,
    pub trace: Vec<StepScore>,
}

/// Stream a bounded state trace through an engine with the given horizon.
///
/// Per step: validate pending records against the actual state, let the
/// engine observe it, then issue its recommendation (skipped steps counted).
/// Records still pending at the end of the trace are discarded unscored.
pub fn run_engine(
    states: &[EventSet],
    engine: &mut dyn Forecaster,
    horizon: u64,
    eval_warmup: u64,
) -> Result<RunOutcome> {
    let mut scorer = Scorer::new(horizon)?;
    let mut skipped = 0u64;
    for (i, actual) in states.iter().enumerate() {
        let t = (i + 1) as u64;
        scorer.validate_step(actual, t);
        engine.observe(actual);
        if t <= eval_warmup {
            continue;
        }
        match engine.recommend() {
            Some(predicted) => scorer.issue(predicted, t),
            None => skipped += 1,
        }
    }
    Ok(RunOutcome {
        tally: scorer.tally(),
        steps: states.len() as u64,
        skipped,
        trace: scorer.step_trace().to_vec(),
    })
}

/// Bound every raw event vector to at most k events.
///
/// The random policy derives its per-step randomness from (seed, k, step) so
/// both engines see the identical bounded trace for a given k.
pub fn bound_trace(events: &[EventVector], k: usize, seed: u64, random: bool) -> Vec<EventSet> {
    let policy = if random {
        BoundPolicy::Random {
            seed: seed::mix2(seed::derive(seed, "bound"), k as u64),
        }
    } else {
        BoundPolicy::LowestIndex
    };
    events
        .iter()
        .map(|ev| {
            let s = encode_state(ev);
            bound_state(&s, k, &policy, ev.t)
        })
        .collect()
}

/// Run the full grid for one engine over a raw event stream.
pub fn run_experiment(events: &[EventVector], cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if events.is_empty() {
        return Err(Error::InvalidParameter("event stream is empty".into()));
    }
    let n = events[0].bits.len() as u16;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &k in &cfg.grid.max_combo_k {
        if k == 0 {
            return Err(Error::InvalidParameter("max_combo_k must be >= 1".into()));
        }
        let states = bound_trace(events, k, cfg.seed, cfg.bound_random);
        for &h in &cfg.grid.horizons {
            // stepwise runs once per (k, h); pm fans out over the orders
            let cells: Vec<Option<usize>> = match cfg.engine {
                EngineKind::Stepwise => vec![None],
                EngineKind::Pm => cfg.grid.orders.iter().map(|m| Some(*m)).collect(),
            };
            for m in cells {
                let mut engine: Box<dyn Forecaster> = match m {
                    None => Box::new(StepwiseForecaster::new(n, cfg.predict_mode)),
                    Some(m) => Box::new(PartialMatchForecaster::new(PmConfig::new(
                        m,
                        cfg.lookahead,
                        cfg.p_thr,
                    )?)),
                };
                let out = run_engine(&states, engine.as_mut(), h, cfg.eval_warmup)?;
                let label = engine.label();
                let key = match m {
                    None => format!("{label},k={k},h={h}"),
                    Some(m) => format!("{label},k={k},h={h},m={m}"),
                };
                rows.push(ReportRow {
                    engine: label.to_string(),
                    k,
                    h,
                    m,
                    precision: out.tally.precision(),
                    recall: out.tally.recall(),
                    steps: out.steps,
                    skipped: out.skipped,
                    tally: out.tally,
                });
                traces.push((key, out.trace));
            }
        }
    }
    Ok(ExperimentReport { rows, traces })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Write the grid report CSV: one row per grid cell.
pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "engine",
        "k",
        "h",
        "m",
        "precision",
        "recall",
        "steps",
        "skipped",
        "tp",
        "fp",
        "fn",
    ])?;
    for r in rows {
        w.write_record([
            r.engine.clone(),
            r.k.to_string(),
            r.h.to_string(),
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            fmt_opt(r.precision),
            fmt_opt(r.recall),
            r.steps.to_string(),
            r.skipped.to_string(),
            r.tally.true_pos.to_string(),
            r.tally.false_pos.to_string(),
            r.tally.false_neg.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write per-step cumulative score traces.
pub fn write_trace_csv<W: Write>(out: W, traces: &[(String, Vec<StepScore>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "step", "tp", "fp", "fn", "precision", "recall"])?;
    for (key, steps) in traces {
        for s in steps {
            w.write_record([
                key.clone(),
                s.t.to_string(),
                s.tally.true_pos.to_string(),
                s.tally.false_pos.to_string(),
                s.tally.false_neg.to_string(),
                fmt_opt(s.tally.precision()),
                fmt_opt(s.tally.recall()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
