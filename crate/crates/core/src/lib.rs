//! Online event analytics over multivariate numeric streams.
//!
//! The pipeline: synchronized context vectors are turned into binary event
//! vectors by per-stream Shewhart control charts, encoded as canonical
//! event-set states, correlated step-by-step in an incrementally updated
//! first-order Markov graph, and forecast quality is scored against a
//! variable-order partial-matching baseline. Self-similarity diagnostics
//! (Hurst exponent, acf/pacf) explain how predictable each stream is, and a
//! seeded generator produces synthetic streams with ground-truth change
//! points.
//!
//! ```
//! use stepcorr::detect::{CompareMode, DetectorBank};
//! use stepcorr::event::{bound_state, encode_state, BoundPolicy};
//! use stepcorr::graph::{CorrelationGraph, PredictMode};
//! use stepcorr::ingest::ContextVector;
//!
//! // stream 1 spikes on odd steps, stream 2 on even steps (signs alternate
//! // so the running limits stay centered)
//! let mut bank = DetectorBank::new(2, 1.0, 4, CompareMode::BeforeUpdate)?;
//! let mut graph = CorrelationGraph::new(2);
//! for t in 1..=40u64 {
//!     let spike = if t % 4 == 1 || t % 4 == 2 { 8.0 } else { -8.0 };
//!     let values = if t % 2 == 1 { vec![spike, 0.0] } else { vec![0.0, spike] };
//!     let ev = bank.detect(&ContextVector::new(t, values))?;
//!     let state = bound_state(&encode_state(&ev), 2, &BoundPolicy::LowestIndex, t);
//!     graph.observe(state);
//! }
//! // the detected states alternate {1},{2},{1},{2},... after warm-up
//! assert_eq!(graph.recommend(PredictMode::FromCurrent)?.to_string(), "{1}");
//! let one = "{1}".parse()?;
//! assert_eq!(graph.n_step_transition(&one, &one, 2)?, 1.0);
//! # Ok::<(), stepcorr::Error>(())
//! ```

pub mod detect;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod event;
pub mod generator;
pub mod graph;
pub mod ingest;
pub mod pm;
pub mod seed;

pub use detect::{CompareMode, DetectorBank, RunningStats, ShewhartDetector};
pub use error::{Error, Result};
pub use eval::{
    run_engine, run_experiment, EngineKind, ExperimentConfig, ExperimentReport, Forecaster,
    GridSpec, PartialMatchForecaster, PredictionRecord, ReportRow, Scorer, StepwiseForecaster,
    Tally,
};
pub use event::{
    bound_state, count_bounded_states, decode_state, encode_state, BoundPolicy, EventSet,
    EventTypeCatalog, EventVector,
};
pub use generator::{generate_stream, BaseProcess, ChangeEvent, ChangeKind, GeneratorSpec};
pub use graph::{CorrelationGraph, PredictMode, StateDistribution, TransitionSnapshot};
pub use ingest::{
    align_streams, parse_context_stream, AlignPolicy, ContextVector, ErrorPolicy, StreamFormat,
    StreamSchema,
};
pub use pm::{HistoryTrie, PmConfig, PmPrediction};
