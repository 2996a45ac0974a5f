//! Seeded synthetic multivariate stream generator with injected changes and
//! a ground-truth log for detector benchmarking.
//!
//! Per-stream randomness is derived from the root seed and the stream index,
//! so output is byte-identical for a given spec regardless of evaluation
//! order. Shift magnitudes are expressed in units of the stream's own sigma
//! (stationary sigma for ar1, 1.0 for the deterministic processes), keeping
//! detectability tightness-relative.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::MAX_STREAMS;
use crate::ingest::ContextVector;
use crate::seed;

/// Base process of one stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BaseProcess {
    Constant {
        #[serde(default)]
        value: f64,
    },
    WhiteNoise {
        mean: f64,
        std: f64,
    },
    Ar1 {
        phi: f64,
        std: f64,
    },
    Ramp {
        slope: f64,
    },
}

impl BaseProcess {
    /// Sigma used to scale shift magnitudes.
    fn nominal_sigma(&self) -> f64 {
        match self {
            BaseProcess::Constant { .. } | BaseProcess::Ramp { .. } => 1.0,
            BaseProcess::WhiteNoise { std, .. } => *std,
            BaseProcess::Ar1 { phi, std } => std / (1.0 - phi * phi).sqrt(),
        }
    }
}

/// Shape of an injected change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeKind {
    /// One-step excursion.
    #[default]
    Spike,
    /// Persistent level shift from the step onward.
    Level,
}

fn default_recurring() -> bool {
    true
}

/// One injected change: `magnitude` is in units of each target stream's
/// sigma. With `repeat_period` set, recurring events fire again every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub step: u64,
    pub streams: Vec<u16>,
    pub magnitude: f64,
    #[serde(default)]
    pub kind: ChangeKind,
    #[serde(default = "default_recurring")]
    pub recurring: bool,
}

/// Full generator specification; mirrors the JSON spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: u16,
    pub length: u64,
    pub seed: u64,
    pub streams: Vec<BaseProcess>,
    #[serde(default)]
    pub changes: Vec<ChangeEvent>,
    #[serde(default)]
    pub repeat_period: Option<u64>,
}

impl GeneratorSpec {
    /// Collect every violation rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n == 0 || usize::from(self.n) > MAX_STREAMS {
            problems.push(format!("n must lie in 1..={MAX_STREAMS}, got {}", self.n));
        }
        if self.length == 0 {
            problems.push("length must be >= 1".into());
        }
        if self.streams.len() != usize::from(self.n) {
            problems.push(format!(
                "streams lists {} processes but n = {}",
                self.streams.len(),
                self.n
            ));
        }
        for (i, p) in self.streams.iter().enumerate() {
            match p {
                BaseProcess::WhiteNoise { std, .. } if *std <= 0.0 => {
                    problems.push(format!("stream {}: white-noise std must be > 0", i + 1));
                }
                BaseProcess::Ar1 { phi, std } => {
                    if *std <= 0.0 {
                        problems.push(format!("stream {}: ar1 std must be > 0", i + 1));
                    }
                    if phi.abs() >= 1.0 {
                        problems.push(format!("stream {}: ar1 needs |phi| < 1", i + 1));
                    }
                }
                _ => {}
            }
        }
        for (i, c) in self.changes.iter().enumerate() {
            if c.step == 0 || c.step > self.length {
                problems.push(format!(
                    "change {}: step {} outside 1..={}",
                    i + 1,
                    c.step,
                    self.length
                ));
            }
            if c.streams.is_empty() {
                problems.push(format!("change {}: empty stream subset", i + 1));
            }
            for s in &c.streams {
                if *s == 0 || *s > self.n {
                    problems.push(format!(
                        "change {}: stream {s} outside 1..={}",
                        i + 1,
                        self.n
                    ));
                }
            }
        }
        if self.repeat_period == Some(0) {
            problems.push("repeat_period must be >= 1 when present".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems.join("; ")))
        }
    }
}

/// One injected change occurrence, for benchmarking detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub step: u64,
    pub stream: u16,
}

/// Generated streams plus the injected-change log.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub vectors: Vec<ContextVector>,
    pub truth: Vec<GroundTruthEntry>,
}

/// Generate the context-vector stream described by `spec`.
pub fn generate_stream(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let n = usize::from(spec.n);
    let t_max = spec.length;

    // base signal per stream
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, process) in spec.streams.iter().enumerate() {
        let mut rng = seed::rng(seed::mix2(seed::derive(spec.seed, "stream"), i as u64));
        let mut column = Vec::with_capacity(t_max as usize);
        match process {
            BaseProcess::Constant { value } => column.resize(t_max as usize, *value),
            BaseProcess::WhiteNoise { mean, std } => {
                for _ in 0..t_max {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    column.push(mean + std * e);
                }
            }
            BaseProcess::Ar1 { phi, std } => {
                let mut x = 0.0f64;
                for _ in 0..t_max {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x = phi * x + std * e;
                    column.push(x);
                }
            }
            BaseProcess::Ramp { slope } => {
                for t in 1..=t_max {
                    column.push(slope * t as f64);
                }
            }
        }
        columns.push(column);
    }

    // expand change occurrences (recurrences included) and apply them
    let mut truth = Vec::new();
    for change in &spec.changes {
        let mut occurrence_steps = vec![change.step];
        if change.recurring {
            if let Some(period) = spec.repeat_period {
                let mut s = change.step + period;
                while s <= t_max {
                    occurrence_steps.push(s);
                    s += period;
                }
            }
        }
        for step in occurrence_steps {
            for stream in &change.streams {
                let col = usize::from(*stream) - 1;
                let sigma = spec.streams[col].nominal_sigma();
                let shift = change.magnitude * sigma;
                match change.kind {
                    ChangeKind::Spike => columns[col][step as usize - 1] += shift,
                    ChangeKind::Level => {
                        for cell in &mut columns[col][step as usize - 1..] {
                            *cell += shift;
                        }
                    }
                }
                truth.push(GroundTruthEntry {
                    step,
                    stream: *stream,
                });
            }
        }
    }
    truth.sort();
    truth.dedup();

    let vectors = (1..=t_max)
        .map(|t| {
            let values = columns.iter().map(|c| c[t as usize - 1]).collect();
            ContextVector::new(t, values)
        })
        .collect();
    Ok(Generated { vectors, truth })
}
