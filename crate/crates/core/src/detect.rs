//! Online Shewhart control charts: one univariate detector per stream.
//!
//! Each detector keeps an incremental mean and population standard deviation
//! and flags samples falling outside `mean ± tightness·std`. Out-of-control
//! samples are still absorbed into the running statistics, so the limits
//! keep adapting; there is no reset on detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventVector;
use crate::ingest::ContextVector;

/// Incremental mean / population standard deviation.
///
/// The update is the product form of Welford's recurrence:
/// `var_t = ((t-1)·var_{t-1} + (x - mean_t)(x - mean_{t-1})) / t`,
/// which reproduces the batch population variance exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    var: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Samples absorbed so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation (1/t normalization); zero at t <= 1.
    pub fn std(&self) -> f64 {
        self.var.max(0.0).sqrt()
    }

    /// Absorb one sample.
    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!(
                "sample {x} rejected by running statistics"
            )));
        }
        self.count += 1;
        let old_mean = self.mean;
        self.mean += (x - old_mean) / self.count as f64;
        self.var = ((self.count - 1) as f64 * self.var + (x - self.mean) * (x - old_mean))
            / self.count as f64;
        Ok(())
    }
}

/// Which limits a sample is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// Test x against the limits from the previous step, then update.
    /// Default: the tested sample does not dampen its own detection.
    BeforeUpdate,
    /// Update first, then test x against the fresh limits. The classic
    /// textbook recurrence order (CLI name `literal`); large excursions
    /// inflate the limits enough to mask themselves when tightness^2
    /// exceeds the sample count.
    AfterUpdate,
}

impl CompareMode {
    pub fn label(&self) -> &'static str {
        match self {
            CompareMode::BeforeUpdate => "before",
            CompareMode::AfterUpdate => "literal",
        }
    }
}

impl std::str::FromStr for CompareMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before" | "compare-before-update" => Ok(CompareMode::BeforeUpdate),
            "literal" | "after-update" => Ok(CompareMode::AfterUpdate),
            other => Err(Error::InvalidParameter(format!(
                "unknown compare mode `{other}`"
            ))),
        }
    }
}

/// Shewhart chart state for one stream.
#[derive(Debug, Clone)]
pub struct ShewhartDetector {
    stats: RunningStats,
    tightness: f64,
    warmup: u64,
    mode: CompareMode,
    ucl: f64,
    lcl: f64,
}

impl ShewhartDetector {
    /// `tightness` is the control-limit multiplier k; `warmup` the minimum
    /// number of samples before any signal (the chart flags nearly
    /// everything while std is still near zero).
    pub fn new(tightness: f64, warmup: u64, mode: CompareMode) -> Result<Self> {
        if !(tightness.is_finite() && tightness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tightness must be positive, got {tightness}"
            )));
        }
        if warmup == 0 {
            return Err(Error::InvalidParameter(
                "warmup must be a positive integer".into(),
            ));
        }
        Ok(Self {
            stats: RunningStats::new(),
            tightness,
            warmup,
            mode,
            ucl: 0.0,
            lcl: 0.0,
        })
    }

    pub fn stats(&self) -> &RunningStats {
        &self.stats
    }

    pub fn ucl(&self) -> f64 {
        self.ucl
    }

    pub fn lcl(&self) -> f64 {
        self.lcl
    }

    pub fn tightness(&self) -> f64 {
        self.tightness
    }

    /// Absorb one sample and return the detection signal.
    pub fn step(&mut self, x: f64) -> Result<bool> {
        let (prev_ucl, prev_lcl) = (self.ucl, self.lcl);
        self.stats.update(x)?;
        self.ucl = self.stats.mean() + self.tightness * self.stats.std();
        self.lcl = self.stats.mean() - self.tightness * self.stats.std();
        if self.stats.count() <= self.warmup {
            return Ok(false);
        }
        let (ucl, lcl) = match self.mode {
            CompareMode::BeforeUpdate => (prev_ucl, prev_lcl),
            CompareMode::AfterUpdate => (self.ucl, self.lcl),
        };
        Ok(x > ucl || x < lcl)
    }
}

/// One detector per stream, applied component-wise to context vectors.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    detectors: Vec<ShewhartDetector>,
}

impl DetectorBank {
    pub fn new(n: usize, tightness: f64, warmup: u64, mode: CompareMode) -> Result<Self> {
        let proto = ShewhartDetector::new(tightness, warmup, mode)?;
        Ok(Self {
            detectors: vec![proto; n],
        })
    }

    pub fn len(&self) -> usize {
        self.detectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty()
    }

    pub fn detector(&self, i: usize) -> Option<&ShewhartDetector> {
        self.detectors.get(i)
    }

    /// Advance every detector with the matching component of `cv`.
    pub fn detect(&mut self, cv: &ContextVector) -> Result<EventVector> {
        if cv.values.len() != self.detectors.len() {
            return Err(Error::LengthMismatch {
                expected: self.detectors.len(),
                found: cv.values.len(),
            });
        }
        let mut bits = Vec::with_capacity(self.detectors.len());
        for (det, x) in self.detectors.iter_mut().zip(&cv.values) {
            bits.push(det.step(*x)?);
        }
        Ok(EventVector::new(cv.t, bits))
    }

    /// Run a whole context stream through the bank.
    pub fn detect_all(&mut self, stream: &[ContextVector]) -> Result<Vec<EventVector>> {
        stream.iter().map(|cv| self.detect(cv)).collect()
    }
}
