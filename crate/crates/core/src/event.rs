//! Event vectors, canonical event-set states, and the bounded-k state policy.
//!
//! A detector bank turns each context vector into a binary event vector; the
//! set-of-indices encoding of that vector is the state fed to the correlation
//! engines. States are canonical sorted index lists (1-based), the empty set
//! being a first-class "no events" state.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Hard engine limit on the stream count; event sets fit fixed-width
/// encodings below this bound.
pub const MAX_STREAMS: usize = 1024;

/// One event type per stream; names mirror the stream schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTypeCatalog {
    types: Vec<String>,
}

impl EventTypeCatalog {
    pub fn new(types: Vec<String>) -> Result<Self> {
        if types.is_empty() || types.len() > MAX_STREAMS {
            return Err(Error::Schema(format!(
                "event catalog must hold between 1 and {MAX_STREAMS} types, got {}",
                types.len()
            )));
        }
        let unique: BTreeSet<&String> = types.iter().collect();
        if unique.len() != types.len() || types.iter().any(|t| t.is_empty()) {
            return Err(Error::Schema(
                "event type names must be unique and non-empty".into(),
            ));
        }
        Ok(Self { types })
    }

    /// One event type per stream, named after it.
    pub fn from_schema(schema: &crate::ingest::StreamSchema) -> Self {
        // schema names are already validated as unique and non-empty
        Self { types: schema.names().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Name of event type `index` (1-based).
    pub fn name(&self, index: u16) -> Option<&str> {
        self.types
            .get(usize::from(index).checked_sub(1)?)
            .map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.types
    }
}

/// Binary event vector at one step: bit i marks a deviation on stream i+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventVector {
    pub t: u64,
    pub bits: Vec<bool>,
}

impl EventVector {
    pub fn new(t: u64, bits: Vec<bool>) -> Self {
        Self { t, bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Canonical event-set state: strictly increasing 1-based event-type indices.
///
/// The derived `Ord` is lexicographic on the sorted index list, so the empty
/// set sorts first; that order is the tie-break used by `recommend`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSet(Vec<u16>);

impl EventSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Canonicalize an arbitrary index list (sort + dedup).
    pub fn new(mut members: Vec<u16>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self(members)
    }

    /// Build from an already sorted, deduplicated list.
    pub fn from_sorted(members: Vec<u16>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "event set members must be strictly increasing".into(),
            ));
        }
        Ok(Self(members))
    }

    pub fn members(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: u16) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn is_superset_of(&self, other: &EventSet) -> bool {
        other.0.iter().all(|m| self.contains(*m))
    }

    /// Largest member, if any; members are bounded by the schema width n.
    pub fn max_member(&self) -> Option<u16> {
        self.0.last().copied()
    }

    /// Expand back into a binary vector of width `n`.
    pub fn to_bits(&self, n: usize) -> Vec<bool> {
        let mut bits = vec![false; n];
        for m in &self.0 {
            let i = usize::from(*m);
            if i >= 1 && i <= n {
                bits[i - 1] = true;
            }
        }
        bits
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

impl FromStr for EventSet {
    type Err = Error;

    /// Accepts `{1,3}`, `1,3`, `{}`, or an empty string.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        if inner.trim().is_empty() {
            return Ok(Self::empty());
        }
        let mut members = Vec::new();
        for part in inner.split(',') {
            let idx: u16 = part.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("bad event-set member `{part}` in `{s}`"))
            })?;
            if idx == 0 {
                return Err(Error::InvalidParameter(
                    "event-set members are 1-based".into(),
                ));
            }
            members.push(idx);
        }
        Ok(Self::new(members))
    }
}

/// Set-of-indices encoding of a binary event vector.
pub fn encode_state(ev: &EventVector) -> EventSet {
    let members = ev
        .bits
        .iter()
        .enumerate()
        .filter(|(_, b)| **b)
        .map(|(i, _)| (i + 1) as u16)
        .collect();
    // enumerate yields increasing indices, already canonical
    EventSet(members)
}

/// Inverse of [`encode_state`] for a given width.
pub fn decode_state(set: &EventSet, t: u64, n: usize) -> EventVector {
    EventVector::new(t, set.to_bits(n))
}

/// Subset-selection policy applied when a state exceeds the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum BoundPolicy {
    /// Keep the `max_combo_k` smallest indices.
    LowestIndex,
    /// Uniform subset without replacement, deterministic given (seed, step).
    Random { seed: u64 },
}

impl BoundPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            BoundPolicy::LowestIndex => "lowest-index",
            BoundPolicy::Random { .. } => "random",
        }
    }
}

/// Reduce a state to at most `max_combo_k` events.
///
/// States within the bound pass through unchanged. Oversized states are
/// subset-reduced by the policy; the random policy draws uniformly among all
/// size-k subsets and is reproducible from (seed, step).
pub fn bound_state(s: &EventSet, max_combo_k: usize, policy: &BoundPolicy, step: u64) -> EventSet {
    assert!(max_combo_k >= 1, "max_combo_k must be positive");
    if s.len() <= max_combo_k {
        return s.clone();
    }
    match policy {
        BoundPolicy::LowestIndex => EventSet(s.0[..max_combo_k].to_vec()),
        BoundPolicy::Random { seed } => {
            let mut rng = seed::rng(seed::mix2(*seed, step));
            let mut pool = s.0.clone();
            pool.shuffle(&mut rng);
            pool.truncate(max_combo_k);
            EventSet::new(pool)
        }
    }
}

/// Number of states with at most `max_combo_k` concurrent events:
/// sum of C(n, i) for i = 0..=k. k = 0 counts only the empty state.
/// Errors on u128 overflow.
pub fn count_bounded_states(n: u64, max_combo_k: u64) -> Result<u128> {
    if max_combo_k > n || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "require 0 <= k <= n and n >= 1, got n={n} k={max_combo_k}"
        )));
    }
    let mut total: u128 = 1; // C(n, 0)
    let mut binom: u128 = 1;
    for i in 1..=max_combo_k {
        // C(n, i) = C(n, i-1) * (n - i + 1) / i, exact at every step
        binom = binom
            .checked_mul(u128::from(n - i + 1))
            .ok_or_else(|| Error::Overflow(format!("C({n},{i}) exceeds u128")))?
            / u128::from(i);
        total = total
            .checked_add(binom)
            .ok_or_else(|| Error::Overflow(format!("state count overflows u128 at i={i}")))?;
    }
    Ok(total)
}

/// Write an event-stream CSV: `step,<name1>,...,<nameN>` with 0/1 cells.
pub fn write_event_csv<W: Write>(out: W, events: &[EventVector], names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for ev in events {
        if ev.bits.len() != names.len() {
            return Err(Error::LengthMismatch {
                expected: names.len(),
                found: ev.bits.len(),
            });
        }
        let mut rec = vec![ev.t.to_string()];
        rec.extend(
            ev.bits
                .iter()
                .map(|b| if *b { "1".to_string() } else { "0".to_string() }),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read an event-stream CSV produced by [`write_event_csv`].
pub fn read_event_csv<R: Read>(input: R) -> Result<(Vec<EventVector>, Vec<String>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.is_empty() || &header[0] != "step" {
        return Err(Error::Schema(
            "event CSV must start with a `step` column".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Schema("event CSV has no stream columns".into()));
    }
    let mut events = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = (i + 2) as u64;
        if row.len() != names.len() + 1 {
            return Err(Error::Parse {
                line,
                reason: format!("expected {} cells, found {}", names.len() + 1, row.len()),
            });
        }
        let t: u64 = row[0].parse().map_err(|_| Error::Parse {
            line,
            reason: format!("bad step index `{}`", &row[0]),
        })?;
        let mut bits = Vec::with_capacity(names.len());
        for cell in row.iter().skip(1) {
            match cell.trim() {
                "0" => bits.push(false),
                "1" => bits.push(true),
                other => {
                    return Err(Error::Parse {
                        line,
                        reason: format!("event cell must be 0 or 1, found `{other}`"),
                    })
                }
            }
        }
        events.push(EventVector::new(t, bits));
    }
    Ok((events, names))
}
