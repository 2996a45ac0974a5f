//! First-order Markov correlation graph over event-set states.
//!
//! The graph keeps sparse node and edge occurrence counts, updated online as
//! bounded states arrive. Probabilities are computed as exact integer-count
//! ratios at query time, so normalization identities hold to rounding and no
//! float drift accumulates.
//!
//! Denominator convention: at time t the current state has one more node
//! occurrence than outgoing edges, so conditionals divide by the count of the
//! source state over steps 1..t-1 (node count minus one when the source is
//! the current state). This keeps every defined row summing to exactly 1.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventSet;

/// Sparse next-step distribution over observed states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    probs: BTreeMap<EventSet, f64>,
}

impl StateDistribution {
    pub fn probs(&self) -> &BTreeMap<EventSet, f64> {
        &self.probs
    }

    pub fn get(&self, state: &EventSet) -> f64 {
        self.probs.get(state).copied().unwrap_or(0.0)
    }

    /// Highest-probability state; ties break toward the smallest canonical
    /// state (empty set first).
    pub fn argmax(&self) -> Option<&EventSet> {
        let mut best: Option<(&EventSet, f64)> = None;
        for (state, p) in &self.probs {
            match best {
                Some((_, bp)) if *p <= bp => {}
                _ => best = Some((state, *p)),
            }
        }
        best.map(|(s, _)| s)
    }
}

/// How `recommend` turns the graph into a single next-state prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictMode {
    /// Walk from the current state: argmax over its conditional row.
    FromCurrent,
    /// Marginal one-step-ahead forecast mixing priors with conditionals.
    Marginal,
}

impl PredictMode {
    pub fn label(&self) -> &'static str {
        match self {
            PredictMode::FromCurrent => "from-current",
            PredictMode::Marginal => "marginal",
        }
    }
}

impl std::str::FromStr for PredictMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from-current" | "current" => Ok(PredictMode::FromCurrent),
            "marginal" => Ok(PredictMode::Marginal),
            other => Err(Error::InvalidParameter(format!(
                "unknown predict mode `{other}`"
            ))),
        }
    }
}

/// Online first-order correlation graph: sparse occurrence and transition
/// counts over every state seen so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrelationGraph {
    n: u16,
    steps: u64,
    nodes: BTreeMap<EventSet, u64>,
    edges: BTreeMap<EventSet, BTreeMap<EventSet, u64>>,
    prev: Option<EventSet>,
}

impl CorrelationGraph {
    /// `n` is the event-type count; states may only reference types 1..=n.
    pub fn new(n: u16) -> Self {
        Self {
            n,
            steps: 0,
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            prev: None,
        }
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    /// Steps observed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// State of the current (latest) step.
    pub fn current_state(&self) -> Option<&EventSet> {
        self.prev.as_ref()
    }

    pub fn observed_states(&self) -> impl Iterator<Item = &EventSet> {
        self.nodes.keys()
    }

    pub fn state_count(&self) -> usize {
        self.nodes.len()
    }

    /// Occurrences of `s` over steps 1..t.
    pub fn node_count(&self, s: &EventSet) -> u64 {
        self.nodes.get(s).copied().unwrap_or(0)
    }

    /// Transitions l -> m observed so far.
    pub fn edge_count(&self, l: &EventSet, m: &EventSet) -> u64 {
        self.edges
            .get(l)
            .and_then(|row| row.get(m))
            .copied()
            .unwrap_or(0)
    }

    /// Occurrences of `l` over steps 1..t-1: the conditional denominator.
    pub fn source_count(&self, l: &EventSet) -> u64 {
        let mut c = self.node_count(l);
        if self.prev.as_ref() == Some(l) {
            c -= 1;
        }
        c
    }

    pub fn edge_row(&self, l: &EventSet) -> Option<&BTreeMap<EventSet, u64>> {
        self.edges.get(l)
    }

    /// Absorb the bounded state of the next step.
    pub fn observe(&mut self, state: EventSet) {
        debug_assert!(
            state.max_member().is_none_or(|m| m <= self.n),
            "state {state} exceeds catalog width {}",
            self.n
        );
        self.steps += 1;
        *self.nodes.entry(state.clone()).or_insert(0) += 1;
        if let Some(prev) = self.prev.take() {
            *self
                .edges
                .entry(prev)
                .or_default()
                .entry(state.clone())
                .or_insert(0) += 1;
        }
        self.prev = Some(state);
    }

    /// Prior probability of exactly this state over steps 1..t.
    pub fn prior(&self, s: &EventSet) -> Result<f64> {
        if self.steps == 0 {
            return Err(Error::UndefinedModel);
        }
        Ok(self.node_count(s) as f64 / self.steps as f64)
    }

    /// Conditional probability of `m` given `l` in the preceding step.
    ///
    /// Undefined (distinct from zero) when `l` was never observed before the
    /// current step.
    pub fn conditional(&self, l: &EventSet, m: &EventSet) -> Result<f64> {
        let denom = self.source_count(l);
        if denom == 0 {
            return Err(Error::UndefinedConditional);
        }
        Ok(self.edge_count(l, m) as f64 / denom as f64)
    }

    fn ensure_transitions(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::UndefinedModel);
        }
        Ok(())
    }

    /// One-step-ahead marginal distribution: priors mixed through the
    /// transition rows, renormalized over the defined rows.
    ///
    /// Returns the distribution together with the pre-normalization mass
    /// (mass below 1 means some state was seen only at the final step and
    /// its row is undefined).
    pub fn next_distribution(&self) -> Result<(StateDistribution, f64)> {
        self.ensure_transitions()?;
        let mut probs: BTreeMap<EventSet, f64> = BTreeMap::new();
        let mut mass = 0.0f64;
        for (k, k_count) in &self.nodes {
            let denom = self.source_count(k);
            if denom == 0 {
                continue; // undefined row contributes nothing
            }
            let prior_k = *k_count as f64 / self.steps as f64;
            mass += prior_k;
            if let Some(row) = self.edges.get(k) {
                for (v, c) in row {
                    let p = prior_k * (*c as f64 / denom as f64);
                    *probs.entry(v.clone()).or_insert(0.0) += p;
                }
            }
        }
        if mass <= 0.0 {
            return Err(Error::UndefinedModel);
        }
        for p in probs.values_mut() {
            *p /= mass;
        }
        Ok((StateDistribution { probs }, mass))
    }

    /// Probability that every event type in `s` occurs at the next step:
    /// the marginal mass of all superset states.
    pub fn event_set_probability(&self, s: &EventSet) -> Result<f64> {
        let (dist, _) = self.next_distribution()?;
        Ok(dist
            .probs
            .iter()
            .filter(|(v, _)| v.is_superset_of(s))
            .map(|(_, p)| *p)
            .sum())
    }

    /// Single recommended next state under the given mode.
    pub fn recommend(&self, mode: PredictMode) -> Result<EventSet> {
        match mode {
            PredictMode::Marginal => {
                let (dist, _) = self.next_distribution()?;
                dist.argmax().cloned().ok_or(Error::UndefinedModel)
            }
            PredictMode::FromCurrent => {
                let current = self.prev.as_ref().ok_or(Error::UndefinedModel)?;
                let denom = self.source_count(current);
                if denom == 0 {
                    return Err(Error::UndefinedConditional);
                }
                let row = self.edges.get(current).ok_or(Error::UndefinedConditional)?;
                let mut best: Option<(&EventSet, u64)> = None;
                for (v, c) in row {
                    match best {
                        Some((_, bc)) if *c <= bc => {}
                        _ => best = Some((v, *c)),
                    }
                }
                best.map(|(s, _)| s.clone())
                    .ok_or(Error::UndefinedConditional)
            }
        }
    }

    /// Freeze the one-step transition matrix for multi-step queries.
    pub fn snapshot(&self) -> TransitionSnapshot {
        let states: Vec<EventSet> = self.nodes.keys().cloned().collect();
        let index: BTreeMap<EventSet, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut rows = Vec::with_capacity(states.len());
        for s in &states {
            let denom = self.source_count(s);
            if denom == 0 {
                rows.push(None);
                continue;
            }
            let mut row = vec![0.0f64; states.len()];
            if let Some(edge_row) = self.edges.get(s) {
                for (v, c) in edge_row {
                    row[index[v]] = *c as f64 / denom as f64;
                }
            }
            rows.push(Some(row));
        }
        TransitionSnapshot {
            states,
            index,
            rows,
        }
    }

    /// Multi-step conditional probability on a frozen snapshot of the chain.
    pub fn n_step_transition(&self, u: &EventSet, v: &EventSet, steps: u64) -> Result<f64> {
        self.snapshot().n_step(u, v, steps)
    }

    /// Serialize to the model JSON document.
    pub fn to_writer<W: Write>(&self, out: W) -> Result<()> {
        let doc = GraphDoc {
            n: self.n,
            t: self.steps,
            prev_state: self.prev.as_ref().map(|s| s.members().to_vec()),
            nodes: self
                .nodes
                .iter()
                .map(|(s, c)| (s.members().to_vec(), *c))
                .collect(),
            edges: self
                .edges
                .iter()
                .flat_map(|(l, row)| {
                    row.iter()
                        .map(move |(m, c)| (l.members().to_vec(), m.members().to_vec(), *c))
                })
                .collect(),
        };
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }

    /// Load a model JSON document.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_reader(input)?;
        let mut nodes = BTreeMap::new();
        for (members, count) in doc.nodes {
            nodes.insert(EventSet::from_sorted(members)?, count);
        }
        let mut edges: BTreeMap<EventSet, BTreeMap<EventSet, u64>> = BTreeMap::new();
        for (l, m, count) in doc.edges {
            edges
                .entry(EventSet::from_sorted(l)?)
                .or_default()
                .insert(EventSet::from_sorted(m)?, count);
        }
        let prev = doc.prev_state.map(EventSet::from_sorted).transpose()?;
        let graph = Self {
            n: doc.n,
            steps: doc.t,
            nodes,
            edges,
            prev,
        };
        graph.check_consistency()?;
        Ok(graph)
    }

    fn check_consistency(&self) -> Result<()> {
        let node_sum: u64 = self.nodes.values().sum();
        if node_sum != self.steps {
            return Err(Error::InvalidParameter(format!(
                "model document inconsistent: node counts sum to {node_sum}, t = {}",
                self.steps
            )));
        }
        if self.steps > 0 && self.prev.is_none() {
            return Err(Error::InvalidParameter(
                "model document inconsistent: t > 0 but no current state".into(),
            ));
        }
        for (l, row) in &self.edges {
            let out: u64 = row.values().sum();
            if out != self.source_count(l) {
                return Err(Error::InvalidParameter(format!(
                    "model document inconsistent: state {l} has {out} outgoing edges, expected {}",
                    self.source_count(l)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    n: u16,
    t: u64,
    prev_state: Option<Vec<u16>>,
    nodes: Vec<(Vec<u16>, u64)>,
    edges: Vec<(Vec<u16>, Vec<u16>, u64)>,
}

/// Frozen one-step transition matrix over the observed state space.
///
/// Undefined rows (states seen only at the final step) absorb into a
/// synthetic dead state that never reaches any queried target.
#[derive(Debug, Clone)]
pub struct TransitionSnapshot {
    states: Vec<EventSet>,
    index: BTreeMap<EventSet, usize>,
    rows: Vec<Option<Vec<f64>>>,
}

impl TransitionSnapshot {
    pub fn states(&self) -> &[EventSet] {
        &self.states
    }

    /// One-step row of `u`, if defined.
    pub fn row(&self, u: &EventSet) -> Option<&[f64]> {
        let i = self.index.get(u)?;
        self.rows[*i].as_deref()
    }

    /// Probability of reaching `v` from `u` in exactly `steps` steps
    /// (steps >= 1), composing the frozen matrix.
    pub fn n_step(&self, u: &EventSet, v: &EventSet, steps: u64) -> Result<f64> {
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        let ui = *self.index.get(u).ok_or(Error::UndefinedConditional)?;
        if self.rows[ui].is_none() {
            return Err(Error::UndefinedConditional);
        }
        let vi = match self.index.get(v) {
            Some(i) => *i,
            None => return Ok(0.0), // target never observed: unreachable
        };
        let mut cur = vec![0.0f64; self.states.len()];
        cur[ui] = 1.0;
        for _ in 0..steps {
            let mut next = vec![0.0f64; self.states.len()];
            for (i, mass) in cur.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                if let Some(row) = &self.rows[i] {
                    for (j, p) in row.iter().enumerate() {
                        if *p != 0.0 {
                            next[j] += mass * p;
                        }
                    }
                }
                // undefined rows: mass parks at the dead state (dropped)
            }
            cur = next;
        }
        Ok(cur[vi])
    }
}
