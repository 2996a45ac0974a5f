//! Variable-order predictor based on partial matching.
//!
//! A root-anchored trie counts every state subsequence of length up to
//! m + l. Prediction matches suffixes of the recent window (orders 1..m)
//! against the trie and extends each match by up to l states, chaining
//! stepwise conditional probabilities along the path. A cut-off threshold
//! discards low-probability extensions.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventSet;

/// Partial-matching parameters: maximum order m, lookahead l, and the
/// cut-off probability threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmConfig {
    pub max_order: usize,
    pub lookahead: usize,
    pub p_thr: f64,
}

impl PmConfig {
    pub fn new(max_order: usize, lookahead: usize, p_thr: f64) -> Result<Self> {
        if max_order == 0 || lookahead == 0 {
            return Err(Error::InvalidParameter(
                "order and lookahead must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p_thr) {
            return Err(Error::InvalidParameter(format!(
                "p_thr must lie in [0,1], got {p_thr}"
            )));
        }
        Ok(Self {
            max_order,
            lookahead,
            p_thr,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TrieNode {
    count: u64,
    children: BTreeMap<EventSet, TrieNode>,
}

impl TrieNode {
    fn walk(&self, path: &[EventSet]) -> Option<&TrieNode> {
        let mut node = self;
        for s in path {
            node = node.children.get(s)?;
        }
        Some(node)
    }
}

/// One predicted extension: a state sequence of length <= l with its chained
/// probability and the suffix order that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PmPrediction {
    pub sequence: Vec<EventSet>,
    pub probability: f64,
    pub matched_order: usize,
}

/// History trie over state sequences plus the recent window.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTrie {
    config: PmConfig,
    root: TrieNode,
    window: VecDeque<EventSet>,
    observed: u64,
}

impl HistoryTrie {
    pub fn new(config: PmConfig) -> Self {
        Self {
            config,
            root: TrieNode::default(),
            window: VecDeque::new(),
            observed: 0,
        }
    }

    pub fn config(&self) -> &PmConfig {
        &self.config
    }

    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Depth bound of the trie: m + l.
    pub fn depth(&self) -> usize {
        self.config.max_order + self.config.lookahead
    }

    /// Count of a specific path (whole-trace subsequence occurrences).
    pub fn path_count(&self, path: &[EventSet]) -> u64 {
        self.root.walk(path).map_or(0, |n| n.count)
    }

    /// Absorb the next state: every suffix of the window extended by the new
    /// state (lengths 1..=m+l) gets its path count incremented.
    pub fn observe(&mut self, state: EventSet) {
        let depth = self.depth();
        let window: Vec<EventSet> = self.window.iter().cloned().collect();
        for start in 0..=window.len() {
            let suffix = &window[start..];
            if suffix.len() + 1 > depth {
                continue;
            }
            let mut node = &mut self.root;
            for s in suffix {
                node = node.children.entry(s.clone()).or_default();
            }
            let leaf = node.children.entry(state.clone()).or_default();
            leaf.count += 1;
        }
        self.observed += 1;
        self.window.push_back(state);
        while self.window.len() > depth.saturating_sub(1) {
            self.window.pop_front();
        }
    }

    /// All extensions exceeding p_thr, longest-suffix matches first.
    ///
    /// When the same extension sequence arises from several suffix orders the
    /// maximum-probability instance wins; on equal probability the longer
    /// match is kept.
    pub fn predict(&self) -> Vec<PmPrediction> {
        let mut best: BTreeMap<Vec<EventSet>, PmPrediction> = BTreeMap::new();
        let window: Vec<EventSet> = self.window.iter().cloned().collect();
        let max_order = self.config.max_order.min(window.len());
        for order in 1..=max_order {
            let suffix = &window[window.len() - order..];
            let Some(anchor) = self.root.walk(suffix) else {
                continue;
            };
            if anchor.count == 0 {
                continue;
            }
            let mut stack: Vec<(Vec<EventSet>, &TrieNode, f64)> = vec![(Vec::new(), anchor, 1.0)];
            while let Some((prefix, node, prob)) = stack.pop() {
                if prefix.len() == self.config.lookahead {
                    continue;
                }
                for (state, child) in &node.children {
                    let p = prob * child.count as f64 / node.count as f64;
                    let mut seq = prefix.clone();
                    seq.push(state.clone());
                    if p > self.config.p_thr {
                        let cand = PmPrediction {
                            sequence: seq.clone(),
                            probability: p,
                            matched_order: order,
                        };
                        match best.get(&seq) {
                            Some(cur)
                                if cur.probability > cand.probability
                                    || (cur.probability == cand.probability
                                        && cur.matched_order >= cand.matched_order) => {}
                            _ => {
                                best.insert(seq.clone(), cand);
                            }
                        }
                    }
                    stack.push((seq, child, p));
                }
            }
        }
        let mut out: Vec<PmPrediction> = best.into_values().collect();
        out.sort_by(|a, b| {
            b.probability
                .partial_cmp(&a.probability)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.sequence.cmp(&b.sequence))
        });
        out
    }

    /// Single next-state recommendation: the top length-1 extension, ties
    /// broken toward the smallest canonical state (same tie-break as the
    /// stepwise recommender).
    pub fn recommend(&self) -> Option<EventSet> {
        let mut best: Option<(EventSet, f64)> = None;
        for p in self.predict() {
            if p.sequence.len() != 1 {
                continue;
            }
            let state = p.sequence.into_iter().next().expect("length checked");
            match &best {
                Some((bs, bp)) if p.probability < *bp || (p.probability == *bp && state >= *bs) => {
                }
                _ => best = Some((state, p.probability)),
            }
        }
        best.map(|(s, _)| s)
    }

    /// Serialize the trie as a path dump.
    pub fn to_writer<W: Write>(&self, out: W) -> Result<()> {
        let mut paths = Vec::new();
        let mut stack: Vec<(Vec<Vec<u16>>, &TrieNode)> = vec![(Vec::new(), &self.root)];
        while let Some((prefix, node)) = stack.pop() {
            for (state, child) in node.children.iter().rev() {
                let mut path = prefix.clone();
                path.push(state.members().to_vec());
                paths.push((path.clone(), child.count));
                stack.push((path, child));
            }
        }
        paths.sort();
        let doc = TrieDoc {
            max_order: self.config.max_order,
            lookahead: self.config.lookahead,
            p_thr: self.config.p_thr,
            observed: self.observed,
            window: self.window.iter().map(|s| s.members().to_vec()).collect(),
            paths,
        };
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }

    /// Load a trie dump.
    pub fn from_reader<R: Read>(input: R) -> Result<Self> {
        let doc: TrieDoc = serde_json::from_reader(input)?;
        let config = PmConfig::new(doc.max_order, doc.lookahead, doc.p_thr)?;
        let mut trie = Self::new(config);
        trie.observed = doc.observed;
        for members in doc.window {
            trie.window.push_back(EventSet::from_sorted(members)?);
        }
        if trie.window.len() > trie.depth().saturating_sub(1) {
            return Err(Error::InvalidParameter(
                "trie window longer than m+l-1".into(),
            ));
        }
        for (path, count) in doc.paths {
            if path.len() > trie.depth() {
                return Err(Error::InvalidParameter("trie path deeper than m+l".into()));
            }
            let mut node = &mut trie.root;
            for members in path {
                node = node
                    .children
                    .entry(EventSet::from_sorted(members)?)
                    .or_default();
            }
            node.count = count;
        }
        trie.check_consistency()?;
        Ok(trie)
    }

    fn check_consistency(&self) -> Result<()> {
        fn walk(node: &TrieNode) -> Result<()> {
            let child_sum: u64 = node.children.values().map(|c| c.count).sum();
            if node.count > 0 && child_sum > node.count {
                return Err(Error::InvalidParameter(format!(
                    "trie node count {} below its children's sum {child_sum}",
                    node.count
                )));
            }
            node.children.values().try_for_each(walk)
        }
        self.root.children.values().try_for_each(walk)
    }
}

#[derive(Serialize, Deserialize)]
struct TrieDoc {
    max_order: usize,
    lookahead: usize,
    p_thr: f64,
    observed: u64,
    window: Vec<Vec<u16>>,
    paths: Vec<(Vec<Vec<u16>>, u64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(members: &[u16]) -> EventSet {
        EventSet::new(members.to_vec())
    }

    fn trie(m: usize, l: usize, p_thr: f64) -> HistoryTrie {
        HistoryTrie::new(PmConfig::new(m, l, p_thr).unwrap())
    }

    #[test]
    fn first_observation_inserts_single_path() {
        let mut t = trie(2, 1, 0.0);
        t.observe(set(&[1]));
        assert_eq!(t.path_count(&[set(&[1])]), 1);
        assert_eq!(t.observed(), 1);
    }

    #[test]
    fn two_observations_insert_suffix_paths() {
        let mut t = trie(1, 1, 0.0); // m + l = 2
        t.observe(set(&[1]));
        t.observe(set(&[2]));
        assert_eq!(t.path_count(&[set(&[1])]), 1);
        assert_eq!(t.path_count(&[set(&[2])]), 1);
        assert_eq!(t.path_count(&[set(&[1]), set(&[2])]), 1);
    }

    #[test]
    fn alternating_counts_match_sliding_windows() {
        // a,b,a,b,... for 20 steps, m=2 l=1: count([a,b]) and count([b,a])
        // differ by at most one
        let mut t = trie(2, 1, 0.0);
        for i in 0..20 {
            t.observe(if i % 2 == 0 { set(&[1]) } else { set(&[2]) });
        }
        let ab = t.path_count(&[set(&[1]), set(&[2])]);
        let ba = t.path_count(&[set(&[2]), set(&[1])]);
        assert_eq!(ab, 10);
        assert_eq!(ba, 9);
        assert!((ab as i64 - ba as i64).abs() <= 1);
    }

    #[test]
    fn trie_counts_equal_brute_force_subsequence_counts() {
        // random trace over 4 states; every path count must equal a direct
        // sliding scan of the trace
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        let states: Vec<EventSet> = (0..100).map(|_| set(&[rng.gen_range(1..=4u16)])).collect();
        let (m, l) = (2, 2);
        let mut t = trie(m, l, 0.0);
        for s in &states {
            t.observe(s.clone());
        }
        // enumerate all paths of length 1..=m+l occurring in the trace
        for len in 1..=(m + l) {
            for start in 0..=(states.len() - len) {
                let path = &states[start..start + len];
                let expected = states.windows(len).filter(|w| *w == path).count() as u64;
                assert_eq!(
                    t.path_count(path),
                    expected,
                    "path {:?} count mismatch",
                    path.iter().map(|s| s.to_string()).collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn cycle_prediction_is_confident() {
        let mut t = trie(1, 1, 0.5);
        for i in 0..40 {
            t.observe(if i % 2 == 0 { set(&[1]) } else { set(&[2]) });
        }
        // window ends at {2} (step 40), so the prediction is {1}
        let preds = t.predict();
        assert_eq!(preds.len(), 1);
        assert_eq!(preds[0].sequence, vec![set(&[1])]);
        assert!(preds[0].probability > 0.9, "got {}", preds[0].probability);
    }

    #[test]
    fn threshold_one_rejects_everything() {
        let mut t = trie(2, 2, 1.0);
        for i in 0..30 {
            t.observe(set(&[(i % 3 + 1) as u16]));
        }
        assert!(
            t.predict().is_empty(),
            "no probability strictly exceeds 1.0"
        );
    }

    #[test]
    fn emitted_probabilities_are_valid_and_above_threshold() {
        let mut rng = crate::seed::rng(17);
        use rand::Rng;
        let mut t = trie(3, 2, 0.15);
        for _ in 0..200 {
            t.observe(set(&[rng.gen_range(1..=3u16)]));
        }
        for p in t.predict() {
            assert!(
                p.probability > 0.15 && p.probability <= 1.0,
                "p = {}",
                p.probability
            );
            assert!(!p.sequence.is_empty() && p.sequence.len() <= 2);
            assert!(p.matched_order >= 1 && p.matched_order <= 3);
        }
    }

    #[test]
    fn higher_order_disambiguates_when_pairs_differ() {
        // trace: (1,2,3) x10 then (4,2,5) x4 and a trailing 4,2.
        // order-2 [4,2] predicts 5 at 4/5; order-1 [2] still favors 3 at
        // 10/15, so the pair context flips the recommendation
        let mut t = trie(2, 1, 0.0);
        for _ in 0..10 {
            t.observe(set(&[1]));
            t.observe(set(&[2]));
            t.observe(set(&[3]));
        }
        for _ in 0..4 {
            t.observe(set(&[4]));
            t.observe(set(&[2]));
            t.observe(set(&[5]));
        }
        t.observe(set(&[4]));
        t.observe(set(&[2]));
        let preds = t.predict();
        let top = &preds[0];
        assert_eq!(
            top.sequence,
            vec![set(&[5])],
            "order-2 context [4,2] pins 5"
        );
        assert_eq!(top.matched_order, 2);
        assert!(
            (top.probability - 0.8).abs() < 1e-12,
            "got {}",
            top.probability
        );
        // the order-1 candidate for 3 is still present, below the top
        assert!(preds
            .iter()
            .any(|p| p.sequence == vec![set(&[3])] && p.matched_order == 1));
        assert_eq!(t.recommend(), Some(set(&[5])));
    }

    #[test]
    fn multi_step_extensions_chain_probabilities() {
        let mut t = trie(1, 2, 0.0);
        for i in 0..30 {
            t.observe(set(&[(i % 3 + 1) as u16]));
        }
        // deterministic cycle 1,2,3: from 3 the 2-step extension is [1,2]
        let preds = t.predict();
        let two_step: Vec<_> = preds.iter().filter(|p| p.sequence.len() == 2).collect();
        assert_eq!(two_step.len(), 1);
        assert_eq!(two_step[0].sequence, vec![set(&[1]), set(&[2])]);
        assert!(two_step[0].probability > 0.8);
    }

    #[test]
    fn recommend_empty_when_nothing_matches() {
        let mut t = trie(2, 1, 0.0);
        t.observe(set(&[1]));
        // only one observation: suffix [{1}] has no children
        assert_eq!(t.recommend(), None);
    }

    #[test]
    fn trie_json_round_trip() {
        let mut t = trie(2, 2, 0.25);
        let mut rng = crate::seed::rng(11);
        use rand::Rng;
        for _ in 0..60 {
            t.observe(set(&[rng.gen_range(1..=3u16)]));
        }
        let mut buf = Vec::new();
        t.to_writer(&mut buf).unwrap();
        let back = HistoryTrie::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.predict(), t.predict());
    }

    #[test]
    fn node_counts_dominate_children_sums() {
        let mut t = trie(3, 1, 0.0);
        let mut rng = crate::seed::rng(23);
        use rand::Rng;
        for _ in 0..120 {
            t.observe(set(&[rng.gen_range(1..=3u16)]));
        }
        // root itself carries no count; every real node must dominate the
        // sum of its children
        fn check(node: &TrieNode) {
            for c in node.children.values() {
                let s: u64 = c.children.values().map(|x| x.count).sum();
                assert!(
                    c.count >= s,
                    "node count {} must dominate children sum {s}",
                    c.count
                );
                check(c);
            }
        }
        check(&t.root);
    }
}
