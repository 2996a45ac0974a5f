//! Acceptance suite: one test per criterion, each printing a PASS line and
//! pinning its tolerance in code.
//!
//! Oracles here are recomputed from raw traces (batch statistics, brute-force
//! recounts, dense matrix algebra) and never share code with the incremental
//! paths they check.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use stepcorr::detect::{CompareMode, DetectorBank, ShewhartDetector};
use stepcorr::diagnostics;
use stepcorr::eval::{
    run_engine, run_experiment, write_report_csv, EngineKind, ExperimentConfig, Forecaster,
    GridSpec, PartialMatchForecaster, StepwiseForecaster,
};
use stepcorr::event::{count_bounded_states, EventSet, EventVector};
use stepcorr::generator::{generate_stream, BaseProcess, ChangeEvent, ChangeKind, GeneratorSpec};
use stepcorr::graph::{CorrelationGraph, PredictMode};
use stepcorr::ingest::ContextVector;
use stepcorr::pm::PmConfig;
use stepcorr::seed;

fn set(members: &[u16]) -> EventSet {
    EventSet::new(members.to_vec())
}

fn pass(line: &str) {
    println!("PASS {line}");
}

// ---------------------------------------------------------------------------
// criterion 1
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_incremental_statistics_oracle() {
    let started = Instant::now();
    let mut checked = 0u64;
    for series_idx in 0..1000u64 {
        let mut rng = seed::rng(seed::mix2(0xACC1, series_idx));
        let len = 2 + (seed::mix2(series_idx, 1) % 499) as usize;
        let offset: f64 = rng.gen_range(-10.0..10.0);
        let mut det = ShewhartDetector::new(3.0, 5, CompareMode::BeforeUpdate).unwrap();
        // running-sum batch oracle, independent of the recurrence under test
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for t in 1..=len {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let x = offset + noise;
            det.step(x).unwrap();
            sum += x;
            sum_sq += x * x;
            let mean = sum / t as f64;
            let var = (sum_sq / t as f64 - mean * mean).max(0.0);
            let std = var.sqrt();
            let scale = mean.abs().max(1.0);
            assert!(
                (det.stats().mean() - mean).abs() <= 1e-9 * scale,
                "series {series_idx} t={t}: mean {} vs batch {mean}",
                det.stats().mean()
            );
            let sscale = std.abs().max(1.0);
            assert!(
                (det.stats().std() - std).abs() <= 1e-9 * sscale,
                "series {series_idx} t={t}: std {} vs batch {std}",
                det.stats().std()
            );
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "runtime {elapsed:?} exceeds 5 s"
    );
    pass(&format!(
        "criterion 1: incremental mean/std == batch on {checked} prefixes across 1000 series \
         (1e-9 rel, {elapsed:?})"
    ));
}

// ---------------------------------------------------------------------------
// random event traces shared by criteria 2 and 3
// ---------------------------------------------------------------------------

fn random_trace(seed_val: u64, n: u16, max_len: usize) -> Vec<EventSet> {
    let mut rng = seed::rng(seed_val);
    let len = 2 + (seed::mix2(seed_val, 99) % (max_len as u64 - 1)) as usize;
    (0..len)
        .map(|_| {
            let members: Vec<u16> = (1..=n).filter(|_| rng.gen_bool(0.3)).collect();
            EventSet::new(members)
        })
        .collect()
}

#[test]
fn criterion_02_normalization_invariants() {
    let started = Instant::now();
    for trace_idx in 0..200u64 {
        let n = 2 + (trace_idx % 5) as u16; // n in 2..=6
        let trace = random_trace(seed::mix2(0xACC2, trace_idx), n, 200);
        let mut g = CorrelationGraph::new(n);
        for (i, s) in trace.iter().enumerate() {
            g.observe(s.clone());
            let t = i + 1;
            let prior_sum: f64 = g.observed_states().map(|v| g.prior(v).unwrap()).sum();
            assert!(
                (prior_sum - 1.0).abs() < 1e-9,
                "trace {trace_idx} t={t}: priors sum to {prior_sum}"
            );
            let states: Vec<EventSet> = g.observed_states().cloned().collect();
            for u in &states {
                let denom = g.source_count(u);
                if denom == 0 {
                    continue;
                }
                let row_sum: f64 = g
                    .edge_row(u)
                    .map(|row| row.values().map(|c| *c as f64 / denom as f64).sum())
                    .unwrap_or(0.0);
                assert!(
                    (row_sum - 1.0).abs() < 1e-9,
                    "trace {trace_idx} t={t}: row {u} sums to {row_sum}"
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:?} exceeds 10 s"
    );
    pass(&format!(
        "criterion 2: prior and conditional normalization hold after every step on 200 traces \
         (1e-9, {elapsed:?})"
    ));
}

#[test]
fn criterion_03_count_oracle_equivalence() {
    let started = Instant::now();
    for trace_idx in 0..200u64 {
        let n = 2 + (trace_idx % 5) as u16;
        let trace = random_trace(seed::mix2(0xACC2, trace_idx), n, 200);
        let mut g = CorrelationGraph::new(n);
        for s in &trace {
            g.observe(s.clone());
        }
        // brute-force recount from the raw trace
        let mut node: BTreeMap<&EventSet, u64> = BTreeMap::new();
        for s in &trace {
            *node.entry(s).or_insert(0) += 1;
        }
        let mut edge: BTreeMap<(&EventSet, &EventSet), u64> = BTreeMap::new();
        for w in trace.windows(2) {
            *edge.entry((&w[0], &w[1])).or_insert(0) += 1;
        }
        let mut source: BTreeMap<&EventSet, u64> = BTreeMap::new();
        for s in &trace[..trace.len() - 1] {
            *source.entry(s).or_insert(0) += 1;
        }

        assert_eq!(g.steps(), trace.len() as u64);
        for (s, count) in &node {
            assert_eq!(g.node_count(s), *count, "trace {trace_idx}: node {s}");
            // exact integer-ratio equality for the prior
            assert_eq!(g.prior(s).unwrap(), *count as f64 / trace.len() as f64);
        }
        for ((l, m), count) in &edge {
            assert_eq!(
                g.edge_count(l, m),
                *count,
                "trace {trace_idx}: edge {l}->{m}"
            );
        }
        for (l, count) in &source {
            assert_eq!(g.source_count(l), *count, "trace {trace_idx}: source {l}");
            // spot-check the conditional ratio against the recount
            for m in node.keys() {
                let num = edge.get(&(l, *m)).copied().unwrap_or(0);
                assert_eq!(
                    g.conditional(l, m).unwrap(),
                    num as f64 / *count as f64,
                    "trace {trace_idx}: conditional {l}->{m}"
                );
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:?} exceeds 10 s"
    );
    pass(&format!(
        "criterion 3: incremental counts equal brute-force recounts exactly on 200 traces \
         ({elapsed:?})"
    ));
}

// ---------------------------------------------------------------------------
// criterion 4: dense-matrix forecast oracle
// ---------------------------------------------------------------------------

struct DenseOracle {
    states: Vec<EventSet>,
    prior: Vec<f64>,
    rows: Vec<Option<Vec<f64>>>,
}

impl DenseOracle {
    fn build(trace: &[EventSet]) -> Self {
        let mut states: Vec<EventSet> = trace.to_vec();
        states.sort();
        states.dedup();
        let index: BTreeMap<&EventSet, usize> =
            states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let t = trace.len() as f64;
        let mut node = vec![0u64; states.len()];
        for s in trace {
            node[index[s]] += 1;
        }
        let prior: Vec<f64> = node.iter().map(|c| *c as f64 / t).collect();
        let mut source = vec![0u64; states.len()];
        for s in &trace[..trace.len() - 1] {
            source[index[s]] += 1;
        }
        let mut counts = vec![vec![0u64; states.len()]; states.len()];
        for w in trace.windows(2) {
            counts[index[&w[0]]][index[&w[1]]] += 1;
        }
        let rows = (0..states.len())
            .map(|i| {
                (source[i] > 0).then(|| {
                    counts[i]
                        .iter()
                        .map(|c| *c as f64 / source[i] as f64)
                        .collect()
                })
            })
            .collect();
        Self {
            states,
            prior,
            rows,
        }
    }

    fn index(&self, s: &EventSet) -> Option<usize> {
        self.states.binary_search(s).ok()
    }

    /// One-step marginal: priors through the matrix, undefined rows dropped,
    /// renormalized.
    fn next_marginal(&self) -> (Vec<f64>, f64) {
        let mut out = vec![0.0f64; self.states.len()];
        let mut mass = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let Some(row) = row else { continue };
            mass += self.prior[i];
            for (j, p) in row.iter().enumerate() {
                out[j] += self.prior[i] * p;
            }
        }
        for v in &mut out {
            *v /= mass;
        }
        (out, mass)
    }

    fn event_set_probability(&self, s: &EventSet) -> f64 {
        let (dist, _) = self.next_marginal();
        self.states
            .iter()
            .zip(&dist)
            .filter(|(v, _)| v.is_superset_of(s))
            .map(|(_, p)| *p)
            .sum()
    }

    /// Matrix power with zero rows for undefined sources.
    fn n_step(&self, u: &EventSet, v: &EventSet, steps: u64) -> Option<f64> {
        let ui = self.index(u)?;
        self.rows[ui].as_ref()?;
        let vi = self.index(v)?;
        let mut cur = vec![0.0f64; self.states.len()];
        cur[ui] = 1.0;
        for _ in 0..steps {
            let mut next = vec![0.0f64; self.states.len()];
            for (i, mass) in cur.iter().enumerate() {
                if let Some(row) = &self.rows[i] {
                    for (j, p) in row.iter().enumerate() {
                        next[j] += mass * p;
                    }
                }
            }
            cur = next;
        }
        Some(cur[vi])
    }
}

#[test]
fn criterion_04_forecast_oracle() {
    let started = Instant::now();
    for trace_idx in 0..30u64 {
        let trace = random_trace(seed::mix2(0xACC4, trace_idx), 5, 150);
        let mut g = CorrelationGraph::new(5);
        for s in &trace {
            g.observe(s.clone());
        }
        let oracle = DenseOracle::build(&trace);
        assert!(oracle.states.len() <= 32);

        // next-step marginal distribution
        let (dist, mass) = g.next_distribution().unwrap();
        let (oracle_dist, oracle_mass) = oracle.next_marginal();
        assert!((mass - oracle_mass).abs() < 1e-9);
        for (i, s) in oracle.states.iter().enumerate() {
            assert!(
                (dist.get(s) - oracle_dist[i]).abs() < 1e-9,
                "trace {trace_idx}: marginal of {s}: {} vs {}",
                dist.get(s),
                oracle_dist[i]
            );
        }

        // event-set probability: empty set, singletons, pairs
        let mut queries = vec![set(&[])];
        queries.extend((1..=5).map(|i| set(&[i])));
        queries.push(set(&[1, 2]));
        queries.push(set(&[2, 4]));
        for q in &queries {
            let got = g.event_set_probability(q).unwrap();
            let want = oracle.event_set_probability(q);
            assert!(
                (got - want).abs() < 1e-9,
                "trace {trace_idx}: event set {q}: {got} vs {want}"
            );
        }
        assert!((g.event_set_probability(&set(&[])).unwrap() - 1.0).abs() < 1e-9);

        // n-step transitions up to 4 steps, on one frozen snapshot per trace
        let snapshot = g.snapshot();
        for steps in 1..=4u64 {
            for u in &oracle.states {
                match oracle.n_step(u, &oracle.states[0], steps) {
                    None => {
                        assert!(snapshot.n_step(u, &oracle.states[0], steps).is_err());
                        assert!(g.n_step_transition(u, &oracle.states[0], steps).is_err());
                    }
                    Some(_) => {
                        for v in &oracle.states {
                            let want = oracle.n_step(u, v, steps).unwrap();
                            let got = snapshot.n_step(u, v, steps).unwrap();
                            assert!(
                                (got - want).abs() < 1e-9,
                                "trace {trace_idx}: {steps}-step {u}->{v}: {got} vs {want}"
                            );
                        }
                    }
                }
            }
        }
        // the convenience query on the graph delegates to a fresh snapshot
        let u0 = g.current_state().unwrap();
        for v in oracle.states.iter().take(4) {
            let got = g.n_step_transition(u0, v, 3);
            let want = oracle.n_step(u0, v, 3);
            match want {
                None => assert!(got.is_err()),
                Some(w) => assert!((got.unwrap() - w).abs() < 1e-9),
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:?} exceeds 10 s"
    );
    pass(&format!(
        "criterion 4: marginal, event-set and n-step forecasts match the dense-matrix oracle \
         (1e-9, {elapsed:?})"
    ));
}

// ---------------------------------------------------------------------------
// criterion 5
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_state_count_formula() {
    assert_eq!(count_bounded_states(29, 2).unwrap(), 436);
    for n in 1..=20u64 {
        assert_eq!(
            count_bounded_states(n, n).unwrap(),
            1u128 << n,
            "full powerset at n={n}"
        );
    }
    pass("criterion 5: bounded state count reproduces 436 at (29,2) and 2^n up to n=20, exactly");
}

// ---------------------------------------------------------------------------
// criterion 6
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_baseline_reduction() {
    let mut agreements = 0u64;
    for trial in 0..100u64 {
        let mut rng = seed::rng(seed::mix2(0xACC6, trial));
        let mut stepwise = StepwiseForecaster::new(6, PredictMode::FromCurrent);
        let mut pm = PartialMatchForecaster::new(PmConfig::new(1, 1, 0.0).unwrap());
        for _ in 0..150 {
            let r: f64 = rng.gen();
            let state = if r < 0.4 {
                set(&[1])
            } else if r < 0.7 {
                set(&[2])
            } else if r < 0.85 {
                set(&[3])
            } else if r < 0.95 {
                set(&[1, 2])
            } else {
                set(&[])
            };
            stepwise.observe(&state);
            pm.observe(&state);
            assert_eq!(
                stepwise.recommend(),
                pm.recommend(),
                "trial {trial}: engines disagree"
            );
            agreements += 1;
        }
    }
    pass(&format!(
        "criterion 6: pm(m=1,l=1,p_thr=0) equals stepwise recommend-from-current on \
         {agreements} recommendations across 100 traces (100% agreement)"
    ));
}

// ---------------------------------------------------------------------------
// full-pipeline helpers for criteria 7, 9, 11
// ---------------------------------------------------------------------------

fn detect_events(
    vectors: &[ContextVector],
    n: usize,
    tightness: f64,
    warmup: u64,
) -> Vec<EventVector> {
    let mut bank = DetectorBank::new(n, tightness, warmup, CompareMode::BeforeUpdate).unwrap();
    bank.detect_all(vectors).unwrap()
}

/// Three constant streams spiking +8/-8 in a fixed rotation of period 6.
fn perfect_cycle_spec(length: u64) -> GeneratorSpec {
    let mut changes = Vec::new();
    for i in 0..3u16 {
        changes.push(ChangeEvent {
            step: u64::from(i) + 1,
            streams: vec![i + 1],
            magnitude: 8.0,
            kind: ChangeKind::Spike,
            recurring: true,
        });
        changes.push(ChangeEvent {
            step: u64::from(i) + 4,
            streams: vec![i + 1],
            magnitude: -8.0,
            kind: ChangeKind::Spike,
            recurring: true,
        });
    }
    GeneratorSpec {
        n: 3,
        length,
        seed: 0,
        streams: vec![BaseProcess::Constant { value: 0.0 }; 3],
        changes,
        repeat_period: Some(6),
    }
}

#[test]
fn criterion_07_perfect_cycle_full_pipeline() {
    let spec = perfect_cycle_spec(420);
    let generated = generate_stream(&spec).unwrap();
    let warmup = 12u64;
    let events = detect_events(&generated.vectors, 3, 1.5, warmup);

    // the detected pattern is exactly periodic after detector warm-up
    for ev in events.iter().skip(warmup as usize) {
        let phase = (ev.t - 1) % 6 + 1;
        let expected: Vec<bool> = (1..=3u64).map(|i| phase == i || phase == i + 3).collect();
        assert_eq!(
            ev.bits, expected,
            "step {}: detected pattern deviates",
            ev.t
        );
    }

    for h in [1u64, 3] {
        let cfg = ExperimentConfig {
            engine: EngineKind::Stepwise,
            grid: GridSpec {
                max_combo_k: vec![2],
                horizons: vec![h],
                orders: vec![1],
            },
            seed: 7,
            eval_warmup: 40,
            ..Default::default()
        };
        let report = run_experiment(&events, &cfg).unwrap();
        let row = &report.rows[0];
        assert_eq!(
            row.precision,
            Some(1.0),
            "h={h}: precision {:?}",
            row.precision
        );
        assert_eq!(row.recall, Some(1.0), "h={h}: recall {:?}", row.recall);
        assert!(
            row.tally.true_pos > 300,
            "h={h}: scored volume {:?}",
            row.tally
        );
    }
    pass(
        "criterion 7: deterministic cycle through generate->detect->correlate->evaluate \
          scores precision = recall = 1.0 for h in {1,3}",
    );
}

// ---------------------------------------------------------------------------
// criterion 8
// ---------------------------------------------------------------------------

fn stochastic_trace(seed_val: u64, len: usize) -> Vec<EventSet> {
    let mut rng = seed::rng(seed_val);
    let n_states = 5u16;
    // random two-successor structure per state
    let succ: Vec<(u16, u16)> = (0..n_states)
        .map(|_| {
            let a = rng.gen_range(1..=n_states);
            let mut b = rng.gen_range(1..=n_states);
            while b == a {
                b = rng.gen_range(1..=n_states);
            }
            (a, b)
        })
        .collect();
    let mut state = 1u16;
    (0..len)
        .map(|_| {
            let r: f64 = rng.gen();
            state = if r < 0.56 {
                succ[usize::from(state) - 1].0
            } else if r < 0.8 {
                succ[usize::from(state) - 1].1
            } else {
                rng.gen_range(1..=n_states)
            };
            set(&[state])
        })
        .collect()
}

#[test]
fn criterion_08_horizon_monotonicity() {
    for trial in 0..50u64 {
        let trace = stochastic_trace(seed::mix2(0xACC8, trial), 400);
        let mut tallies = Vec::new();
        for h in [1u64, 2, 3] {
            let mut engine = StepwiseForecaster::new(5, PredictMode::FromCurrent);
            let out = run_engine(&trace, &mut engine, h, 0).unwrap();
            tallies.push(out.tally);
        }
        for w in tallies.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            // exact rational comparison: tp_lo/(tp_lo+fp_lo) <= tp_hi/(tp_hi+fp_hi)
            assert!(
                lo.true_pos * (hi.true_pos + hi.false_pos)
                    <= hi.true_pos * (lo.true_pos + lo.false_pos),
                "trial {trial}: precision decreased with wider horizon: {lo:?} -> {hi:?}"
            );
            assert!(
                lo.true_pos * (hi.true_pos + hi.false_neg)
                    <= hi.true_pos * (lo.true_pos + lo.false_neg),
                "trial {trial}: recall decreased with wider horizon: {lo:?} -> {hi:?}"
            );
        }
    }
    pass("criterion 8: precision and recall non-decreasing in h over {1,2,3} on 50 traces");
}

// ---------------------------------------------------------------------------
// criterion 9
// ---------------------------------------------------------------------------

/// Pattern streams 1..=6 spike in rotation (repeat_period 6); streams 7..=12
/// take one-shot noise spikes on 10% of the steps.
fn noisy_pattern_spec(seed_val: u64, length: u64) -> GeneratorSpec {
    let mut changes: Vec<ChangeEvent> = (0..6u16)
        .map(|i| ChangeEvent {
            step: u64::from(i) + 1,
            streams: vec![i + 1],
            magnitude: 8.0,
            kind: ChangeKind::Spike,
            recurring: true,
        })
        .collect();
    let mut rng = seed::rng(seed::mix2(seed_val, 0x901));
    for t in 1..=length {
        if rng.gen_bool(0.10) {
            changes.push(ChangeEvent {
                step: t,
                streams: vec![7 + rng.gen_range(0..6u16)],
                magnitude: 8.0,
                kind: ChangeKind::Spike,
                recurring: false,
            });
        }
    }
    GeneratorSpec {
        n: 12,
        length,
        seed: seed_val,
        streams: vec![BaseProcess::Constant { value: 0.0 }; 12],
        changes,
        repeat_period: Some(6),
    }
}

#[test]
fn criterion_09_stepwise_dominates_partial_matching_on_noisy_patterns() {
    let seeds = 20u64;
    let mut stepwise_precisions = Vec::new();
    let mut pm_precisions: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for trial in 0..seeds {
        let spec = noisy_pattern_spec(seed::mix2(0xACC9, trial), 600);
        let generated = generate_stream(&spec).unwrap();
        let events = detect_events(&generated.vectors, 12, 1.5, 12);
        let base = ExperimentConfig {
            grid: GridSpec {
                max_combo_k: vec![2],
                horizons: vec![1],
                orders: vec![1],
            },
            seed: trial,
            ..Default::default()
        };

        let sw_report = run_experiment(&events, &base).unwrap();
        let sw_p = sw_report.rows[0]
            .precision
            .expect("stepwise precision defined");
        stepwise_precisions.push(sw_p);

        let pm_cfg = ExperimentConfig {
            engine: EngineKind::Pm,
            grid: GridSpec {
                max_combo_k: vec![2],
                horizons: vec![1],
                orders: vec![3, 4, 5],
            },
            lookahead: 1,
            p_thr: 0.0,
            ..base
        };
        let pm_report = run_experiment(&events, &pm_cfg).unwrap();
        for row in &pm_report.rows {
            let m = row.m.unwrap();
            let pm_p = row.precision.expect("pm precision defined");
            pm_precisions.entry(m).or_default().push(pm_p);
            assert!(
                sw_p >= pm_p - 0.02,
                "trial {trial}, m={m}: stepwise {sw_p:.4} trails pm {pm_p:.4} by more than 2pp"
            );
        }
    }
    let sw_avg: f64 = stepwise_precisions.iter().sum::<f64>() / seeds as f64;
    for (m, ps) in &pm_precisions {
        let pm_avg: f64 = ps.iter().sum::<f64>() / seeds as f64;
        assert!(
            sw_avg > pm_avg,
            "stepwise average {sw_avg:.4} not strictly above pm(m={m}) average {pm_avg:.4}"
        );
    }
    let pm_avgs: Vec<String> = pm_precisions
        .iter()
        .map(|(m, ps)| format!("m={m}: {:.4}", ps.iter().sum::<f64>() / seeds as f64))
        .collect();
    pass(&format!(
        "criterion 9: stepwise precision at h=1 (avg {sw_avg:.4}) dominates partial matching \
         ({}) on repeating patterns with 10% noise over {seeds} seeds",
        pm_avgs.join(", ")
    ));
}

// ---------------------------------------------------------------------------
// criterion 10
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_diagnostics_calibration() {
    let started = Instant::now();

    // white noise: H near one half
    let mut rng = seed::rng(2024);
    let noise: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
    let est = diagnostics::hurst_rs(&noise).unwrap();
    assert!(
        (0.4..=0.6).contains(&est.h),
        "white-noise Hurst {h} outside [0.4, 0.6]",
        h = est.h
    );

    // AR(1) with phi = 0.8
    let mut rng = seed::rng(2025);
    let mut x = 0.0f64;
    let ar1: Vec<f64> = (0..8192)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = 0.8 * x + e;
            x
        })
        .collect();
    let acf = diagnostics::acf(&ar1, 10).unwrap();
    assert!(
        (0.75..=0.85).contains(&acf[1]),
        "AR(1) acf(1) = {} outside [0.75, 0.85]",
        acf[1]
    );
    let pacf = diagnostics::pacf_from_acf(&acf).unwrap();
    for k in 2..=10usize {
        assert!(
            pacf[k - 1].abs() < 0.05,
            "AR(1) pacf({k}) = {} should cut off",
            pacf[k - 1]
        );
    }

    // Durbin-Levinson against a direct normal-equation solve
    for k in 1..=10usize {
        let direct = solve_yule_walker(&acf, k);
        assert!(
            (pacf[k - 1] - direct).abs() < 1e-6,
            "pacf({k}): recursion {} vs direct solve {direct}",
            pacf[k - 1]
        );
    }

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:?} exceeds 10 s"
    );
    pass(&format!(
        "criterion 10: H(white noise) = {:.3} in [0.4,0.6]; AR(1) acf(1) = {:.3}, pacf cuts \
         off, Durbin-Levinson matches direct solve to 1e-6 ({elapsed:?})",
        est.h, acf[1]
    ));
}

/// Gaussian elimination on the Yule-Walker system; last coefficient is the
/// lag-k partial autocorrelation.
#[allow(clippy::needless_range_loop)]
fn solve_yule_walker(rho: &[f64], k: usize) -> f64 {
    let mut a = vec![vec![0.0f64; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = rho[(i as isize - j as isize).unsigned_abs()];
        }
        a[i][k] = rho[i + 1];
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|x, y| a[*x][col].abs().partial_cmp(&a[*y][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        for row in (col + 1)..k {
            let f = a[row][col] / a[col][col];
            for j in col..=k {
                a[row][j] -= f * a[col][j];
            }
        }
    }
    let mut x = vec![0.0f64; k];
    for row in (0..k).rev() {
        let mut acc = a[row][k];
        for j in (row + 1)..k {
            acc -= a[row][j] * x[j];
        }
        x[row] = acc / a[row][row];
    }
    x[k - 1]
}

// ---------------------------------------------------------------------------
// criterion 11
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_determinism() {
    let run = |root_seed: u64| -> Vec<u8> {
        let mut spec = noisy_pattern_spec(root_seed, 300);
        spec.seed = root_seed;
        let generated = generate_stream(&spec).unwrap();
        let events = detect_events(&generated.vectors, 12, 1.5, 12);
        let cfg = ExperimentConfig {
            grid: GridSpec {
                max_combo_k: vec![1, 2],
                horizons: vec![1, 3],
                orders: vec![1],
            },
            seed: root_seed,
            ..Default::default()
        };
        let report = run_experiment(&events, &cfg).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &report.rows).unwrap();
        // pm leg as well
        let pm_cfg = ExperimentConfig {
            engine: EngineKind::Pm,
            grid: GridSpec {
                max_combo_k: vec![2],
                horizons: vec![1],
                orders: vec![2, 3],
            },
            seed: root_seed,
            ..cfg
        };
        let pm_report = run_experiment(&events, &pm_cfg).unwrap();
        write_report_csv(&mut buf, &pm_report.rows).unwrap();
        buf
    };
    let a = run(0xD00D);
    let b = run(0xD00D);
    assert_eq!(
        a, b,
        "same root seed must produce byte-identical report CSVs"
    );
    let c = run(0xD00E);
    assert_ne!(a, c, "different seeds should differ (sanity)");
    pass("criterion 11: repeated experiments with one root seed produce byte-identical reports");
}
