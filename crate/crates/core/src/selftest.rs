//! Invariant checks over emitted coordination traces, plus a small end-to-end
//! run used by the `self-test` subcommand.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coordination::bus::MessageKind;
use crate::coordination::ao::CoordinationTrace;
use crate::coordination::ipc::ipc_candidates;
use crate::coordination::matching::is_maximal_matching;
use crate::precoder::IpcThresholds;
use crate::scenarios::NetworkScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// First few violations, empty when passed.
    pub details: Vec<String>,
}

impl Check {
    fn from_violations(name: &str, violations: Vec<String>) -> Self {
        Self { name: name.to_string(), passed: violations.is_empty(), details: violations.into_iter().take(10).collect() }
    }
}

/// Rotation steps never lower the cell's sample-average rate.
pub fn rotation_monotone(trace: &CoordinationTrace, tol: f64) -> Check {
    let v = trace
        .rotation_steps()
        .filter(|r| r.rate_after < r.rate_before - tol)
        .map(|r| format!("t={} cell={} {} -> {}", r.t, r.cell, r.rate_before, r.rate_after))
        .collect();
    Check::from_violations("rotation steps nondecreasing", v)
}

/// Accepted threshold updates improve the pair utility by more than `eps`,
/// and the logged utilities are consistent with the logged rates.
pub fn accepted_updates_improve(trace: &CoordinationTrace, eps: f64) -> Check {
    let mut v = Vec::new();
    for (t, tau, d) in trace.decisions() {
        for e in d.stage1.iter().chain(&d.stage2) {
            if e.utility != e.rate_m + e.rate_n {
                v.push(format!("t={t} tau={tau} pair={:?}: utility is not the sum of the two rates", d.pair));
            }
        }
        let best2 = d.stage2.iter().find(|e| e.threshold == d.y_bar).map(|e| e.utility);
        if best2 != Some(d.phi_new) {
            v.push(format!("t={t} tau={tau} pair={:?}: phi_new does not match stage 2", d.pair));
        }
        if d.accepted && d.phi_new <= d.phi_cur + eps {
            v.push(format!("t={t} tau={tau} pair={:?}: accepted {} vs {}", d.pair, d.phi_new, d.phi_cur));
        }
        if !d.accepted && d.updated != d.current {
            v.push(format!("t={t} tau={tau} pair={:?}: rejected update changed thresholds", d.pair));
        }
    }
    Check::from_violations("accepted updates improve the pair utility", v)
}

/// Thresholds of pairs outside the round's matching are bit-identical
/// before and after the round; every round's matching is maximal.
pub fn unmatched_thresholds_frozen(trace: &CoordinationTrace, scenario: &NetworkScenario, initial: &IpcThresholds) -> Check {
    let mut v = Vec::new();
    let mut prev = initial.clone();
    let snapshots: Vec<_> = trace.threshold_snapshots().collect();
    let matchings: Vec<_> = trace.matchings().collect();
    for ((t, tau, snap), (mt, mtau, edges)) in snapshots.iter().zip(&matchings) {
        if (t, tau) != (mt, mtau) {
            v.push(format!("snapshot ({t},{tau}) has no matching"));
            continue;
        }
        if !is_maximal_matching(&scenario.graph, edges) {
            v.push(format!("t={t} tau={tau}: matching {edges:?} is not maximal"));
        }
        let matched: BTreeSet<(usize, usize)> = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        for ((from, to), value) in snap.iter() {
            if !matched.contains(&(from, to)) && prev.get(from, to).to_bits() != value.to_bits() {
                v.push(format!("t={t} tau={tau}: unmatched ({from},{to}) changed"));
            }
        }
        prev = (*snap).clone();
    }
    Check::from_violations("unmatched thresholds unchanged", v)
}

/// Each pair search logs `3|C| + 1` messages per stage, all single scalars of
/// the three permitted kinds.
pub fn bus_accounting(trace: &CoordinationTrace, grid_size: usize, sigma_floor: f64) -> Check {
    let mut v = Vec::new();
    for m in trace.bus.ledger() {
        if m.scalars != 1 || !matches!(m.kind, MessageKind::CandidateThreshold | MessageKind::UtilityScalar | MessageKind::Decision) {
            v.push(format!("non-scalar message {m:?}"));
        }
    }
    let mut expected = std::collections::BTreeMap::<(usize, usize), usize>::new();
    for (t, tau, d) in trace.decisions() {
        let c1 = ipc_candidates(d.current.0, grid_size, sigma_floor).len();
        let c2 = ipc_candidates(d.current.1, grid_size, sigma_floor).len();
        if d.stage1.len() != c1 || d.stage2.len() != c2 {
            v.push(format!("t={t} tau={tau} pair={:?}: candidate count mismatch", d.pair));
        }
        *expected.entry((t, tau)).or_default() += 3 * c1 + 1 + 3 * c2 + 1;
    }
    let mut actual = std::collections::BTreeMap::<(usize, usize), usize>::new();
    for m in trace.bus.ledger() {
        *actual.entry((m.t, m.tau)).or_default() += 1;
    }
    if expected != actual {
        v.push(format!("per-round message counts {actual:?}, expected {expected:?}"));
    }
    Check::from_violations("bus carries only accounted scalars", v)
}

/// Runs with coordination switched off send nothing.
pub fn silent_bus(trace: &CoordinationTrace) -> Check {
    let n = trace.bus.ledger().len();
    let v = if n == 0 { Vec::new() } else { vec![format!("{n} messages logged")] };
    Check::from_violations("no messages without coordination", v)
}

/// Every invariant that applies to a run with the given switches.
pub fn trace_invariants(
    trace: &CoordinationTrace,
    scenario: &NetworkScenario,
    initial: &IpcThresholds,
    coordination: bool,
    grid_size: usize,
    eps_tol: f64,
    sigma_floor: f64,
) -> Vec<Check> {
    let mut out = vec![rotation_monotone(trace, 1e-9)];
    if coordination {
        out.push(accepted_updates_improve(trace, eps_tol));
        out.push(unmatched_thresholds_frozen(trace, scenario, initial));
        out.push(bus_accounting(trace, grid_size, sigma_floor));
    } else {
        out.push(silent_bus(trace));
    }
    out
}

/// Tiny proposed and fixed-threshold runs on the high-interference layout,
/// each checked against the trace invariants, plus a determinism check.
pub fn quick_suite(dir: &std::path::Path) -> crate::error::Result<Vec<Check>> {
    use crate::harness::{run_experiment, ExperimentConfig, Overrides, ScenarioRef};
    use crate::scenarios::Scheme;

    let overrides = Overrides {
        samples: Some(2),
        eval_samples: Some(4),
        t_max: Some(1),
        t_ipc: Some(2),
        swarm_size: Some(4),
        pso_iters: Some(2),
        ..Overrides::default()
    };
    let mut out = Vec::new();
    for (name, scheme) in [("proposed", Scheme::Proposed), ("fixed", Scheme::FixedIpc(1e-8))] {
        let config = ExperimentConfig {
            scenario: ScenarioRef::Named("high_ici".into()),
            scheme,
            seeds: vec![1],
            full_scale: false,
            overrides: overrides.clone(),
            output_dir: None,
        };
        let first = dir.join(name).join("a");
        let (report, _) = run_experiment(&config, None, Some(&first))?;
        for s in &report.seeds {
            for c in &s.checks {
                out.push(Check { name: format!("{name}: {}", c.name), ..c.clone() });
            }
        }
        let second = dir.join(name).join("b");
        run_experiment(&config, None, Some(&second))?;
        let read = |d: &std::path::Path| std::fs::read(d.join("summary.csv")).map_err(|e| crate::error::Error::io(d, e));
        let same = read(&first)? == read(&second)?;
        let v = if same { Vec::new() } else { vec!["summary.csv differs between identical runs".to_string()] };
        out.push(Check::from_violations(&format!("{name}: repeated run is byte-identical"), v));
    }
    Ok(out)
}
