use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::BsRotation;
use crate::longterm::{saa_cell_rate, CellObjective, SaaContext};
use crate::precoder::{IpcThresholds, SolverOptions};
use crate::scenarios::NetworkScenario;

use super::bus::{MessageBus, MessageKind};

/// Relative tolerance for treating two thresholds or utilities as equal.
pub const REL_EQ: f64 = 1e-12;

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_EQ * a.abs().max(b.abs())
}

/// Log-spaced candidates between `max(0.1σ, σ_fl)` and `max(10σ, lb)`,
/// plus the current value itself. Ascending, duplicates removed; a grid
/// point that coincides with `sigma_cur` is represented by `sigma_cur`.
pub fn ipc_candidates(sigma_cur: f64, grid_size: usize, sigma_floor: f64) -> Vec<f64> {
    let lb = (0.1 * sigma_cur).max(sigma_floor);
    let ub = (10.0 * sigma_cur).max(lb);
    let mut out = vec![sigma_cur];
    let steps = grid_size.max(2) - 1;
    for r in 0..=steps {
        let x = if r == 0 {
            lb
        } else if r == steps {
            ub
        } else {
            lb * (ub / lb).powf(r as f64 / steps as f64)
        };
        if !out.iter().any(|&y| rel_eq(x, y)) {
            out.push(x);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RateKey {
    cell: usize,
    rotation: Vec<u64>,
    local: Vec<u64>,
    strict: bool,
}

/// Memo of sample-average cell rates keyed by everything they depend on:
/// the cell, its rotation and its local thresholds.
#[derive(Debug, Default)]
pub struct RateCache {
    map: Mutex<HashMap<RateKey, f64>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl RateCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rate(
        &self,
        scenario: &NetworkScenario,
        z_m: &BsRotation,
        thresholds: &IpcThresholds,
        ctx: &SaaContext,
        opts: &SolverOptions,
    ) -> f64 {
        let key = RateKey {
            cell: ctx.cell,
            rotation: z_m.to_vec().iter().map(|x| x.to_bits()).collect(),
            local: thresholds.local_vector(ctx.cell, &scenario.graph).iter().map(|x| x.to_bits()).collect(),
            strict: opts.strict,
        };
        if let Some(&v) = self.map.lock().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = saa_cell_rate(scenario, z_m, CellObjective::Ipc(thresholds), ctx, opts).mean;
        self.map.lock().expect("cache lock").insert(key, v);
        v
    }

    /// `(hits, misses)` so far.
    pub fn stats(&self) -> (usize, usize) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}

/// Inputs shared by every pairwise search of one coordination round.
pub struct PairEnv<'a> {
    pub scenario: &'a NetworkScenario,
    pub rotations: &'a [BsRotation],
    /// One context per cell.
    pub contexts: &'a [SaaContext],
    pub opts: &'a SolverOptions,
    pub grid_size: usize,
    pub eps_tol: f64,
    pub sigma_floor: f64,
    pub cache: &'a RateCache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub threshold: f64,
    pub rate_m: f64,
    pub rate_n: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDecision {
    pub pair: (usize, usize),
    /// `(σ_mn, σ_nm)` before the search.
    pub current: (f64, f64),
    pub stage1: Vec<CandidateEval>,
    pub x_bar: f64,
    pub stage2: Vec<CandidateEval>,
    pub y_bar: f64,
    pub phi_cur: f64,
    pub phi_new: f64,
    pub accepted: bool,
    /// `(σ_mn, σ_nm)` after the decision.
    pub updated: (f64, f64),
}

/// Two-stage grid search over the directed thresholds of one pair.
///
/// Cell `m` (the smaller index) proposes candidates for `σ_mn`, cell `n`
/// for `σ_nm`. For every candidate each side reports its own sample-average
/// rate to the other; the proposer announces its pick. The update is kept
/// only when the pair utility improves by more than `eps_tol`.
pub fn pairwise_search(
    pair: (usize, usize),
    thresholds: &IpcThresholds,
    env: &PairEnv<'_>,
    t: usize,
    tau: usize,
    bus: &mut MessageBus,
) -> PairDecision {
    let (m, n) = pair;
    let current = (thresholds.get(m, n), thresholds.get(n, m));
    let phi = |x: f64, y: f64| {
        let mut local = thresholds.clone();
        local.set(m, n, x);
        local.set(n, m, y);
        let rate = |c: usize| env.cache.rate(env.scenario, &env.rotations[c], &local, &env.contexts[c], env.opts);
        let (rate_m, rate_n) = (rate(m), rate(n));
        (rate_m, rate_n, rate_m + rate_n)
    };

    let stage = |proposer: usize, listener: usize, cands: &[f64], eval: &(dyn Fn(f64) -> (f64, f64, f64) + Sync), bus: &mut MessageBus| {
        let evals: Vec<CandidateEval> = cands
            .par_iter()
            .map(|&c| {
                let (rate_m, rate_n, utility) = eval(c);
                CandidateEval { threshold: c, rate_m, rate_n, utility }
            })
            .collect();
        let split = |e: &CandidateEval| if proposer == m { (e.rate_m, e.rate_n) } else { (e.rate_n, e.rate_m) };
        for e in &evals {
            bus.send(t, tau, proposer, listener, MessageKind::CandidateThreshold, e.threshold);
            let (own, other) = split(e);
            bus.send(t, tau, proposer, listener, MessageKind::UtilityScalar, own);
            bus.send(t, tau, listener, proposer, MessageKind::UtilityScalar, other);
        }
        let mut best = 0;
        for (i, e) in evals.iter().enumerate() {
            if e.utility > evals[best].utility && !rel_eq(e.utility, evals[best].utility) {
                best = i;
            }
        }
        (evals, best)
    };

    let cands_x = ipc_candidates(current.0, env.grid_size, env.sigma_floor);
    let (stage1, bx) = stage(m, n, &cands_x, &|x| phi(x, current.1), bus);
    let x_bar = stage1[bx].threshold;
    bus.send(t, tau, m, n, MessageKind::Decision, x_bar);
    let phi_cur = stage1
        .iter()
        .find(|e| e.threshold == current.0)
        .expect("current threshold is always a candidate")
        .utility;

    let cands_y = ipc_candidates(current.1, env.grid_size, env.sigma_floor);
    let (stage2, by) = stage(n, m, &cands_y, &|y| phi(x_bar, y), bus);
    let y_bar = stage2[by].threshold;
    let phi_new = stage2[by].utility;
    let accepted = phi_new > phi_cur + env.eps_tol;
    bus.send(t, tau, n, m, MessageKind::Decision, if accepted { 1.0 } else { 0.0 });
    let updated = if accepted { (x_bar, y_bar) } else { current };
    PairDecision { pair, current, stage1, x_bar, stage2, y_bar, phi_cur, phi_new, accepted, updated }
}
