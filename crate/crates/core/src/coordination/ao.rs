use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{synthesize, CellChannels};
use crate::geometry::BsRotation;
use crate::longterm::{rotation_update, solve_cell, CellObjective, PsoParams, SaaContext, SampleSet};
use crate::precoder::{actual_rates, BsPrecoder, IpcThresholds, PrecoderSet, SolverOptions};
use crate::scenarios::NetworkScenario;
use crate::seeding::{self, Domain};

use super::bus::{BusCounts, MessageBus};
use super::ipc::{pairwise_search, PairDecision, PairEnv, RateCache};
use super::matching::random_maximal_matching;

/// Everything that changes across AO iterations; also the checkpoint payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoState {
    /// Number of completed AO iterations.
    pub t: usize,
    pub thresholds: IpcThresholds,
    pub rotations: Vec<BsRotation>,
}

impl AoState {
    /// Uniform azimuths at the given tilt and one shared threshold.
    pub fn initial(scenario: &NetworkScenario, tilt: f64, sigma0: f64) -> Self {
        Self {
            t: 0,
            thresholds: IpcThresholds::uniform(&scenario.graph, sigma0),
            rotations: vec![BsRotation::uniform(scenario.num_surfaces, tilt); scenario.num_cells()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub t_max: usize,
    pub t_ipc: usize,
    pub grid_size: usize,
    pub eps_tol: f64,
    pub sigma_floor: f64,
    /// Run the pairwise threshold negotiation.
    pub coordination: bool,
    /// Run the per-station rotation search.
    pub optimize_rotation: bool,
    /// Solve the leakage-constrained local problem (otherwise plain WMMSE
    /// against receiver noise).
    pub use_ipc: bool,
    pub pso: PsoParams,
    /// Solver used inside threshold and rotation searches.
    pub search_opts: SolverOptions,
    /// Solver used for reported evaluations.
    pub eval_opts: SolverOptions,
    pub seed: u64,
}

/// Network performance of one state on the evaluation samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    /// 0 for the initial state, `t + 1` after AO iteration `t`.
    pub iteration: usize,
    pub surrogate_sum: f64,
    pub actual_sum: f64,
    pub per_cell_surrogate: Vec<f64>,
    pub per_cell_actual: Vec<f64>,
    /// Standard error of `actual_sum` over the evaluation samples.
    pub actual_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationStep {
    pub t: usize,
    pub cell: usize,
    pub rate_before: f64,
    pub rate_after: f64,
    pub strict_rate: f64,
    pub feasible: bool,
    pub evaluations: usize,
    pub rotation: BsRotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Evaluation(EvaluationRecord),
    Matching { t: usize, tau: usize, edges: Vec<(usize, usize)> },
    PairSearch { t: usize, tau: usize, decision: PairDecision },
    Thresholds { t: usize, tau: usize, thresholds: IpcThresholds },
    Rotation(RotationStep),
    Iteration { t: usize, messages: BusCounts },
}

/// Wall-clock measurements, kept apart from the deterministic trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Per AO iteration: seconds of computation attributed to each cell.
    pub per_cell_s: Vec<Vec<f64>>,
    /// Per AO iteration: total wall time.
    pub iteration_s: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoordinationTrace {
    pub events: Vec<TraceEvent>,
    pub bus: MessageBus,
    #[serde(default)]
    pub timings: Timings,
}

impl CoordinationTrace {
    pub fn evaluations(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Evaluation(r) => Some(r),
            _ => None,
        })
    }

    pub fn rotation_steps(&self) -> impl Iterator<Item = &RotationStep> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Rotation(r) => Some(r),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = (usize, usize, &PairDecision)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::PairSearch { t, tau, decision } => Some((*t, *tau, decision)),
            _ => None,
        })
    }

    pub fn threshold_snapshots(&self) -> impl Iterator<Item = (usize, usize, &IpcThresholds)> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Thresholds { t, tau, thresholds } => Some((*t, *tau, thresholds)),
            _ => None,
        })
    }

    pub fn matchings(&self) -> impl Iterator<Item = (usize, usize, &[(usize, usize)])> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Matching { t, tau, edges } => Some((*t, *tau, edges.as_slice())),
            _ => None,
        })
    }
}

/// Solve every cell's local problem on each evaluation sample and score the
/// result with the true interference.
pub fn evaluate_distributed(
    scenario: &NetworkScenario,
    rotations: &[BsRotation],
    objective: CellObjective<'_>,
    eval: &SampleSet,
    opts: &SolverOptions,
    iteration: usize,
) -> EvaluationRecord {
    let cells = scenario.num_cells();
    let per_sample: Vec<(Vec<f64>, Vec<f64>)> = eval
        .draws()
        .par_iter()
        .map(|draw| {
            let sample = synthesize(scenario, rotations, draw);
            let mut surrogate = Vec::with_capacity(cells);
            let mut per_bs = Vec::with_capacity(cells);
            for m in 0..cells {
                let ch = CellChannels::from_sample(scenario, m, &sample);
                let sol = solve_cell(scenario, m, &ch, objective, opts);
                surrogate.push(sol.objective);
                per_bs.push(BsPrecoder { w: sol.w, diagnostics: sol.diagnostics });
            }
            let report = actual_rates(scenario, &PrecoderSet { per_bs }, &sample);
            (surrogate, per_cell_weighted(scenario, &report.per_user))
        })
        .collect();
    summarize(iteration, cells, &per_sample)
}

/// Weighted rate of each cell from per-user rates.
pub fn per_cell_weighted(scenario: &NetworkScenario, per_user: &[f64]) -> Vec<f64> {
    (0..scenario.num_cells())
        .map(|m| scenario.users_of(m).map(|k| scenario.weights()[k] * per_user[k]).sum())
        .collect()
}

pub(crate) fn summarize(iteration: usize, cells: usize, per_sample: &[(Vec<f64>, Vec<f64>)]) -> EvaluationRecord {
    let s = per_sample.len().max(1) as f64;
    let mut per_cell_surrogate = vec![0.0; cells];
    let mut per_cell_actual = vec![0.0; cells];
    for (sur, act) in per_sample {
        for m in 0..cells {
            per_cell_surrogate[m] += sur[m] / s;
            per_cell_actual[m] += act[m] / s;
        }
    }
    let sums: Vec<f64> = per_sample.iter().map(|(_, a)| a.iter().sum()).collect();
    let actual_std_error = crate::longterm::SaaValue::from_samples(sums).std_error();
    EvaluationRecord {
        iteration,
        surrogate_sum: per_cell_surrogate.iter().sum(),
        actual_sum: per_cell_actual.iter().sum(),
        per_cell_surrogate,
        per_cell_actual,
        actual_std_error,
    }
}

fn objective_of<'a>(cfg: &AoConfig, thresholds: &'a IpcThresholds) -> CellObjective<'a> {
    if cfg.use_ipc {
        CellObjective::Ipc(thresholds)
    } else {
        CellObjective::NoIpc
    }
}

/// Alternate threshold negotiation and rotation updates for
/// `cfg.t_max - state.t` iterations.
///
/// `trace` is extended in place, so a run restored from a checkpoint keeps
/// its history. `on_iteration` is called after every completed iteration
/// with the new state and the trace so far.
pub fn ao_run(
    scenario: &NetworkScenario,
    mut state: AoState,
    mut trace: CoordinationTrace,
    cfg: &AoConfig,
    contexts: &[SaaContext],
    eval: &SampleSet,
    mut on_iteration: impl FnMut(&AoState, &CoordinationTrace),
) -> (CoordinationTrace, AoState) {
    let cells = scenario.num_cells();
    if trace.events.is_empty() {
        let record = evaluate_distributed(
            scenario,
            &state.rotations,
            objective_of(cfg, &state.thresholds),
            eval,
            &cfg.eval_opts,
            state.t,
        );
        trace.events.push(TraceEvent::Evaluation(record));
    }
    let cache = RateCache::new();

    while state.t < cfg.t_max {
        let t = state.t;
        let started = Instant::now();
        let mut per_cell_s = vec![0.0; cells];

        if cfg.coordination {
            for tau in 0..cfg.t_ipc {
                let matching = random_maximal_matching(&scenario.graph, seeding::derive(cfg.seed, Domain::Matching, &[t as u64, tau as u64]));
                trace.events.push(TraceEvent::Matching { t, tau, edges: matching.clone() });
                let env = PairEnv {
                    scenario,
                    rotations: &state.rotations,
                    contexts,
                    opts: &cfg.search_opts,
                    grid_size: cfg.grid_size,
                    eps_tol: cfg.eps_tol,
                    sigma_floor: cfg.sigma_floor,
                    cache: &cache,
                };
                let results: Vec<(PairDecision, MessageBus, f64)> = matching
                    .par_iter()
                    .map(|&pair| {
                        let mut bus = MessageBus::new();
                        let clock = Instant::now();
                        let d = pairwise_search(pair, &state.thresholds, &env, t, tau, &mut bus);
                        (d, bus, clock.elapsed().as_secs_f64())
                    })
                    .collect();
                for (d, bus, secs) in results {
                    // both ends evaluate their own rates; split the pair's time evenly
                    per_cell_s[d.pair.0] += secs / 2.0;
                    per_cell_s[d.pair.1] += secs / 2.0;
                    if d.accepted {
                        state.thresholds.set(d.pair.0, d.pair.1, d.updated.0);
                        state.thresholds.set(d.pair.1, d.pair.0, d.updated.1);
                    }
                    trace.bus.extend(bus);
                    trace.events.push(TraceEvent::PairSearch { t, tau, decision: d });
                }
                trace.events.push(TraceEvent::Thresholds { t, tau, thresholds: state.thresholds.clone() });
            }
        }

        if cfg.optimize_rotation {
            let objective = objective_of(cfg, &state.thresholds);
            let updates: Vec<_> = (0..cells)
                .into_par_iter()
                .map(|m| {
                    let clock = Instant::now();
                    let seed = seeding::derive(cfg.seed, Domain::Pso, &[t as u64, m as u64]);
                    let u = rotation_update(
                        scenario,
                        &state.rotations[m],
                        objective,
                        &contexts[m],
                        &cfg.pso,
                        &cfg.search_opts,
                        seed,
                    );
                    (u, clock.elapsed().as_secs_f64())
                })
                .collect();
            for (m, (u, secs)) in updates.into_iter().enumerate() {
                per_cell_s[m] += secs;
                trace.events.push(TraceEvent::Rotation(RotationStep {
                    t,
                    cell: m,
                    rate_before: u.rate_before,
                    rate_after: u.rate_after,
                    strict_rate: u.strict_rate,
                    feasible: u.pso.feasible,
                    evaluations: u.pso.evaluations,
                    rotation: u.rotation.clone(),
                }));
                state.rotations[m] = u.rotation;
            }
        }

        let record = evaluate_distributed(
            scenario,
            &state.rotations,
            objective_of(cfg, &state.thresholds),
            eval,
            &cfg.eval_opts,
            t + 1,
        );
        trace.events.push(TraceEvent::Evaluation(record));
        trace.events.push(TraceEvent::Iteration { t, messages: trace.bus.counts_for(t) });
        trace.timings.per_cell_s.push(per_cell_s);
        trace.timings.iteration_s.push(started.elapsed().as_secs_f64());
        state.t = t + 1;
        on_iteration(&state, &trace);
    }
    (trace, state)
}
