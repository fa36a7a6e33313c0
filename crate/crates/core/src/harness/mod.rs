//! Experiment runner: resolves a config, executes one scheme per seed and
//! persists traces, summaries, timings and checkpoints.

pub mod config;
mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::centralized::{centralized_search, evaluate_centralized, median, CentralizedConfig, CentralizedResult};
use crate::coordination::ao::{ao_run, AoConfig, AoState, CoordinationTrace, EvaluationRecord, TraceEvent};
use crate::error::{Error, Result};
use crate::longterm::{SaaContext, SampleSet};
use crate::scenarios::{NetworkScenario, Scheme};
use crate::seeding::{self, Domain};
use crate::selftest::{trace_invariants, Check};

pub use config::{ExperimentConfig, Overrides, RunParams, ScenarioRef};
pub use output::{read_summary, SummaryRow};

/// Training samples for the searches and a disjoint evaluation set.
pub fn sample_sets(scenario: &NetworkScenario, params: &RunParams, seed: u64) -> (SampleSet, SampleSet) {
    let train = SampleSet::first(scenario, seed, params.samples);
    let eval = SampleSet::first(scenario, seeding::derive(seed, Domain::Evaluation, &[]), params.eval_samples);
    (train, eval)
}

pub fn ao_config(params: &RunParams, scheme: Scheme, seed: u64) -> AoConfig {
    let toggles = scheme.toggles();
    AoConfig {
        t_max: if toggles.coordination || toggles.optimize_rotation { params.t_max } else { 0 },
        t_ipc: params.t_ipc,
        grid_size: params.grid_size,
        eps_tol: params.eps_tol,
        sigma_floor: params.sigma_floor,
        coordination: toggles.coordination,
        optimize_rotation: toggles.optimize_rotation,
        use_ipc: toggles.ipc,
        pso: params.pso.clone(),
        search_opts: params.search_opts.clone(),
        eval_opts: params.eval_opts.clone(),
        seed,
    }
}

pub fn initial_state(scenario: &NetworkScenario, params: &RunParams, scheme: Scheme) -> AoState {
    let sigma0 = match scheme {
        Scheme::FixedIpc(s) => s,
        _ => params.sigma0,
    };
    AoState::initial(scenario, params.initial_tilt, sigma0)
}

/// Outcome of one scheme on one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub scheme: Scheme,
    pub state: AoState,
    pub trace: CoordinationTrace,
    pub centralized: Option<CentralizedResult>,
    pub checks: Vec<Check>,
}

impl SeedRun {
    pub fn evaluations(&self) -> Vec<&EvaluationRecord> {
        self.trace.evaluations().collect()
    }

    pub fn final_evaluation(&self) -> &EvaluationRecord {
        self.trace.evaluations().last().expect("every run has an initial evaluation")
    }

    /// Median over AO iterations and cells of the per-station wall time.
    pub fn median_per_bs_s(&self) -> f64 {
        let all: Vec<f64> = self.trace.timings.per_cell_s.iter().flatten().copied().collect();
        median(&all)
    }

    pub fn median_centralized_eval_s(&self) -> Option<f64> {
        self.centralized.as_ref().map(CentralizedResult::median_evaluation_s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    state: AoState,
    trace: CoordinationTrace,
}

fn fingerprint(scenario: &NetworkScenario, params: &RunParams, scheme: Scheme, seed: u64) -> String {
    let v = serde_json::json!({ "scenario": scenario, "params": params, "scheme": scheme, "seed": seed });
    v.to_string()
}

/// Run one scheme on one seed. With `dir` set, a checkpoint is written after
/// every AO iteration and a matching checkpoint found there is resumed.
pub fn run_seed(
    scenario: &NetworkScenario,
    params: &RunParams,
    scheme: Scheme,
    seed: u64,
    dir: Option<&Path>,
) -> Result<SeedRun> {
    let (train, eval) = sample_sets(scenario, params, seed);
    let state0 = initial_state(scenario, params, scheme);

    if scheme.toggles().centralized {
        let cfg = CentralizedConfig {
            pso: params.pso.clone(),
            budget_multiplier: if scheme == Scheme::CentralizedFpa { 0.0 } else { params.centralized_budget },
            solver: params.search_opts.clone(),
            seed: seeding::derive(seed, Domain::Centralized, &[]),
        };
        let mut trace = CoordinationTrace::default();
        let first = evaluate_centralized(scenario, &state0.rotations, &eval, &params.eval_opts, 0);
        trace.events.push(TraceEvent::Evaluation(first));
        let result = centralized_search(scenario, &state0.rotations, &cfg, &train);
        let mut state = state0.clone();
        if scheme == Scheme::Centralized {
            trace.events.push(TraceEvent::Evaluation(evaluate_centralized(
                scenario,
                &result.rotations,
                &eval,
                &params.eval_opts,
                1,
            )));
            state.rotations = result.rotations.clone();
            state.t = 1;
        }
        let checks = vec![crate::selftest::silent_bus(&trace)];
        return Ok(SeedRun { seed, scheme, state, trace, centralized: Some(result), checks });
    }

    let cfg = ao_config(params, scheme, seed);
    let contexts: Vec<SaaContext> =
        (0..scenario.num_cells()).map(|cell| SaaContext { cell, samples: train.clone() }).collect();
    let fp = fingerprint(scenario, params, scheme, seed);
    let ckpt_path = dir.map(|d| d.join("checkpoint.json"));
    let (start, trace0) = match ckpt_path.as_deref().map(output::read_checkpoint::<Checkpoint>) {
        Some(Ok(Some(c))) if c.fingerprint == fp => {
            log::info!("resuming seed {seed} from iteration {}", c.state.t);
            (c.state, c.trace)
        }
        Some(Err(e)) => return Err(e),
        _ => (state0.clone(), CoordinationTrace::default()),
    };
    let mut write_error = None;
    let (trace, state) = ao_run(scenario, start, trace0, &cfg, &contexts, &eval, |state, trace| {
        log::info!("seed {seed}: AO iteration {} done", state.t);
        if let Some(path) = &ckpt_path {
            let c = Checkpoint { fingerprint: fp.clone(), state: state.clone(), trace: trace.clone() };
            if let Err(e) = output::write_json(path, &c) {
                write_error.get_or_insert(e);
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let checks = trace_invariants(
        &trace,
        scenario,
        &state0.thresholds,
        cfg.coordination,
        cfg.grid_size,
        cfg.eps_tol,
        cfg.sigma_floor,
    );
    Ok(SeedRun { seed, scheme, state, trace, centralized: None, checks })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub final_actual_sum: f64,
    pub final_surrogate_sum: f64,
    pub actual_std_error: f64,
    pub messages: usize,
    pub bytes: usize,
    pub checks: Vec<Check>,
}

/// Machine-readable outcome of `run_experiment`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scheme: String,
    pub scenario: String,
    pub seeds: Vec<SeedReport>,
    pub all_checks_passed: bool,
    pub output_dir: PathBuf,
}

/// Execute the configured scheme for every seed and write the results under
/// `out` (or the config's own output directory).
pub fn run_experiment(config: &ExperimentConfig, base: Option<&Path>, out: Option<&Path>) -> Result<(ExperimentReport, Vec<SeedRun>)> {
    let (scenario, params) = config.resolve(base)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::InvalidConfig("no output directory given".into()))?;
    run_resolved(config, &scenario, &params, &out)
}

pub fn run_resolved(
    config: &ExperimentConfig,
    scenario: &NetworkScenario,
    params: &RunParams,
    out: &Path,
) -> Result<(ExperimentReport, Vec<SeedRun>)> {
    output::create_dir(out)?;
    output::write_json(&out.join("config.json"), &output::Snapshot { config, params, scenario })?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let dir = out.join(format!("seed_{seed}"));
        output::create_dir(&dir)?;
        let run = run_seed(scenario, params, config.scheme, seed, Some(&dir))?;
        output::write_seed(&dir, scenario, &run)?;
        runs.push(run);
    }
    output::write_summary(&out.join("summary.csv"), scenario, &runs)?;
    output::write_timings(&out.join("timings.csv"), &runs)?;
    let seeds: Vec<SeedReport> = runs
        .iter()
        .map(|r| {
            let last = r.final_evaluation();
            let counts = r.trace.bus.counts();
            SeedReport {
                seed: r.seed,
                final_actual_sum: last.actual_sum,
                final_surrogate_sum: last.surrogate_sum,
                actual_std_error: last.actual_std_error,
                messages: counts.messages,
                bytes: counts.bytes,
                checks: r.checks.clone(),
            }
        })
        .collect();
    let report = ExperimentReport {
        scheme: config.scheme.label(),
        scenario: scenario.name.clone(),
        all_checks_passed: seeds.iter().all(|s| s.checks.iter().all(|c| c.passed)),
        seeds,
        output_dir: out.to_path_buf(),
    };
    output::write_json(&out.join("report.json"), &report)?;
    Ok((report, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma_w: f64,
    pub seed: u64,
    pub utility: f64,
    pub surrogate: f64,
}

/// Fixed, uniform thresholds with rotation search and no negotiation; one
/// row per threshold and seed.
pub fn sweep_fixed_ipc(config: &ExperimentConfig, base: Option<&Path>, sigmas: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &sigma in sigmas {
        let c = ExperimentConfig { scheme: Scheme::FixedIpc(sigma), ..config.clone() };
        let (scenario, params) = c.resolve(base)?;
        let dir = out.join(format!("fixed_ipc_{sigma:e}"));
        let (_, runs) = run_resolved(&c, &scenario, &params, &dir)?;
        for r in &runs {
            let last = r.final_evaluation();
            rows.push(SweepRow { sigma_w: sigma, seed: r.seed, utility: last.actual_sum, surrogate: last.surrogate_sum });
        }
    }
    output::write_rows(&out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityRow {
    pub cells: usize,
    pub seed: u64,
    pub proposed: f64,
    pub centralized: f64,
    pub per_bs_iteration_s: f64,
    pub centralized_eval_s: f64,
}

/// Proposed and centralized schemes on each lattice size. Rates go to
/// `scalability.csv`; the wall times, which are not reproducible, go to
/// `scalability_timings.csv`.
pub fn scalability_run(config: &ExperimentConfig, base: Option<&Path>, sizes: &[usize], out: &Path) -> Result<Vec<ScalabilityRow>> {
    let mut rows = Vec::new();
    for &m in sizes {
        let lattice = ScenarioRef::Named(format!("lattice_{m}"));
        let proposed = ExperimentConfig { scenario: lattice.clone(), scheme: Scheme::Proposed, ..config.clone() };
        let central = ExperimentConfig { scenario: lattice, scheme: Scheme::Centralized, ..config.clone() };
        let (scenario, params) = proposed.resolve(base)?;
        let (_, p_runs) = run_resolved(&proposed, &scenario, &params, &out.join(format!("lattice_{m}/proposed")))?;
        let (_, c_runs) = run_resolved(&central, &scenario, &params, &out.join(format!("lattice_{m}/centralized")))?;
        for (p, c) in p_runs.iter().zip(&c_runs) {
            rows.push(ScalabilityRow {
                cells: m,
                seed: p.seed,
                proposed: p.final_evaluation().actual_sum,
                centralized: c.final_evaluation().actual_sum,
                per_bs_iteration_s: p.median_per_bs_s(),
                centralized_eval_s: c.median_centralized_eval_s().unwrap_or(0.0),
            });
        }
    }
    output::write_scalability(out, &rows)?;
    Ok(rows)
}
