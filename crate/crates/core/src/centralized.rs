//! Offline centralized benchmark: network-wide WMMSE per sample, the
//! sample-average objective and a penalised PSO over every station's
//! rotations at once.

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{synthesize, FadingDraw};
use crate::coordination::ao::{per_cell_weighted, summarize, EvaluationRecord};
use crate::geometry::{rotation_penalty, BsRotation};
use crate::longterm::{pso_minimize, rotation_dims, Evaluation, PsoParams, PsoResult, SaaValue, SampleSet};
use crate::precoder::{actual_rates, solve_network_wsr, SolverOptions};
use crate::scenarios::NetworkScenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CentralizedConfig {
    pub pso: PsoParams,
    /// Scales `pso.max_iters` for a more generous search.
    pub budget_multiplier: f64,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        Self { pso: PsoParams::default(), budget_multiplier: 1.0, solver: SolverOptions::default(), seed: 0 }
    }
}

impl CentralizedConfig {
    pub fn effective_iters(&self) -> usize {
        (self.pso.max_iters as f64 * self.budget_multiplier).round() as usize
    }
}

/// Actual weighted sum-rate of one frozen sample under rotations `z` with
/// network-wide WMMSE precoding.
pub fn sample_value(scenario: &NetworkScenario, z: &[BsRotation], draw: &FadingDraw, opts: &SolverOptions) -> f64 {
    let sample = synthesize(scenario, z, draw);
    let precoders = solve_network_wsr(scenario, &sample, opts);
    actual_rates(scenario, &precoders, &sample).weighted_sum
}

/// Mean of [`sample_value`] over the frozen samples.
pub fn saa_objective(scenario: &NetworkScenario, z: &[BsRotation], samples: &SampleSet, opts: &SolverOptions) -> SaaValue {
    let per_sample = samples.draws().par_iter().map(|d| sample_value(scenario, z, d, opts)).collect();
    SaaValue::from_samples(per_sample)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralizedResult {
    pub rotations: Vec<BsRotation>,
    pub value: f64,
    pub initial_value: f64,
    pub pso: PsoResult,
    /// Wall time of every objective evaluation, seconds, in completion order.
    pub evaluation_s: Vec<f64>,
}

impl CentralizedResult {
    pub fn median_evaluation_s(&self) -> f64 {
        median(&self.evaluation_s)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn split(x: &[f64], cells: usize) -> Vec<BsRotation> {
    let per = x.len() / cells;
    x.chunks_exact(per).map(BsRotation::from_slice).collect()
}

/// Maximise `Ĵ_S(z) - κ Σ_m Ψ(z_m)` over all rotations, warm-started at `z0`.
/// With zero iterations this is the fixed-rotation centralized benchmark.
pub fn centralized_search(
    scenario: &NetworkScenario,
    z0: &[BsRotation],
    cfg: &CentralizedConfig,
    samples: &SampleSet,
) -> CentralizedResult {
    let cells = scenario.num_cells();
    let dims: Vec<_> = (0..cells).flat_map(|_| rotation_dims(scenario)).collect();
    let warm: Vec<f64> = z0.iter().flat_map(BsRotation::to_vec).collect();
    let times = Mutex::new(Vec::new());
    let geometry = &scenario.array.geometry;
    let objective = |x: &[f64]| {
        let z = split(x, cells);
        let penalty: f64 = z.iter().map(|zm| rotation_penalty(zm, geometry)).sum();
        let clock = Instant::now();
        let value = saa_objective(scenario, &z, samples, &cfg.solver).mean;
        times.lock().expect("timing lock").push(clock.elapsed().as_secs_f64());
        Evaluation { value: -value + cfg.pso.penalty * penalty, penalty }
    };
    let params = PsoParams { max_iters: cfg.effective_iters(), ..cfg.pso.clone() };
    let initial_value = saa_objective(scenario, z0, samples, &cfg.solver).mean;
    let pso = pso_minimize(objective, &dims, &warm, &params, cfg.seed);
    let (rotations, value) = if pso.feasible && -pso.best_value >= initial_value {
        (split(&pso.best_point, cells), -pso.best_value)
    } else {
        (z0.to_vec(), initial_value)
    };
    CentralizedResult { rotations, value, initial_value, pso, evaluation_s: times.into_inner().expect("timing lock") }
}

/// Network-WMMSE performance of fixed rotations on the evaluation samples.
/// The surrogate columns repeat the actual values since no surrogate exists.
pub fn evaluate_centralized(
    scenario: &NetworkScenario,
    z: &[BsRotation],
    eval: &SampleSet,
    opts: &SolverOptions,
    iteration: usize,
) -> EvaluationRecord {
    let per_sample: Vec<(Vec<f64>, Vec<f64>)> = eval
        .draws()
        .par_iter()
        .map(|draw| {
            let sample = synthesize(scenario, z, draw);
            let precoders = solve_network_wsr(scenario, &sample, opts);
            let per_cell = per_cell_weighted(scenario, &actual_rates(scenario, &precoders, &sample).per_user);
            (per_cell.clone(), per_cell)
        })
        .collect();
    summarize(iteration, scenario.num_cells(), &per_sample)
}
