//! Long-term layer: a bounded particle swarm, the sample-average cell rate
//! and the per-station rotation update.

pub mod pso;

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{cell_channels, CellChannels, FadingDraw};
use crate::geometry::{rotation_penalty, BsRotation};
use crate::precoder::{solve_p3, solve_p4, CellProblem, CellSolution, IpcThresholds, SolverOptions};
use crate::scenarios::NetworkScenario;

pub use pso::{pso_minimize, DimSpec, Evaluation, PsoParams, PsoResult};

/// A frozen list of Monte Carlo samples, shared by every evaluation that
/// refers to it.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub seed: u64,
    pub indices: Vec<u64>,
    draws: Arc<Vec<FadingDraw>>,
}

impl SampleSet {
    pub fn new(scenario: &NetworkScenario, seed: u64, indices: Vec<u64>) -> Self {
        let draws = indices.iter().map(|&s| FadingDraw::generate(scenario, s, seed)).collect();
        Self { seed, indices, draws: Arc::new(draws) }
    }

    /// Samples `0..count`.
    pub fn first(scenario: &NetworkScenario, seed: u64, count: usize) -> Self {
        Self::new(scenario, seed, (0..count as u64).collect())
    }

    pub fn draws(&self) -> &[FadingDraw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Everything a station needs to evaluate its sample-average rate.
#[derive(Debug, Clone)]
pub struct SaaContext {
    pub cell: usize,
    pub samples: SampleSet,
}

/// How a station models out-of-cell interference.
#[derive(Debug, Clone, Copy)]
pub enum CellObjective<'a> {
    /// Leakage caps on victims; incoming caps enter the noise term.
    Ipc(&'a IpcThresholds),
    /// Plain per-cell WMMSE against receiver noise only.
    NoIpc,
}

/// Local problem of cell `m` for one channel draw.
pub fn solve_cell(
    scenario: &NetworkScenario,
    m: usize,
    channels: &CellChannels,
    objective: CellObjective<'_>,
    opts: &SolverOptions,
) -> CellSolution {
    let weights = scenario.cell_weights(m);
    match objective {
        CellObjective::NoIpc => solve_p3(&channels.in_cell, weights, scenario.noise_power_w, scenario.p_max_w, opts),
        CellObjective::Ipc(t) => {
            let problem = CellProblem {
                in_cell: &channels.in_cell,
                weights,
                victims: &channels.victims,
                victim_caps: channels.victim_cells.iter().map(|&n| t.get(m, n)).collect(),
                noise_plus_incoming: scenario.noise_power_w + t.incoming_sum(m, &scenario.graph),
                p_max: scenario.p_max_w,
            };
            solve_p4(&problem, opts)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaValue {
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

impl SaaValue {
    pub fn from_samples(per_sample: Vec<f64>) -> Self {
        let mean = if per_sample.is_empty() { 0.0 } else { per_sample.iter().sum::<f64>() / per_sample.len() as f64 };
        Self { mean, per_sample }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        let n = self.per_sample.len();
        if n < 2 {
            return 0.0;
        }
        let var = self.per_sample.iter().map(|x| (x - self.mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Sample-average surrogate weighted rate of the context's cell.
pub fn saa_cell_rate(
    scenario: &NetworkScenario,
    z_m: &BsRotation,
    objective: CellObjective<'_>,
    ctx: &SaaContext,
    opts: &SolverOptions,
) -> SaaValue {
    let per_sample = ctx
        .samples
        .draws()
        .par_iter()
        .map(|draw| {
            let ch = cell_channels(scenario, ctx.cell, z_m, draw);
            solve_cell(scenario, ctx.cell, &ch, objective, opts).objective
        })
        .collect();
    SaaValue::from_samples(per_sample)
}

/// `[azimuth, tilt]` per surface.
pub fn rotation_dims(scenario: &NetworkScenario) -> Vec<DimSpec> {
    let g = &scenario.array.geometry;
    (0..scenario.num_surfaces)
        .flat_map(|_| [DimSpec::Periodic { period: TAU }, DimSpec::Bounded { lo: g.tilt_min, hi: g.tilt_max }])
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationUpdate {
    pub rotation: BsRotation,
    /// Sample-average rate of the warm start, default solver mode.
    pub rate_before: f64,
    /// Same quantity at the returned rotation.
    pub rate_after: f64,
    /// Returned rotation re-scored with strict feasibility.
    pub strict_rate: f64,
    pub pso: PsoResult,
}

/// Minimise `-R̂_m + κΨ` by PSO warm-started at `z_m`.
pub fn rotation_update(
    scenario: &NetworkScenario,
    z_m: &BsRotation,
    objective: CellObjective<'_>,
    ctx: &SaaContext,
    params: &PsoParams,
    opts: &SolverOptions,
    seed: u64,
) -> RotationUpdate {
    let geometry = &scenario.array.geometry;
    let search = opts.clone();
    let f = |x: &[f64]| {
        let z = BsRotation::from_slice(x);
        let penalty = rotation_penalty(&z, geometry);
        let rate = saa_cell_rate(scenario, &z, objective, ctx, &search).mean;
        Evaluation { value: -rate + params.penalty * penalty, penalty }
    };
    let warm = z_m.to_vec();
    let rate_before = saa_cell_rate(scenario, z_m, objective, ctx, &search).mean;
    let pso = pso_minimize(f, &rotation_dims(scenario), &warm, params, seed);
    let (rotation, rate_after) = if pso.feasible && -pso.best_value >= rate_before {
        (BsRotation::from_slice(&pso.best_point), -pso.best_value)
    } else {
        (z_m.clone(), rate_before)
    };
    let strict = SolverOptions { strict: true, ..opts.clone() };
    let strict_rate = saa_cell_rate(scenario, &rotation, objective, ctx, &strict).mean;
    RotationUpdate { rotation, rate_before, rate_after, strict_rate, pso }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::builtin;

    fn ctx(s: &NetworkScenario, cell: usize, n: usize) -> SaaContext {
        SaaContext { cell, samples: SampleSet::first(s, 5, n) }
    }

    #[test]
    fn single_sample_equals_direct_solve() {
        let s = builtin("high_ici").unwrap();
        let z = BsRotation::uniform(3, 30f64.to_radians());
        let t = IpcThresholds::uniform(&s.graph, 1e-8);
        let c = ctx(&s, 1, 1);
        let opts = SolverOptions::default();
        let v = saa_cell_rate(&s, &z, CellObjective::Ipc(&t), &c, &opts);
        let ch = cell_channels(&s, 1, &z, &c.samples.draws()[0]);
        let direct = solve_cell(&s, 1, &ch, CellObjective::Ipc(&t), &opts).objective;
        assert_eq!(v.mean, direct);
        let again = saa_cell_rate(&s, &z, CellObjective::Ipc(&t), &c, &opts);
        assert_eq!(v, again);
    }

    #[test]
    fn rotation_update_never_degrades() {
        let s = builtin("high_ici").unwrap();
        let z = BsRotation::uniform(3, 30f64.to_radians());
        let c = ctx(&s, 0, 2);
        let params = PsoParams { swarm_size: 4, max_iters: 2, ..PsoParams::default() };
        let opts = SolverOptions { max_iters: 10, ..SolverOptions::default() };
        let u = rotation_update(&s, &z, CellObjective::NoIpc, &c, &params, &opts, 9);
        assert!(u.rate_after >= u.rate_before - 1e-9);
        assert_eq!(rotation_penalty(&u.rotation, &s.array.geometry), 0.0);
        let rescored = saa_cell_rate(&s, &u.rotation, CellObjective::NoIpc, &c, &opts).mean;
        assert!((rescored - u.rate_after).abs() <= 1e-12 * rescored.abs());
    }
}
