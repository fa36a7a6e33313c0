use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seeding::{self, Domain};

/// Inertia-weight PSO hyperparameters shared by the per-station and the
/// centralized searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-step velocity limit as a fraction of each dimension's range.
    pub velocity_clamp: f64,
    /// Weight of the rotation penalty in the minimised objective.
    pub penalty: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 12,
            max_iters: 60,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.25,
            penalty: 1e3,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.swarm_size < 2 {
            return Err(format!("swarm_size must be >= 2, got {}", self.swarm_size));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("velocity_clamp", self.velocity_clamp),
            ("penalty", self.penalty),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Search-space shape of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimSpec {
    /// Angle-like coordinate on `(0, period]`, moved along the shortest arc.
    Periodic { period: f64 },
    /// Interval coordinate, reflected at the bounds.
    Bounded { lo: f64, hi: f64 },
}

impl DimSpec {
    fn range(&self) -> f64 {
        match *self {
            DimSpec::Periodic { period } => period,
            DimSpec::Bounded { lo, hi } => hi - lo,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            DimSpec::Periodic { period } => period * (1.0 - rng.random::<f64>()),
            DimSpec::Bounded { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    /// Displacement from `from` to `to`.
    fn delta(&self, from: f64, to: f64) -> f64 {
        match *self {
            DimSpec::Periodic { period } => {
                let d = (to - from).rem_euclid(period);
                if d > 0.5 * period {
                    d - period
                } else {
                    d
                }
            }
            DimSpec::Bounded { .. } => to - from,
        }
    }

    /// Move `x` by `v`, returning the new position and (possibly reflected) velocity.
    fn advance(&self, x: f64, v: f64) -> (f64, f64) {
        match *self {
            DimSpec::Periodic { period } => {
                let r = (x + v).rem_euclid(period);
                (if r == 0.0 { period } else { r }, v)
            }
            DimSpec::Bounded { lo, hi } => {
                let mut y = x + v;
                let mut v = v;
                if y > hi {
                    y = hi - (y - hi);
                    v = -v;
                } else if y < lo {
                    y = lo + (lo - y);
                    v = -v;
                }
                (y.clamp(lo, hi), v)
            }
        }
    }

    /// Normalise a user-supplied point into the domain (wraps periodic coordinates).
    fn normalize(&self, x: f64) -> f64 {
        match *self {
            DimSpec::Periodic { .. } => self.advance(x, 0.0).0,
            DimSpec::Bounded { .. } => x,
        }
    }
}

/// Value returned by a PSO objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Minimised quantity, penalty included.
    pub value: f64,
    /// Constraint violation; zero means feasible.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub best_penalty: f64,
    /// False when no evaluated point had zero penalty.
    pub feasible: bool,
    /// Global-best penalised value after initialisation and each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best: Evaluation,
}

/// Minimise `objective` over the box described by `dims`.
///
/// Particle 0 starts at `warm_start`; the others are uniform over the box.
/// With `max_iters == 0` only the warm start is evaluated.
/// Global best uses the penalised value; the returned point is the best
/// zero-penalty point seen when there is one. Evaluations within an
/// iteration may run concurrently; bookkeeping and random draws are
/// sequential so the result depends only on the inputs and `seed`.
pub fn pso_minimize<F>(objective: F, dims: &[DimSpec], warm_start: &[f64], params: &PsoParams, seed: u64) -> PsoResult
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    assert_eq!(dims.len(), warm_start.len(), "warm start has the wrong dimension");
    let mut rng = seeding::stream(seed, Domain::Pso, &[]);
    let n = if params.max_iters == 0 { 1 } else { params.swarm_size.max(1) };
    let vmax: Vec<f64> = dims.iter().map(|d| params.velocity_clamp * d.range()).collect();

    let mut positions = Vec::with_capacity(n);
    positions.push(dims.iter().zip(warm_start).map(|(d, &x)| d.normalize(x)).collect::<Vec<_>>());
    for _ in 1..n {
        positions.push(dims.iter().map(|d| d.sample(&mut rng)).collect());
    }
    let evals = evaluate(&objective, &positions);
    let mut evaluations = evals.len();
    let mut swarm: Vec<Particle> = positions
        .into_iter()
        .zip(evals)
        .map(|(x, e)| Particle { v: vec![0.0; x.len()], best_x: x.clone(), x, best: e })
        .collect();

    let mut feasible_best: Option<(Vec<f64>, Evaluation)> = None;
    let note_feasible = |x: &[f64], e: Evaluation, fb: &mut Option<(Vec<f64>, Evaluation)>| {
        if e.penalty == 0.0 && fb.as_ref().is_none_or(|(_, b)| e.value < b.value) {
            *fb = Some((x.to_vec(), e));
        }
    };
    for p in &swarm {
        note_feasible(&p.x, p.best, &mut feasible_best);
    }
    let mut g = argmin(&swarm);
    let mut trace = vec![swarm[g].best.value];

    for _ in 0..params.max_iters {
        let gx = swarm[g].best_x.clone();
        for p in swarm.iter_mut() {
            for (d, spec) in dims.iter().enumerate() {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = params.inertia * p.v[d]
                    + params.cognitive * r1 * spec.delta(p.x[d], p.best_x[d])
                    + params.social * r2 * spec.delta(p.x[d], gx[d]);
                let v = v.clamp(-vmax[d], vmax[d]);
                let (x, v) = spec.advance(p.x[d], v);
                p.x[d] = x;
                p.v[d] = v;
            }
        }
        let positions: Vec<Vec<f64>> = swarm.iter().map(|p| p.x.clone()).collect();
        let evals = evaluate(&objective, &positions);
        evaluations += evals.len();
        for (p, e) in swarm.iter_mut().zip(evals) {
            note_feasible(&p.x, e, &mut feasible_best);
            if e.value < p.best.value {
                p.best = e;
                p.best_x = p.x.clone();
            }
        }
        g = argmin(&swarm);
        trace.push(swarm[g].best.value);
    }

    let (best_point, best, feasible) = match feasible_best {
        Some((x, e)) => (x, e, true),
        None => (swarm[g].best_x.clone(), swarm[g].best, false),
    };
    PsoResult {
        best_point,
        best_value: best.value,
        best_penalty: best.penalty,
        feasible,
        trace,
        evaluations,
    }
}

fn evaluate<F>(objective: &F, positions: &[Vec<f64>]) -> Vec<Evaluation>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    positions.par_iter().map(|x| objective(x)).collect()
}

fn argmin(swarm: &[Particle]) -> usize {
    let mut g = 0;
    for (i, p) in swarm.iter().enumerate() {
        if p.best.value < swarm[g].best.value {
            g = i;
        }
    }
    g
}
