use crate::channel::ChannelSample;
use crate::scenarios::NetworkScenario;
use crate::{CMatrix, CVector, C64};

use super::{
    beamformer_solve, dual_ascent_step_diag, leakage, mmse_step, power_bisection, BeamformerSystem, BsPrecoder,
    MmseState, PrecoderSet, SolveDiagnostics, SolverOptions,
};

/// Local problem of one base station.
#[derive(Debug, Clone)]
pub struct CellProblem<'a> {
    pub in_cell: &'a [CVector],
    pub weights: &'a [f64],
    /// Users of adjacent cells; may be empty.
    pub victims: &'a [CVector],
    /// Leakage cap per victim, watts. Same length as `victims`.
    pub victim_caps: Vec<f64>,
    /// Noise plus the total incoming leakage allowance, watts.
    pub noise_plus_incoming: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub w: CMatrix,
    /// `log2(1 + SINR)` of each user under the surrogate model.
    pub surrogate_rates: Vec<f64>,
    /// Weighted sum of `surrogate_rates`.
    pub objective: f64,
    /// `I_q` of the returned precoder, watts.
    pub leakage: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

impl CellSolution {
    pub fn into_precoder(self) -> BsPrecoder {
        BsPrecoder { w: self.w, diagnostics: self.diagnostics }
    }
}

/// Channels rescaled so that the noise term is 1 and every constraint reads `I ≤ 1`.
struct Normalized {
    h: Vec<CVector>,
    victims: Vec<CVector>,
    /// Position of each kept victim in the caller's list.
    victim_index: Vec<usize>,
}

fn normalize(problem: &CellProblem<'_>) -> Normalized {
    let s = 1.0 / problem.noise_plus_incoming.sqrt();
    let h = problem.in_cell.iter().map(|h| h * C64::new(s, 0.0)).collect();
    let mut victims = Vec::new();
    let mut victim_index = Vec::new();
    for (q, (l, &cap)) in problem.victims.iter().zip(&problem.victim_caps).enumerate() {
        if l.norm_squared() > 0.0 && cap.is_finite() {
            victims.push(l * C64::new(1.0 / cap.sqrt(), 0.0));
            victim_index.push(q);
        }
    }
    Normalized { h, victims, victim_index }
}

fn sinr_rates(w: &CMatrix, h: &[CVector], c: f64) -> Vec<f64> {
    h.iter()
        .enumerate()
        .map(|(k, hk)| {
            let mut desired = 0.0;
            let mut rest = c;
            for (j, wj) in w.column_iter().enumerate() {
                let a = hk.dotc(&wj).norm_sqr();
                if j == k {
                    desired = a;
                } else {
                    rest += a;
                }
            }
            (desired / rest).ln_1p() / std::f64::consts::LN_2
        })
        .collect()
}

fn weighted(weights: &[f64], rates: &[f64]) -> f64 {
    weights.iter().zip(rates).map(|(a, r)| a * r).sum()
}

pub(crate) fn mrt_init(h: &[CVector], dim: usize, p_max: f64) -> CMatrix {
    let mut w = CMatrix::zeros(dim, h.len());
    if h.is_empty() {
        return w;
    }
    let per_user = p_max / h.len() as f64;
    for (k, hk) in h.iter().enumerate() {
        let n = hk.norm();
        if n > 0.0 {
            w.set_column(k, &(hk * C64::new(per_user.sqrt() / n, 0.0)));
        }
    }
    w
}

fn max_residual(norm_leak: &[f64]) -> f64 {
    norm_leak.iter().map(|i| i - 1.0).fold(-1.0, f64::max)
}

/// Weighted sum-rate maximisation under a power budget and per-victim
/// leakage caps, by WMMSE with an inner dual loop on the leakage multipliers.
///
/// The returned precoder is the best iterate that respects the caps: within
/// `ipc_violation_tol` by default, exactly after uniform down-scaling in
/// strict mode. If no iterate qualifies, the zero precoder is returned.
pub fn solve_p4(problem: &CellProblem<'_>, opts: &SolverOptions) -> CellSolution {
    assert_eq!(problem.in_cell.len(), problem.weights.len());
    assert_eq!(problem.victims.len(), problem.victim_caps.len());
    let dim = problem.in_cell.first().or(problem.victims.first()).map_or(0, |h| h.len());
    let norm = normalize(problem);
    let users = norm.h.len();
    let ones = vec![1.0; users];
    let q_len = norm.victims.len();
    let caps_one = vec![1.0; q_len];

    let mut w = mrt_init(&norm.h, dim, problem.p_max);
    let mut lambda = vec![0.0; q_len];
    let mut steps = DualSteps::new(q_len);
    let mut diag = SolveDiagnostics { strict_scale: 1.0, ..Default::default() };

    let mut best: Option<(f64, CMatrix, usize, f64)> = None;
    let consider = |w: &CMatrix, it: usize, best: &mut Option<(f64, CMatrix, usize, f64)>| {
        let leak = leakage(w, &norm.victims);
        let (candidate, scale) = if opts.strict {
            let worst = leak.iter().copied().fold(0.0, f64::max);
            let t = if worst > 1.0 { (1.0 / worst).sqrt() } else { 1.0 };
            if t < 1.0 {
                (w * C64::new(t, 0.0), t)
            } else {
                (w.clone(), 1.0)
            }
        } else if max_residual(&leak) <= opts.ipc_violation_tol {
            (w.clone(), 1.0)
        } else {
            return;
        };
        let obj = weighted(problem.weights, &sinr_rates(&candidate, &norm.h, 1.0));
        if best.as_ref().is_none_or(|b| obj > b.0) {
            *best = Some((obj, candidate, it, scale));
        }
    };

    let mut prev = weighted(problem.weights, &sinr_rates(&w, &norm.h, 1.0));
    diag.objective_trace.push(prev);
    consider(&w, 0, &mut best);

    for it in 1..=opts.max_iters {
        let state = mmse_step(&w, &norm.h, &ones);
        w = if q_len == 0 {
            let sys = BeamformerSystem::build(&norm.h, problem.weights, &state, &[], &[]);
            let ps = power_bisection(&sys, problem.p_max, opts.bisection_tol);
            beamformer_solve(&sys, ps.mu)
        } else {
            dual_loop(&norm, problem, &state, &mut lambda, &mut steps, &caps_one, opts, &mut diag.dual_iterations)
        };
        let obj = weighted(problem.weights, &sinr_rates(&w, &norm.h, 1.0));
        diag.objective_trace.push(obj);
        diag.iterations = it;
        consider(&w, it, &mut best);
        if (obj - prev).abs() <= opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            diag.converged = true;
            break;
        }
        prev = obj;
    }
    diag.last_objective = *diag.objective_trace.last().expect("trace holds the initial value");

    let (w, best_obj) = match best {
        Some((obj, w, it, scale)) => {
            diag.best_iteration = it;
            diag.strict_scale = scale;
            (w, obj)
        }
        None => (CMatrix::zeros(dim, users), 0.0),
    };
    diag.best_objective = best_obj;
    let norm_leak = leakage(&w, &norm.victims);
    diag.max_ipc_residual = max_residual(&norm_leak);
    let mut leak_w = vec![0.0; problem.victims.len()];
    for (q, &i) in norm.victim_index.iter().zip(&norm_leak) {
        leak_w[*q] = i * problem.victim_caps[*q];
    }
    let surrogate_rates = sinr_rates(&w, &norm.h, 1.0);
    CellSolution { objective: weighted(problem.weights, &surrogate_rates), w, surrogate_rates, leakage: leak_w, diagnostics: diag }
}

/// Per-multiplier step sizes. A step grows while its residual keeps its
/// sign and halves when the sign flips; it starts at the ratio of signal to
/// victim energy so that the two parts of `C(λ)` are commensurate.
struct DualSteps {
    step: Vec<f64>,
    sign: Vec<i8>,
}

impl DualSteps {
    fn new(q: usize) -> Self {
        Self { step: vec![0.0; q], sign: vec![0; q] }
    }

    /// Steps for the residuals `leak - 1`, each damped by the residual size.
    fn next(&mut self, leak: &[f64], initial: f64) -> Vec<f64> {
        leak.iter()
            .enumerate()
            .map(|(q, &i)| {
                let g = i - 1.0;
                let sign = if g > 0.0 { 1 } else if g < 0.0 { -1 } else { 0 };
                if self.step[q] == 0.0 {
                    self.step[q] = initial;
                } else if sign != 0 && sign == self.sign[q] {
                    self.step[q] *= 1.5;
                } else if sign != 0 && sign == -self.sign[q] {
                    self.step[q] *= 0.5;
                }
                self.sign[q] = sign;
                self.step[q] / g.abs().max(1.0)
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn dual_loop(
    norm: &Normalized,
    problem: &CellProblem<'_>,
    state: &MmseState,
    lambda: &mut Vec<f64>,
    steps: &mut DualSteps,
    caps_one: &[f64],
    opts: &SolverOptions,
    count: &mut usize,
) -> CMatrix {
    let signal: f64 = norm
        .h
        .iter()
        .enumerate()
        .map(|(k, h)| problem.weights[k] * state.v[k] * state.u[k].norm_sqr() * h.norm_squared())
        .sum();
    let victim: f64 = norm.victims.iter().map(|l| l.norm_squared()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut w = None;
    for iota in 1..=opts.dual_iters.max(1) {
        *count += 1;
        let sys = BeamformerSystem::build(&norm.h, problem.weights, state, &norm.victims, lambda);
        let ps = power_bisection(&sys, problem.p_max, opts.bisection_tol);
        let cur = beamformer_solve(&sys, ps.mu);
        let leak = leakage(&cur, &norm.victims);
        w = Some(cur);
        let tol = opts.dual_kkt_tol;
        let kkt = leak
            .iter()
            .zip(lambda.iter())
            .all(|(&i, &l)| i <= 1.0 + tol && (l == 0.0 || (i - 1.0).abs() <= tol));
        if kkt || iota == opts.dual_iters {
            break;
        }
        let delta = steps.next(&leak, opts.dual_step0 * signal / victim);
        let next = dual_ascent_step_diag(lambda, &leak, caps_one, &delta);
        if next == *lambda {
            break;
        }
        *lambda = next;
    }
    w.expect("at least one dual iteration")
}

/// Single-cell weighted sum-rate maximisation under the power budget only.
pub fn solve_p3(in_cell: &[CVector], weights: &[f64], noise: f64, p_max: f64, opts: &SolverOptions) -> CellSolution {
    solve_p4(
        &CellProblem { in_cell, weights, victims: &[], victim_caps: Vec::new(), noise_plus_incoming: noise, p_max },
        opts,
    )
}

/// Network-wide weighted sum-rate WMMSE with full channel knowledge and a
/// per-station power budget. The objective trace is shared by all stations.
pub fn solve_network_wsr(scenario: &NetworkScenario, sample: &ChannelSample, opts: &SolverOptions) -> PrecoderSet {
    let cells = scenario.num_cells();
    let users = scenario.num_users();
    let weights = scenario.weights();
    let s = C64::new(1.0 / scenario.noise_power_w.sqrt(), 0.0);
    let h: Vec<Vec<Option<CVector>>> =
        (0..cells).map(|m| (0..users).map(|k| sample.get(m, k).map(|h| h * s)).collect()).collect();
    let dim = scenario.tx_dim();
    let own = |k: usize| h[scenario.cell_of(k)][k].as_ref().expect("serving channel present");

    let mut w: Vec<CMatrix> = (0..cells)
        .map(|m| {
            let hs: Vec<CVector> = scenario.users_of(m).map(|k| own(k).clone()).collect();
            mrt_init(&hs, dim, scenario.p_max_w)
        })
        .collect();

    // (desired, rest) per user with unit noise
    let terms = |w: &[CMatrix]| -> Vec<(C64, f64)> {
        (0..users)
            .map(|k| {
                let serving = scenario.cell_of(k);
                let local = k - scenario.users_of(serving).start;
                let mut desired = C64::new(0.0, 0.0);
                let mut rest = 1.0;
                for m in 0..cells {
                    let Some(hk) = &h[m][k] else { continue };
                    for (j, wj) in w[m].column_iter().enumerate() {
                        let a = hk.dotc(&wj);
                        if m == serving && j == local {
                            desired = a;
                        } else {
                            rest += a.norm_sqr();
                        }
                    }
                }
                (desired, rest)
            })
            .collect()
    };
    let objective = |t: &[(C64, f64)]| -> f64 {
        t.iter().zip(weights).map(|((d, r), a)| a * (d.norm_sqr() / r).ln_1p() / std::f64::consts::LN_2).sum()
    };

    let mut t = terms(&w);
    let mut prev = objective(&t);
    let mut diag = SolveDiagnostics { strict_scale: 1.0, max_ipc_residual: -1.0, ..Default::default() };
    diag.objective_trace.push(prev);
    for it in 1..=opts.max_iters {
        let mut u = Vec::with_capacity(users);
        let mut v = Vec::with_capacity(users);
        for &(d, rest) in &t {
            let total = rest + d.norm_sqr();
            u.push(d / total);
            v.push(total / rest);
        }
        for m in 0..cells {
            let mut gram = CMatrix::zeros(dim, dim);
            for k in 0..users {
                if let Some(hk) = &h[m][k] {
                    let chi = weights[k] * v[k] * u[k].norm_sqr();
                    if chi > 0.0 {
                        gram.gerc(C64::new(chi, 0.0), hk, hk, C64::new(1.0, 0.0));
                    }
                }
            }
            let range = scenario.users_of(m);
            let mut rhs = CMatrix::zeros(dim, range.len());
            for (col, k) in range.enumerate() {
                rhs.set_column(col, &(own(k) * (u[k] * weights[k] * v[k])));
            }
            let sys = BeamformerSystem { gram, rhs };
            let ps = power_bisection(&sys, scenario.p_max_w, opts.bisection_tol);
            w[m] = beamformer_solve(&sys, ps.mu);
        }
        t = terms(&w);
        let obj = objective(&t);
        diag.objective_trace.push(obj);
        diag.iterations = it;
        if (obj - prev).abs() <= opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            diag.converged = true;
            break;
        }
        prev = obj;
    }
    diag.last_objective = *diag.objective_trace.last().expect("non-empty trace");
    diag.best_objective = diag.last_objective;
    diag.best_iteration = diag.iterations;
    PrecoderSet { per_bs: w.into_iter().map(|w| BsPrecoder { w, diagnostics: diag.clone() }).collect() }
}
