//! Short-term precoding.
//!
//! The building blocks follow the WMMSE decomposition: an MMSE receiver and
//! weight update per user ([`mmse_step`]), a closed-form transmit update for
//! fixed multipliers ([`beamformer_solve`]), a bisection on the power
//! multiplier ([`power_bisection`]) and a projected subgradient step on the
//! interference-power multipliers ([`dual_ascent_step`]). The solvers in
//! [`solve`] chain them; [`rates`] evaluates actual and surrogate rates.

pub mod rates;
pub mod solve;

use std::collections::BTreeMap;

use nalgebra::linalg::Cholesky;
use serde::{Deserialize, Serialize};

use crate::coordination::graph::AdjacencyGraph;
use crate::{CMatrix, CVector, C64};

pub use rates::{actual_rates, surrogate_rates, RateReport};
pub use solve::{solve_network_wsr, solve_p3, solve_p4, CellProblem, CellSolution};

/// Iteration budgets and feasibility handling of the short-term solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Early stop on relative objective change.
    pub rel_tol: f64,
    pub dual_iters: usize,
    /// Initial dual step relative to the ratio of signal to victim energy.
    pub dual_step0: f64,
    /// Inner dual loop also stops once every constraint is met within this
    /// relative tolerance and every active multiplier's constraint is tight
    /// within it.
    pub dual_kkt_tol: f64,
    pub bisection_tol: f64,
    /// Relative IPC violation accepted in default mode.
    pub ipc_violation_tol: f64,
    /// Scale the returned precoders so every IPC holds exactly.
    pub strict: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-5,
            dual_iters: 20,
            dual_step0: 1.0,
            dual_kkt_tol: 1e-3,
            bisection_tol: 1e-6,
            ipc_violation_tol: 1e-2,
            strict: false,
        }
    }
}

impl SolverOptions {
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }
}

/// Directed leakage caps `σ_{m,n}` (watts) for every ordered adjacent pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<ThresholdEntry>", try_from = "Vec<ThresholdEntry>")]
pub struct IpcThresholds {
    values: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ThresholdEntry {
    from: usize,
    to: usize,
    sigma_w: f64,
}

impl From<IpcThresholds> for Vec<ThresholdEntry> {
    fn from(t: IpcThresholds) -> Self {
        t.values.iter().map(|(&(from, to), &sigma_w)| ThresholdEntry { from, to, sigma_w }).collect()
    }
}

impl TryFrom<Vec<ThresholdEntry>> for IpcThresholds {
    type Error = String;

    fn try_from(v: Vec<ThresholdEntry>) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for e in v {
            if !(e.sigma_w > 0.0) {
                return Err(format!("threshold ({}, {}) must be positive", e.from, e.to));
            }
            values.insert((e.from, e.to), e.sigma_w);
        }
        Ok(Self { values })
    }
}

impl IpcThresholds {
    /// Same value on every directed edge of `graph`.
    pub fn uniform(graph: &AdjacencyGraph, value: f64) -> Self {
        let values = graph
            .edges()
            .iter()
            .flat_map(|&(a, b)| [((a, b), value), ((b, a), value)])
            .collect();
        Self { values }
    }

    /// Cap on the leakage from cell `from` to each user of cell `to`.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.values[&(from, to)]
    }

    pub fn set(&mut self, from: usize, to: usize, value: f64) {
        let slot = self.values.get_mut(&(from, to)).expect("threshold defined only on adjacent pairs");
        *slot = value;
    }

    /// Sum of caps other cells place on their leakage into `m`.
    pub fn incoming_sum(&self, m: usize, graph: &AdjacencyGraph) -> f64 {
        graph.neighbors(m).iter().map(|&n| self.get(n, m)).sum()
    }

    /// `[σ_{m,n}]_n, [σ_{n,m}]_n` over sorted neighbours: the local view of cell `m`.
    pub fn local_vector(&self, m: usize, graph: &AdjacencyGraph) -> Vec<f64> {
        let out = graph.neighbors(m).iter().map(|&n| self.get(m, n));
        let inc = graph.neighbors(m).iter().map(|&n| self.get(n, m));
        out.chain(inc).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn min_value(&self) -> f64 {
        self.values.values().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Receiver, MSE weight and MSE of every in-cell user.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseState {
    pub u: Vec<C64>,
    pub v: Vec<f64>,
    pub e: Vec<f64>,
}

/// `E|u* y_k - s_k|^2` for an arbitrary scalar receiver `u`.
pub fn mse(u: C64, h: &CVector, w: &CMatrix, k: usize, c: f64) -> f64 {
    let desired = h.dotc(&w.column(k));
    let total: f64 = w.column_iter().map(|wj| h.dotc(&wj).norm_sqr()).sum::<f64>() + c;
    1.0 - 2.0 * (u.conj() * desired).re + u.norm_sqr() * total
}

/// MMSE receivers and weights for fixed precoders `w` (one column per user).
///
/// At the MMSE receiver the MSE equals `(total - |h^H w_k|^2) / total`, which
/// is evaluated directly to avoid cancellation at high SINR.
pub fn mmse_step(w: &CMatrix, channels: &[CVector], c: &[f64]) -> MmseState {
    let k_users = channels.len();
    let mut u = Vec::with_capacity(k_users);
    let mut v = Vec::with_capacity(k_users);
    let mut e = Vec::with_capacity(k_users);
    for (k, h) in channels.iter().enumerate() {
        let mut desired = C64::new(0.0, 0.0);
        let mut rest = c[k];
        for (j, wj) in w.column_iter().enumerate() {
            let a = h.dotc(&wj);
            if j == k {
                desired = a;
            } else {
                rest += a.norm_sqr();
            }
        }
        let total = rest + desired.norm_sqr();
        u.push(desired / total);
        let mse = rest / total;
        e.push(mse);
        v.push(1.0 / mse);
    }
    MmseState { u, v, e }
}

/// `C(λ) = Σ χ_i h_i h_i^H + Σ λ_q ℓ_q ℓ_q^H` and the right-hand sides `b_k`.
#[derive(Debug, Clone)]
pub struct BeamformerSystem {
    pub gram: CMatrix,
    pub rhs: CMatrix,
}

impl BeamformerSystem {
    pub fn build(
        channels: &[CVector],
        weights: &[f64],
        state: &MmseState,
        victims: &[CVector],
        lambda: &[f64],
    ) -> Self {
        let dim = channels.first().or(victims.first()).map_or(0, |h| h.len());
        let mut gram = CMatrix::zeros(dim, dim);
        let mut rhs = CMatrix::zeros(dim, channels.len());
        for (k, h) in channels.iter().enumerate() {
            let av = weights[k] * state.v[k];
            let chi = av * state.u[k].norm_sqr();
            if chi > 0.0 {
                gram.gerc(C64::new(chi, 0.0), h, h, C64::new(1.0, 0.0));
            }
            rhs.set_column(k, &(h * (state.u[k] * av)));
        }
        for (l, &lam) in victims.iter().zip(lambda) {
            if lam > 0.0 {
                gram.gerc(C64::new(lam, 0.0), l, l, C64::new(1.0, 0.0));
            }
        }
        Self { gram, rhs }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Ridge used in place of a zero power multiplier.
    pub fn ridge(&self) -> f64 {
        let n = self.dim().max(1) as f64;
        let tr: f64 = self.gram.diagonal().iter().map(|d| d.re).sum();
        let ridge = 1e-12 * tr / n;
        if ridge > 0.0 {
            ridge
        } else {
            f64::MIN_POSITIVE
        }
    }
}

/// `w_k = (C + μI)^{-1} b_k` for every column of the right-hand side.
pub fn beamformer_solve(system: &BeamformerSystem, mu: f64) -> CMatrix {
    let shift = if mu > 0.0 { mu } else { system.ridge() };
    let mut a = system.gram.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += C64::new(shift, 0.0);
    }
    match Cholesky::new(a.clone()) {
        Some(ch) => ch.solve(&system.rhs),
        None => a.lu().solve(&system.rhs).unwrap_or_else(|| CMatrix::zeros(system.rhs.nrows(), system.rhs.ncols())),
    }
}

/// Result of the power-multiplier search, with every probe for inspection.
#[derive(Debug, Clone)]
pub struct PowerSearch {
    pub mu: f64,
    /// Transmit power `Σ‖w_k(μ)‖²` at the returned multiplier.
    pub power: f64,
    /// `(μ, power)` for every probe, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

/// Spectral form of `μ ↦ Σ‖w_k(μ)‖²`.
struct PowerCurve {
    eig: Vec<f64>,
    energy: Vec<f64>,
    ridge: f64,
}

impl PowerCurve {
    fn new(system: &BeamformerSystem) -> Self {
        let se = system.gram.clone().symmetric_eigen();
        let projected = se.eigenvectors.adjoint() * &system.rhs;
        let energy = projected.row_iter().map(|r| r.iter().map(|c| c.norm_sqr()).sum()).collect();
        let eig = se.eigenvalues.iter().map(|&d| d.max(0.0)).collect();
        Self { eig, energy, ridge: system.ridge() }
    }

    fn power(&self, mu: f64) -> f64 {
        let shift = if mu > 0.0 { mu } else { self.ridge };
        self.eig
            .iter()
            .zip(&self.energy)
            .map(|(&d, &g)| if g == 0.0 { 0.0 } else { g / (d + shift).powi(2) })
            .sum()
    }
}

/// Smallest `μ ≥ 0` meeting the power budget. Returns `μ = 0` when the budget
/// is inactive; otherwise brackets by doubling and bisects until the power is
/// within `tol` (relative) of `p_max`, never above it by more than rounding.
pub fn power_bisection(system: &BeamformerSystem, p_max: f64, tol: f64) -> PowerSearch {
    let curve = PowerCurve::new(system);
    let mut probes = Vec::new();
    let mut eval = |mu: f64| {
        let p = curve.power(mu);
        probes.push((mu, p));
        p
    };
    let p0 = eval(0.0);
    if p0 <= p_max {
        return PowerSearch { mu: 0.0, power: p0, probes };
    }
    let scale = curve.eig.iter().copied().fold(0.0, f64::max).max(curve.ridge);
    let mut lo = 0.0;
    let mut hi = scale * 1e-6;
    let mut p_hi = eval(hi);
    while p_hi > p_max {
        lo = hi;
        hi *= 2.0;
        p_hi = eval(hi);
    }
    // Tighten far beyond `tol` so that monotone WMMSE traces are not disturbed
    // by the multiplier error; `tol` is the acceptance bound.
    let target = tol.min(1e-13);
    for _ in 0..200 {
        if (p_max - p_hi) / p_max <= target {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = eval(mid);
        if p > p_max {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p;
        }
    }
    PowerSearch { mu: hi, power: p_hi, probes }
}

/// Projected subgradient step on the normalised residual `I/σ̄ - 1`.
pub fn dual_ascent_step(lambda: &[f64], leakage: &[f64], thresholds: &[f64], step: f64) -> Vec<f64> {
    dual_ascent_step_diag(lambda, leakage, thresholds, &vec![step; lambda.len()])
}

/// Same step with one step size per multiplier.
pub fn dual_ascent_step_diag(lambda: &[f64], leakage: &[f64], thresholds: &[f64], steps: &[f64]) -> Vec<f64> {
    lambda
        .iter()
        .zip(leakage.iter().zip(thresholds))
        .zip(steps)
        .map(|((&l, (&i, &s)), &d)| (l + d * (i / s - 1.0)).max(0.0))
        .collect()
}

/// `I_q = Σ_k |ℓ_q^H w_k|²` for every victim channel.
pub fn leakage(w: &CMatrix, victims: &[CVector]) -> Vec<f64> {
    victims
        .iter()
        .map(|l| w.column_iter().map(|wk| l.dotc(&wk).norm_sqr()).sum())
        .collect()
}

/// Transmit power `Σ‖w_k‖²`.
pub fn transmit_power(w: &CMatrix) -> f64 {
    w.iter().map(|c| c.norm_sqr()).sum()
}

/// Solver bookkeeping returned with every precoder.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    /// Inner dual iterations summed over all outer iterations.
    pub dual_iterations: usize,
    /// Objective after initialisation and after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub last_objective: f64,
    pub best_objective: f64,
    pub best_iteration: usize,
    /// Largest `I_q/σ̄_q - 1` of the returned precoder (≤ 0 when feasible).
    pub max_ipc_residual: f64,
    pub converged: bool,
    /// Uniform scale applied in strict mode (1 when none).
    pub strict_scale: f64,
}

/// Precoders of one station, columns aligned with its users.
#[derive(Debug, Clone, PartialEq)]
pub struct BsPrecoder {
    pub w: CMatrix,
    pub diagnostics: SolveDiagnostics,
}

impl BsPrecoder {
    pub fn power(&self) -> f64 {
        transmit_power(&self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub per_bs: Vec<BsPrecoder>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{self, Domain};
    use crate::channel::draw_complex_gaussian;

    pub(crate) fn random_vec(seed: u64, n: usize) -> CVector {
        let mut rng = seeding::stream(seed, Domain::Test, &[n as u64]);
        CVector::from_fn(n, |_, _| draw_complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn zero_precoder_gives_unit_mse() {
        let h = vec![random_vec(1, 4), random_vec(2, 4)];
        let w = CMatrix::zeros(4, 2);
        let s = mmse_step(&w, &h, &[1.0, 2.0]);
        assert_eq!(s.u, vec![C64::new(0.0, 0.0); 2]);
        assert_eq!(s.e, vec![1.0, 1.0]);
        assert_eq!(s.v, vec![1.0, 1.0]);
    }

    #[test]
    fn single_user_mrt_mse() {
        let h = random_vec(3, 6);
        let p = 4.0;
        let c = 0.7;
        let w = CMatrix::from_column_slice(6, 1, (&h * C64::new((p / h.norm_squared()).sqrt(), 0.0)).as_slice());
        let s = mmse_step(&w, std::slice::from_ref(&h), &[c]);
        let expected = c / (p * h.norm_squared() + c);
        assert!((s.e[0] - expected).abs() < 1e-15);
        let rate = -s.e[0].log2();
        assert!((rate - (1.0 + p * h.norm_squared() / c).log2()).abs() < 1e-12);
        // general formula agrees at the MMSE receiver
        assert!((mse(s.u[0], &h, &w, 0, c) - s.e[0]).abs() < 1e-14);
    }

    #[test]
    fn gram_is_hermitian_outer_product() {
        let h = vec![random_vec(5, 3)];
        let state = MmseState { u: vec![C64::new(0.5, 0.5)], v: vec![2.0], e: vec![0.5] };
        let sys = BeamformerSystem::build(&h, &[1.0], &state, &[], &[]);
        let chi = 2.0 * 0.5;
        let expected = &h[0] * h[0].adjoint() * C64::new(chi, 0.0);
        assert!((&sys.gram - expected).norm() < 1e-14);
    }

    #[test]
    fn dual_step_cases() {
        assert_eq!(dual_ascent_step(&[0.3], &[2.0], &[2.0], 0.7), vec![0.3]);
        assert_eq!(dual_ascent_step(&[0.0], &[1.0], &[2.0], 0.7), vec![0.0]);
        assert_eq!(dual_ascent_step(&[1.0], &[4.0], &[2.0], 0.5), vec![1.5]);
    }

    #[test]
    fn thresholds_local_vector_order() {
        let g = AdjacencyGraph::complete(3);
        let mut t = IpcThresholds::uniform(&g, 1.0);
        t.set(1, 0, 2.0);
        t.set(2, 1, 3.0);
        assert_eq!(t.local_vector(1, &g), vec![2.0, 1.0, 1.0, 3.0]);
        assert_eq!(t.incoming_sum(1, &g), 1.0 + 3.0);
        let json = serde_json::to_string(&t).unwrap();
        let back: IpcThresholds = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
