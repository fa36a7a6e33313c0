//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line and fails when the criterion fails.
//!
//! Criteria 6 to 9 need full reduced-scale experiment runs (tens of minutes
//! to hours on one core) and are ignored by default:
//!
//! ```text
//! cargo test --release -p sixdma --test acceptance -- --ignored --nocapture --test-threads 1
//! ```
//!
//! Their runs are cached under `SIXDMA_ACCEPTANCE_DIR` (default: a directory
//! inside cargo's target dir) and resumed from checkpoints when present.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use sixdma::channel::{
    cell_channels, draw_complex_gaussian, effective_gain, path_gain, stacked_channel, steering_vector, synthesize,
    FadingDraw, GainPattern,
};
use sixdma::coordination::ao::{ao_run, AoState, CoordinationTrace};
use sixdma::coordination::graph::AdjacencyGraph;
use sixdma::coordination::ipc::ipc_candidates;
use sixdma::coordination::matching::random_maximal_matching;
use sixdma::geometry::{antenna_positions, circular_distance, rotation_matrix, rotation_penalty, BsRotation, SurfaceRotation};
use sixdma::harness::{ao_config, run_experiment, ExperimentConfig, Overrides, RunParams, ScenarioRef, SeedRun};
use sixdma::longterm::{solve_cell, CellObjective, SaaContext, SampleSet};
use sixdma::oracles::{check_maximal_matching, reference_path_gain, single_user_rate, verify, GoldenCase, Tolerance};
use sixdma::precoder::{
    actual_rates, beamformer_solve, mmse_step, power_bisection, solve_network_wsr, solve_p3, BeamformerSystem,
    BsPrecoder, IpcThresholds, PrecoderSet, SolverOptions,
};
use sixdma::scenarios::{builtin, Scheme};
use sixdma::seeding::{self, Domain};
use sixdma::selftest;
use sixdma::{CMatrix, CVector, C64};

const SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { failures: Vec::new(), notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn within(&mut self, started: Instant, limit: Duration) {
        let took = started.elapsed();
        self.note(format!("{:.1}s", took.as_secs_f64()));
        self.require(took <= limit, format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs()));
    }

    fn report(self, n: usize) {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut parts = self.notes;
        parts.extend(self.failures.iter().take(5).cloned());
        println!("criterion {n}: {status} {}", parts.join("; "));
        assert!(self.failures.is_empty(), "criterion {n} failed: {:?}", self.failures);
    }
}

fn rng(n: u64) -> rand_chacha::ChaCha8Rng {
    seeding::stream(n, Domain::Test, &[])
}

fn random_rotation<R: Rng>(r: &mut R) -> SurfaceRotation {
    SurfaceRotation::new(r.random_range(0.0..std::f64::consts::TAU), r.random_range(0.0..std::f64::consts::FRAC_PI_2))
}

fn random_unit<R: Rng>(r: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_cvec<R: Rng>(r: &mut R, n: usize, variance: f64) -> CVector {
    CVector::from_fn(n, |_, _| draw_complex_gaussian(r, variance))
}

#[test]
fn criterion_1_geometry() {
    let started = Instant::now();
    let mut o = Outcome::new();
    let s = builtin("high_ici").unwrap();
    let cfg = &s.array.geometry;
    let mut r = rng(1);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let z = random_rotation(&mut r);
        let m: Matrix3<f64> = rotation_matrix(&z);
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = (m.determinant() - 1.0).abs();
        let p = antenna_positions(&z, cfg);
        let mut rigid = 0.0f64;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let a = (p[i] - p[j]).norm();
                let b = (cfg.antenna_offsets[i] - cfg.antenna_offsets[j]).norm();
                rigid = rigid.max((a - b).abs());
            }
        }
        worst = (worst.0.max(ortho), worst.1.max(det), worst.2.max(rigid));
    }
    o.require(worst.0 <= 1e-12, format!("orthonormality error {:e}", worst.0));
    o.require(worst.1 <= 1e-12, format!("determinant error {:e}", worst.1));
    o.require(worst.2 <= 1e-12, format!("rigid-motion error {:e}", worst.2));

    let pi = std::f64::consts::PI;
    o.require(circular_distance(pi / 2.0, 3.0 * pi / 2.0) == pi, "circular distance pi/2, 3pi/2");
    let wrap = circular_distance(0.1, 2.0 * pi - 0.1);
    o.require((wrap - 0.2).abs() <= 1e-15, format!("circular distance 0.1, 2pi-0.1 gave {wrap}"));
    o.require(circular_distance(1.25, 1.25) == 0.0, "circular distance x, x");
    let feasible = BsRotation::new(vec![
        SurfaceRotation::from_degrees(0.0, 10.0),
        SurfaceRotation::from_degrees(120.0, 10.0),
        SurfaceRotation::from_degrees(240.0, 10.0),
    ]);
    o.require(rotation_penalty(&feasible, cfg) == 0.0, "feasible layout has zero penalty");
    let crowded = BsRotation::new(vec![
        SurfaceRotation::new(0.0, 0.0),
        SurfaceRotation::new(cfg.guard_angle / 2.0, 0.0),
        SurfaceRotation::new(std::f64::consts::PI, cfg.tilt_max + 0.25),
    ]);
    let expected = cfg.guard_angle / 2.0 + 0.25;
    o.require(
        (rotation_penalty(&crowded, cfg) - expected).abs() <= 1e-15,
        format!("penalty {} vs {expected}", rotation_penalty(&crowded, cfg)),
    );
    o.within(started, Duration::from_secs(5));
    o.report(1);
}

#[test]
fn criterion_2_channel() {
    let started = Instant::now();
    let mut o = Outcome::new();
    let s = builtin("high_ici").unwrap();
    let model = &s.array;
    let pattern: &GainPattern = &model.pattern;
    let (g_max, g_min) = (pattern.peak_gain(), pattern.floor_gain());
    let n = model.geometry.num_antennas();
    let mut r = rng(2);
    let mut modulus = 0.0f64;
    let mut energy = 0.0f64;
    for _ in 0..2_000 {
        let z = random_rotation(&mut r);
        let f = random_unit(&mut r);
        for a in steering_vector(&z, &f, &model.geometry, model.wavelength_m) {
            modulus = modulus.max((a.norm() - 1.0).abs());
        }
        let g = effective_gain(pattern, &z, &f).unwrap();
        o.require(g <= g_max * (1.0 + 1e-12) && g >= g_min * (1.0 - 1e-12), format!("gain {g} out of range"));

        let bs = BsRotation::new((0..3).map(|_| random_rotation(&mut r)).collect());
        let user = Vector3::new(r.random_range(-200.0..200.0), r.random_range(-200.0..200.0), 1.5);
        let xi = draw_complex_gaussian(&mut r, 1e-9);
        let h = stacked_channel(&bs, &Vector3::new(0.0, 0.0, 10.0), &user, xi, model).unwrap();
        let dir = (user - Vector3::new(0.0, 0.0, 10.0)).normalize();
        let sum_g: f64 = bs.surfaces.iter().map(|zb| effective_gain(pattern, zb, &dir).unwrap()).sum();
        let expected = xi.norm_sqr() * n as f64 * sum_g;
        energy = energy.max((h.norm_squared() - expected).abs() / expected);
    }
    o.require(modulus <= 1e-12, format!("steering modulus error {modulus:e}"));
    o.require(energy <= 1e-12, format!("energy identity error {energy:e}"));

    let beta = path_gain(100.0, 0.125, 3.5).unwrap();
    let reference = reference_path_gain(100.0, 0.125, 3.5);
    let rel = (beta - reference).abs() / reference;
    o.require(rel <= 1e-15, format!("beta(100) relative error {rel:e}"));
    o.note(format!("beta(100 m) = {beta:.6e}"));

    let draws = 10_000;
    let mut sum = 0.0;
    let mut beta_k = 0.0;
    for i in 0..draws {
        let d = FadingDraw::generate(&s, i, 5);
        let k = 0; // edge user at a fixed position
        let xi = d.coefficient(1, k).unwrap();
        beta_k = path_gain((d.user_positions[k] - s.bs_positions[1]).norm(), model.wavelength_m, s.path_loss_exponent)
            .unwrap();
        sum += xi.norm_sqr();
    }
    let ratio = sum / draws as f64 / beta_k;
    o.require((ratio - 1.0).abs() <= 0.05, format!("fading variance ratio {ratio}"));
    o.note(format!("variance ratio {ratio:.4}"));
    o.within(started, Duration::from_secs(30));
    o.report(2);
}

fn random_instance(seed: u64, users: usize, dim: usize) -> (Vec<CVector>, Vec<f64>) {
    let mut r = rng(1000 + seed);
    let h = (0..users).map(|_| random_cvec(&mut r, dim, 1e-9)).collect();
    let a = (0..users).map(|_| if r.random::<bool>() { 1.0 } else { 0.5 }).collect();
    (h, a)
}

#[test]
fn criterion_3_solver() {
    let started = Instant::now();
    let mut o = Outcome::new();
    let opts = SolverOptions::default();
    let (noise, p_max) = (1e-11, 100.0);

    let mut worst_mrt = 0.0f64;
    for i in 0..100 {
        let (h, _) = random_instance(i, 1, 12);
        let sol = solve_p3(&h, &[1.0], noise, p_max, &opts);
        let exact = single_user_rate(h[0].as_slice(), p_max, noise);
        worst_mrt = worst_mrt.max((sol.surrogate_rates[0] - exact).abs());
    }
    o.require(worst_mrt <= 1e-6, format!("single-user rate error {worst_mrt:e} bits"));

    let mut worst_drop = 0.0f64;
    for i in 0..100 {
        let (h, a) = random_instance(200 + i, 2 + (i as usize % 5), 12);
        let sol = solve_p3(&h, &a, noise, p_max, &opts);
        for w in sol.diagnostics.objective_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    o.require(worst_drop <= 1e-9, format!("plain WMMSE trace drop {worst_drop:e}"));

    let s = builtin("high_ici").unwrap();
    let z = vec![BsRotation::uniform(3, 30f64.to_radians()); 3];
    let mut worst_net = 0.0f64;
    for i in 0..100 {
        let draw = FadingDraw::generate(&s, i, 77);
        let sample = synthesize(&s, &z, &draw);
        let set = solve_network_wsr(&s, &sample, &opts);
        for w in set.per_bs[0].diagnostics.objective_trace.windows(2) {
            worst_net = worst_net.max(w[0] - w[1]);
        }
    }
    o.require(worst_net <= 1e-9, format!("network WMMSE trace drop {worst_net:e}"));

    let mut worst_residual = 0.0f64;
    let mut worst_power = 0.0f64;
    let mut active = 0;
    let mut r = rng(3);
    for i in 0..100 {
        let (h, a) = random_instance(400 + i, 4, 12);
        let victims: Vec<CVector> = (0..3).map(|_| random_cvec(&mut r, 12, 1e-9)).collect();
        let lambda: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1e10)).collect();
        let c = vec![noise; h.len()];
        let w0 = CMatrix::from_fn(12, h.len(), |_, _| draw_complex_gaussian(&mut r, 1.0));
        let state = mmse_step(&w0, &h, &c);
        let system = BeamformerSystem::build(&h, &a, &state, &victims, &lambda);
        let mu = r.random_range(0.0..1e-3);
        let w = beamformer_solve(&system, mu);
        let mut shifted = system.gram.clone();
        for d in 0..12 {
            shifted[(d, d)] += C64::new(if mu > 0.0 { mu } else { system.ridge() }, 0.0);
        }
        for k in 0..h.len() {
            let res = (&shifted * w.column(k) - system.rhs.column(k)).norm() / system.rhs.column(k).norm();
            worst_residual = worst_residual.max(res);
        }
        let ps = power_bisection(&system, p_max, 1e-6);
        if ps.mu > 0.0 {
            active += 1;
            worst_power = worst_power.max((ps.power - p_max).abs() / p_max);
        }
    }
    o.require(worst_residual <= 1e-10, format!("beamformer residual {worst_residual:e}"));
    o.require(active > 0 && worst_power <= 1e-6, format!("bisection power error {worst_power:e} over {active} active"));

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/golden");
    let tight = SolverOptions { max_iters: 500, rel_tol: 1e-10, dual_iters: 200, ..SolverOptions::default() };
    let golden = verify(&GoldenCase::load(&dir.join("convex_p4.json")).unwrap(), Tolerance::WeightedSum(0.01), &tight)
        .unwrap();
    o.require(golden.passed, format!("convex oracle: {:?}", golden.comparisons));
    o.note(format!("convex-oracle gap {:.2e}", golden.comparisons[0].error));
    o.within(started, Duration::from_secs(120));
    o.report(3);
}

#[test]
fn criterion_4_dominance() {
    let started = Instant::now();
    let mut o = Outcome::new();
    let s = builtin("high_ici").unwrap();
    let opts = SolverOptions::default().strict(true);
    let z = vec![BsRotation::uniform(3, 30f64.to_radians()); 3];
    let samples = SampleSet::first(&s, 4, 50);
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for sigma in [1e-12, 1e-11, 1e-9] {
        let t = IpcThresholds::uniform(&s.graph, sigma);
        for draw in samples.draws() {
            let sample = synthesize(&s, &z, draw);
            let mut per_bs = Vec::new();
            let mut surrogate = Vec::new();
            for (m, z_m) in z.iter().enumerate() {
                let ch = cell_channels(&s, m, z_m, draw);
                let sol = solve_cell(&s, m, &ch, CellObjective::Ipc(&t), &opts);
                surrogate.extend(sol.surrogate_rates.iter().copied());
                per_bs.push(BsPrecoder { w: sol.w, diagnostics: sol.diagnostics });
            }
            let actual = actual_rates(&s, &PrecoderSet { per_bs }, &sample);
            for (k, (&sr, &ar)) in surrogate.iter().zip(&actual.per_user).enumerate() {
                checked += 1;
                // Caps are met with equality after the strict projection, so
                // the two sums can differ by rounding alone.
                worst = worst.max((sr - ar) / ar.max(f64::MIN_POSITIVE));
                o.require(sr <= ar * (1.0 + 1e-12), format!("sigma {sigma:e} sample {} user {k}: {sr} > {ar}", draw.sample_index));
            }
        }
    }
    o.note(format!("{checked} user-samples, largest relative excess {worst:.2e}"));
    o.within(started, Duration::from_secs(300));
    o.report(4);
}

fn random_graph<R: Rng>(r: &mut R) -> AdjacencyGraph {
    let n = r.random_range(1..=50usize);
    let p: f64 = r.random_range(0.0..0.5);
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|_| r.random::<f64>() < p).collect();
    AdjacencyGraph::new(n, edges).unwrap()
}

fn tiny_trace() -> (sixdma::scenarios::NetworkScenario, IpcThresholds, CoordinationTrace, RunParams) {
    let s = builtin("high_ici").unwrap();
    let mut params = RunParams::reduced(&s);
    params.apply(&Overrides {
        samples: Some(4),
        eval_samples: Some(4),
        t_max: Some(2),
        swarm_size: Some(4),
        pso_iters: Some(3),
        ..Overrides::default()
    });
    let cfg = ao_config(&params, Scheme::Proposed, 9);
    let train = SampleSet::first(&s, 9, params.samples);
    let eval = SampleSet::first(&s, 10, params.eval_samples);
    let contexts: Vec<_> = (0..3).map(|m| SaaContext { cell: m, samples: train.clone() }).collect();
    let state = AoState::initial(&s, params.initial_tilt, params.sigma0);
    let initial = state.thresholds.clone();
    let (trace, _) = ao_run(&s, state, CoordinationTrace::default(), &cfg, &contexts, &eval, |_, _| {});
    (s, initial, trace, params)
}

#[test]
fn criterion_5_coordination() {
    let started = Instant::now();
    let mut o = Outcome::new();
    let mut r = rng(5);
    for i in 0..1000 {
        let g = random_graph(&mut r);
        let m = random_maximal_matching(&g, i);
        if let Err(e) = check_maximal_matching(g.num_cells(), g.edges(), &m) {
            o.require(false, format!("graph {i}: {e}"));
        }
    }
    let e = |x: f64| 10f64.powf(x);
    let grid = ipc_candidates(1e-8, 7, 1e-9);
    let expected = [1e-9, e(-8.0 - 2.0 / 3.0), e(-8.0 - 1.0 / 3.0), 1e-8, e(-7.0 - 2.0 / 3.0), e(-7.0 - 1.0 / 3.0), 1e-7];
    o.require(grid.len() == 7, format!("grid {grid:?}"));
    for (a, b) in grid.iter().zip(&expected) {
        o.require((a - b).abs() <= 1e-12 * b, format!("grid point {a:e} vs {b:e}"));
    }
    o.require(ipc_candidates(1e-10, 7, 1e-9) == vec![1e-10, 1e-9], "floor-clamped grid");

    let (s, initial, trace, params) = tiny_trace();
    let decisions = trace.decisions().count();
    let accepted = trace.decisions().filter(|(_, _, d)| d.accepted).count();
    for c in [
        selftest::accepted_updates_improve(&trace, 1e-4),
        selftest::unmatched_thresholds_frozen(&trace, &s, &initial),
        selftest::bus_accounting(&trace, params.grid_size, params.sigma_floor),
    ] {
        o.require(c.passed, format!("{}: {:?}", c.name, c.details));
    }
    o.require(decisions > 0, "trace has no pair decisions");
    o.note(format!("{decisions} pair searches, {accepted} accepted, {} messages", trace.bus.ledger().len()));
    o.within(started, Duration::from_secs(60 + 120));
    o.report(5);
}

fn run_dir() -> PathBuf {
    match std::env::var_os("SIXDMA_ACCEPTANCE_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance"),
    }
}

fn run_scheme(scenario: &str, scheme: Scheme, label: &str) -> Vec<SeedRun> {
    let config = ExperimentConfig {
        scenario: ScenarioRef::Named(scenario.into()),
        scheme,
        seeds: SEEDS.to_vec(),
        full_scale: false,
        overrides: Overrides::default(),
        output_dir: None,
    };
    let out = run_dir().join(scenario).join(label);
    run_experiment(&config, None, Some(&out)).unwrap().1
}

fn rate(run: &SeedRun) -> f64 {
    run.final_evaluation().actual_sum
}

#[test]
#[ignore = "reduced-scale experiment runs"]
fn criterion_6_ao_monotonicity() {
    let mut o = Outcome::new();
    for run in run_scheme("high_ici", Scheme::Proposed, "proposed") {
        let steps = run.trace.rotation_steps().count();
        let c = selftest::rotation_monotone(&run.trace, 1e-9);
        o.require(steps > 0, format!("seed {}: no rotation steps", run.seed));
        o.require(c.passed, format!("seed {}: {:?}", run.seed, c.details));
        o.note(format!("seed {}: {steps} steps", run.seed));
    }
    o.report(6);
}

#[test]
#[ignore = "reduced-scale experiment runs"]
fn criterion_7_scheme_ordering() {
    let mut o = Outcome::new();
    let proposed = run_scheme("high_ici", Scheme::Proposed, "proposed");
    let ipc_only = run_scheme("high_ici", Scheme::IpcOnly, "ipc-only");
    let rotation_only = run_scheme("high_ici", Scheme::RotationOnly, "rotation-only");
    let fpa = run_scheme("high_ici", Scheme::Fpa, "fpa");
    let centralized = run_scheme("high_ici", Scheme::Centralized, "centralized");
    let mut good = 0;
    for i in 0..SEEDS.len() {
        let p = rate(&proposed[i]);
        let (a, b, c, z) = (rate(&ipc_only[i]), rate(&rotation_only[i]), rate(&fpa[i]), rate(&centralized[i]));
        let ok = p >= a && p >= b && p >= c && p >= 0.85 * z;
        good += ok as usize;
        o.note(format!(
            "seed {}: proposed {p:.2} ipc-only {a:.2} rotation-only {b:.2} fpa {c:.2} centralized {z:.2} (ratio {:.3})",
            SEEDS[i],
            p / z
        ));
    }
    o.require(good >= 2, format!("ordering holds in {good} of 3 seeds"));
    o.report(7);
}

#[test]
#[ignore = "reduced-scale experiment runs"]
fn criterion_8_fixed_ipc_peak() {
    let mut o = Outcome::new();
    // 1e-8, 1e-6 and 1e-10 in milliwatts.
    let [mid, high, low] = [1e-11, 1e-9, 1e-13]
        .map(|s| run_scheme("high_ici", Scheme::FixedIpc(s), &format!("fixed_ipc_{s:e}")));
    let mut good = 0;
    for i in 0..SEEDS.len() {
        let (m, h, l) = (rate(&mid[i]), rate(&high[i]), rate(&low[i]));
        good += (m > h && m > l) as usize;
        o.note(format!("seed {}: 1e-13 W {l:.2}, 1e-11 W {m:.2}, 1e-9 W {h:.2}", SEEDS[i]));
    }
    o.require(good >= 2, format!("interior peak in {good} of 3 seeds"));
    o.report(8);
}

#[test]
#[ignore = "reduced-scale experiment runs"]
fn criterion_9_scalability() {
    let mut o = Outcome::new();
    let sizes = [3, 6, 10, 15];
    let mut per_bs = Vec::new();
    let mut central_eval = Vec::new();
    for m in sizes {
        let name = format!("lattice_{m}");
        let p = run_scheme(&name, Scheme::Proposed, "proposed");
        let c = run_scheme(&name, Scheme::Centralized, "centralized");
        let times: Vec<f64> = p.iter().map(SeedRun::median_per_bs_s).collect();
        let evals: Vec<f64> = c.iter().filter_map(SeedRun::median_centralized_eval_s).collect();
        per_bs.push(sixdma::centralized::median(&times));
        central_eval.push(sixdma::centralized::median(&evals));
        let ratios: Vec<f64> = p.iter().zip(&c).map(|(a, b)| rate(a) / rate(b)).collect();
        let good = ratios.iter().filter(|&&x| x >= 0.85).count();
        o.require(good >= 2, format!("M={m}: proposed >= 0.85 centralized in {good} of 3 seeds"));
        o.note(format!(
            "M={m}: per-BS {:.2}s, centralized eval {:.3}s, ratios {:.3?}",
            per_bs.last().unwrap(),
            central_eval.last().unwrap(),
            ratios
        ));
    }
    o.require(per_bs[3] <= 2.0 * per_bs[0], format!("per-BS time at M=15 {:.2}s vs M=3 {:.2}s", per_bs[3], per_bs[0]));
    o.require(central_eval.windows(2).all(|w| w[1] > w[0]), "centralized evaluation time not increasing");
    o.report(9);
}
