use proptest::prelude::*;
use sixdma::precoder::{
    dual_ascent_step, leakage, solve_p4, surrogate_rates, transmit_power, CellProblem, SolverOptions,
};
use sixdma::{CVector, C64};

fn cvec(len: usize, scale: f64) -> impl Strategy<Value = CVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_map(move |v| CVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| C64::new(re, im) * scale)))
}

fn instance() -> impl Strategy<Value = (Vec<CVector>, Vec<CVector>, Vec<f64>)> {
    (1usize..4, 0usize..4, 2usize..6).prop_flat_map(|(k, q, dim)| {
        (
            prop::collection::vec(cvec(dim, 3e-5), k),
            prop::collection::vec(cvec(dim, 3e-5), q),
            prop::collection::vec(0.2..4.0f64, k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_step_is_projected_and_moves_with_the_residual(
        cases in prop::collection::vec((0.0..5.0f64, 1e-12..1e-8f64, 1e-12..1e-8f64), 1..8),
        step in 1e-3..2.0f64,
    ) {
        let lambda: Vec<f64> = cases.iter().map(|c| c.0).collect();
        let leak: Vec<f64> = cases.iter().map(|c| c.1).collect();
        let caps: Vec<f64> = cases.iter().map(|c| c.2).collect();
        let next = dual_ascent_step(&lambda, &leak, &caps, step);
        for q in 0..cases.len() {
            prop_assert!(next[q] >= 0.0);
            if leak[q] > caps[q] {
                prop_assert!(next[q] >= lambda[q]);
            } else {
                prop_assert!(next[q] <= lambda[q]);
            }
        }
    }

    #[test]
    fn strict_solutions_respect_power_and_caps((in_cell, victims, weights) in instance(), cap_exp in -12.0..-8.0f64) {
        let caps = vec![10f64.powf(cap_exp); victims.len()];
        let problem = CellProblem {
            in_cell: &in_cell,
            weights: &weights,
            victims: &victims,
            victim_caps: caps.clone(),
            noise_plus_incoming: 1e-11,
            p_max: 100.0,
        };
        let sol = solve_p4(&problem, &SolverOptions::default().strict(true));
        prop_assert!(transmit_power(&sol.w) <= 100.0 * (1.0 + 1e-6));
        for (i, c) in leakage(&sol.w, &victims).iter().zip(&caps) {
            prop_assert!(*i <= c * (1.0 + 1e-9), "leakage {} over cap {}", i, c);
        }
        let again = surrogate_rates(&sol.w, &in_cell, 1e-11);
        let objective: f64 = again.iter().zip(&weights).map(|(r, a)| r * a).sum();
        prop_assert!((objective - sol.objective).abs() <= 1e-9 * objective.max(1.0));
    }

    #[test]
    fn solver_trace_never_decreases_without_victims((in_cell, _, weights) in instance()) {
        let problem = CellProblem {
            in_cell: &in_cell,
            weights: &weights,
            victims: &[],
            victim_caps: vec![],
            noise_plus_incoming: 1e-11,
            p_max: 100.0,
        };
        let sol = solve_p4(&problem, &SolverOptions::default());
        let t = &sol.diagnostics.objective_trace;
        prop_assert!(t.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{:?}", t);
    }
}
