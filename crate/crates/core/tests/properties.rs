use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use vmdp::dynamics::{
    evaluate_policy, frequencies_to_policy, policy_frequencies, regularize, ActionMap, Policy,
    REACH_TOLERANCE,
};
use vmdp::model::{random_model, Model, RandomModelConfig};
use vmdp::pareto::{enumerate_efficient, recover_weights, EnumerationOptions};
use vmdp::simplex::{solve, Basis, LpProblem, LpStatus};
use vmdp::vlp::{build_program, regular_basis_solve};

fn model(zero_probability: f64) -> impl Strategy<Value = Model> {
    (1..=3usize, 2..=3usize, 2..=4usize, 2..=3usize, any::<u64>()).prop_map(
        move |(s, a, t, k, seed)| {
            let config = RandomModelConfig {
                num_states: s,
                max_actions: a,
                horizon: t,
                num_objectives: k,
                zero_probability,
            };
            random_model(&config, seed).unwrap()
        },
    )
}

fn any_model() -> impl Strategy<Value = Model> {
    prop_oneof![model(0.0), model(0.5)]
}

fn distribution(k: usize) -> BoxedStrategy<Vec<f64>> {
    let deterministic = (0..k).prop_map(move |a| {
        let mut row = vec![0.0; k];
        row[a] = 1.0;
        row
    });
    let mixed =
        prop::collection::vec(prop_oneof![Just(0.0), 0.01..1.0f64], k).prop_map(|mut row| {
            if row.iter().all(|&p| p == 0.0) {
                row[0] = 1.0;
            }
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        });
    prop_oneof![deterministic, mixed].boxed()
}

fn model_and_policy() -> impl Strategy<Value = (Model, Policy)> {
    any_model().prop_flat_map(|m| {
        let q: Vec<Vec<BoxedStrategy<Vec<f64>>>> = (0..m.decision_epochs())
            .map(|_| {
                m.actions_per_state
                    .iter()
                    .map(|&k| distribution(k))
                    .collect()
            })
            .collect();
        (Just(m), q.prop_map(|q| Policy { q }))
    })
}

fn model_and_maps(count: usize) -> impl Strategy<Value = (Model, Vec<ActionMap>, Vec<f64>)> {
    any_model().prop_flat_map(move |m| {
        let map: Vec<Vec<std::ops::Range<usize>>> = (0..m.decision_epochs())
            .map(|_| m.actions_per_state.iter().map(|&k| 0..k).collect())
            .collect();
        (
            Just(m),
            prop::collection::vec(map.prop_map(ActionMap), 1..=count),
            prop::collection::vec(0.01..1.0f64, count),
        )
    })
}

fn dominates(u: &[f64], v: &[f64], tol: f64) -> bool {
    u.iter().zip(v).all(|(a, b)| a >= &(b - tol)) && u.iter().zip(v).any(|(a, b)| a > &(b + tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn policy_frequencies_satisfy_flow_constraints((m, pi) in model_and_policy()) {
        let x = policy_frequencies(&m, &pi).unwrap();
        prop_assert!(x.max_violation(&m).unwrap() <= 1e-9);
        x.check_feasible(&m, 1e-9).unwrap();
    }

    #[test]
    fn value_identity((m, pi) in model_and_policy()) {
        let cp = build_program(&m).unwrap();
        let x = policy_frequencies(&m, &pi).unwrap();
        let lp = cp.value(&cp.flatten(&x));
        let recursion = evaluate_policy(&m, &pi).unwrap();
        for (a, b) in lp.iter().zip(&recursion.aggregate) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn policy_round_trip_is_regularization((m, pi) in model_and_policy()) {
        let x = policy_frequencies(&m, &pi).unwrap();
        let back = frequencies_to_policy(&m, &x).unwrap();
        let regular = regularize(&m, &pi).unwrap();
        for t in 0..m.decision_epochs() {
            for s in 0..m.num_states {
                if x.state_mass(t, s) > REACH_TOLERANCE {
                    for (a, b) in back.q[t][s].iter().zip(&regular.q[t][s]) {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                    }
                }
            }
        }
        let value = evaluate_policy(&m, &pi).unwrap().aggregate;
        let regular_value = evaluate_policy(&m, &regular).unwrap().aggregate;
        for (a, b) in value.iter().zip(&regular_value) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn frequency_round_trip_on_vertex_mixtures((m, maps, raw) in model_and_maps(4)) {
        let cp = build_program(&m).unwrap();
        let total: f64 = raw[..maps.len()].iter().sum();
        let mut mix = vec![0.0; cp.cols()];
        for (actions, w) in maps.iter().zip(&raw) {
            let vertex = regular_basis_solve(&cp, actions).unwrap();
            prop_assert!(vertex.iter().all(|&v| v >= 0.0));
            for (acc, v) in mix.iter_mut().zip(&vertex) {
                *acc += w / total * v;
            }
        }
        let x = cp.unflatten(&mix);
        prop_assert!(x.max_violation(&m).unwrap() <= 1e-9);
        let again = policy_frequencies(&m, &frequencies_to_policy(&m, &x).unwrap()).unwrap();
        prop_assert!(again.distance(&x) <= 1e-9);
    }

    #[test]
    fn regular_basis_vertices_are_feasible((m, maps, _) in model_and_maps(1)) {
        // Zero transitions make some of these vertices degenerate.
        let cp = build_program(&m).unwrap();
        let x = regular_basis_solve(&cp, &maps[0]).unwrap();
        prop_assert!(x.iter().all(|&v| v >= 0.0));
        prop_assert!(cp.residual(&x).iter().all(|r| r.abs() <= 1e-12));
        let positive = x.iter().filter(|&&v| v > 1e-10).count();
        prop_assert!(positive <= cp.rows());
        if cp.is_regular() {
            prop_assert_eq!(positive, cp.rows());
        }
        let pi = Policy::deterministic(&m, &maps[0]);
        let from_policy = cp.flatten(&policy_frequencies(&m, &pi).unwrap());
        for (a, b) in x.iter().zip(&from_policy) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn efficient_values_are_incomparable(m in any_model()) {
        let cp = build_program(&m).unwrap();
        let result = enumerate_efficient(&cp, &EnumerationOptions { parallel: false }).unwrap();
        prop_assert!(!result.vertices.is_empty());
        for u in &result.vertices {
            prop_assert!(u.efficient);
            for v in &result.vertices {
                prop_assert!(!dominates(&u.value, &v.value, 1e-9));
            }
            let cert = recover_weights(&cp, u).unwrap();
            prop_assert!(cert.weights.iter().all(|&p| p > 0.0));
            prop_assert!((cert.resolved_objective - cert.vertex_objective).abs() <= 1e-8);
        }
        let parallel = enumerate_efficient(&cp, &EnumerationOptions { parallel: true }).unwrap();
        prop_assert_eq!(parallel, result);
    }

    #[test]
    fn warm_start_matches_cold_start((m, maps, w) in model_and_maps(1)) {
        let cp = build_program(&m).unwrap();
        let weights: Vec<f64> = (0..cp.num_objectives()).map(|i| w[0] + i as f64).collect();
        let problem = LpProblem::new(cp.scalarized(&weights), cp.a().clone(), cp.b().to_vec()).unwrap();
        let cold = solve(&problem, None).unwrap();
        let start = vmdp::vlp::RegularBasis::new(&cp, maps[0].clone()).unwrap();
        let warm = solve(&problem, Some(&start.columns)).unwrap();
        prop_assert_eq!(cold.status, LpStatus::Optimal);
        prop_assert_eq!(warm.status, LpStatus::Optimal);
        prop_assert!(!warm.used_phase_one);
        assert_abs_diff_eq!(cold.objective_value, warm.objective_value, epsilon = 1e-9);
    }
}

fn random_lp() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1..=4usize, 2..=7usize).prop_flat_map(|(m, extra)| {
        let n = m + extra;
        (
            prop::collection::vec(prop::collection::vec(-1.0..1.0f64, n), m),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn simplex_certificates((rows, x0, c) in random_lp()) {
        let b: Vec<f64> = rows.iter().map(|r| r.iter().zip(&x0).map(|(a, x)| a * x).sum()).collect();
        let problem = LpProblem::from_rows(c.clone(), &rows, b.clone()).unwrap();
        let outcome = solve(&problem, None).unwrap();
        match outcome.status {
            LpStatus::Optimal => {
                for (row, bi) in rows.iter().zip(&b) {
                    let ax: f64 = row.iter().zip(&outcome.x).map(|(a, x)| a * x).sum();
                    assert_abs_diff_eq!(ax, bi, epsilon = 1e-7);
                }
                prop_assert!(outcome.x.iter().all(|&x| x >= -1e-7));
                let basis = Basis::factor(problem.constraints(), outcome.basis.clone()).unwrap();
                let c_b: Vec<f64> = outcome.basis.iter().map(|&j| c[j]).collect();
                let y = basis.solve_transpose(&c_b);
                for j in 0..c.len() {
                    let aty: f64 = rows.iter().zip(&y).map(|(r, yi)| r[j] * yi).sum();
                    prop_assert!(c[j] - aty <= 1e-7, "column {} has reduced cost {}", j, c[j] - aty);
                }
                let dual: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
                assert_abs_diff_eq!(dual, outcome.objective_value, epsilon = 1e-7);

                let again = solve(&problem, Some(&outcome.basis)).unwrap();
                prop_assert_eq!(again.status, LpStatus::Optimal);
                prop_assert_eq!(again.iterations, 0);
                assert_abs_diff_eq!(again.objective_value, outcome.objective_value, epsilon = 1e-9);
            }
            LpStatus::Unbounded => {
                let ray = outcome.ray.clone().unwrap();
                prop_assert!(ray.iter().all(|&d| d >= -1e-9));
                for row in &rows {
                    let ad: f64 = row.iter().zip(&ray).map(|(a, d)| a * d).sum();
                    assert_abs_diff_eq!(ad, 0.0, epsilon = 1e-7);
                }
                let gain: f64 = c.iter().zip(&ray).map(|(ci, d)| ci * d).sum();
                prop_assert!(gain > 0.0);
            }
            // Only possible through rank deficiency since x0 is feasible.
            LpStatus::Infeasible => prop_assert!(outcome.diagnostic.is_some()),
        }
    }
}
