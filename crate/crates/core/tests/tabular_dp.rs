use arc_core::dp::{
    evaluate_c, evaluate_from, evaluate_q, improve_from_c, improve_from_q, policy_iteration, policy_iteration_from,
    q_minus_r_plus_c, CriticKind, TabularPolicy, ValueTable, DEFAULT_TOL,
};
use arc_core::env::{make_gridworld, GridWorld};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{enumerate_best, exact_state_values, random_mdps};

#[test]
fn pi_matches_exhaustive_enumeration() {
    for mdp in random_mdps() {
        let (best_actions, best_v) = enumerate_best(&mdp);
        for kind in [CriticKind::C, CriticKind::Q] {
            let res = policy_iteration(&mdp, kind, DEFAULT_TOL).unwrap();
            assert_eq!(res.policy.greedy_actions(), best_actions);
            let v = exact_state_values(&mdp, &res.policy.greedy_actions());
            for (a, b) in v.iter().zip(&best_v) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn c_and_q_iteration_agree() {
    let g = GridWorld::default_suite();
    let mut mdps = vec![make_gridworld(g.width, g.height, g.goal).unwrap()];
    mdps.extend(random_mdps());
    for mdp in mdps {
        let c = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
        let q = policy_iteration(&mdp, CriticKind::Q, DEFAULT_TOL).unwrap();
        assert_eq!(c.policy, q.policy);
        assert_eq!(c.improvement_steps, q.improvement_steps);
        assert!(q_minus_r_plus_c(&mdp, &q.table, &c.table) < 2.0 * DEFAULT_TOL);
    }
}

#[test]
fn q_equals_r_plus_c_for_arbitrary_policies() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for mdp in random_mdps() {
        let probs: Vec<f64> = (0..4)
            .flat_map(|_| {
                let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.01).collect();
                let s: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / s).collect();
                row[2] = 1.0 - row[0] - row[1];
                row
            })
            .collect();
        let pi = TabularPolicy::new(4, 3, probs).unwrap();
        let c = evaluate_c(&mdp, &pi, DEFAULT_TOL).unwrap();
        let q = evaluate_q(&mdp, &pi, DEFAULT_TOL).unwrap();
        assert!(q_minus_r_plus_c(&mdp, &q.table, &c.table) < 2.0 * DEFAULT_TOL);
    }
}

#[test]
fn residuals_contract_by_gamma() {
    for mdp in random_mdps() {
        let pi = TabularPolicy::uniform(4, 3);
        let eval = evaluate_c(&mdp, &pi, DEFAULT_TOL).unwrap();
        for w in eval.residuals.windows(2) {
            assert!(w[1] <= (mdp.gamma() + 1e-12) * w[0], "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn iteration_count_within_geometric_bound() {
    for mdp in random_mdps() {
        let pi = TabularPolicy::uniform(4, 3);
        for tol in [1e-4, 1e-8, 1e-10] {
            let eval = evaluate_c(&mdp, &pi, tol).unwrap();
            let r0 = eval.residuals[0];
            let g = mdp.gamma();
            let bound = ((tol * (1.0 - g) / r0).ln() / g.ln()).ceil() as usize;
            assert!(eval.iterations() <= bound.max(1), "{} > {bound}", eval.iterations());
        }
    }
}

#[test]
fn optimal_c_is_unique_across_initialisations() {
    let mdp = random_mdps().remove(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let reference = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
    for _ in 0..5 {
        let init = ValueTable {
            kind: CriticKind::C,
            n_actions: 3,
            values: (0..12).map(|_| rng.random_range(-20.0..20.0)).collect(),
        };
        let res = policy_iteration_from(&mdp, &init, DEFAULT_TOL).unwrap();
        assert!(res.table.sup_distance(&reference.table) < 10.0 * DEFAULT_TOL);
        assert_eq!(res.policy, reference.policy);
    }
}

#[test]
fn greedy_returns_never_decrease() {
    for mdp in random_mdps() {
        let res = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
        for w in res.value_history.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(*b >= a - 1e-9);
            }
        }
    }
}

#[test]
fn value_tables_respect_reward_bounds() {
    for mdp in random_mdps() {
        let g = mdp.gamma();
        let rmax = mdp.max_abs_reward();
        let c = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
        let q = policy_iteration(&mdp, CriticKind::Q, DEFAULT_TOL).unwrap();
        assert!(c.table.values.iter().all(|v| v.abs() <= rmax * g / (1.0 - g) + 1e-9));
        assert!(q.table.values.iter().all(|v| v.abs() <= rmax / (1.0 - g) + 1e-9));
    }
}

#[test]
fn grid_greedy_over_c_equals_greedy_over_q() {
    let mdp = make_gridworld(5, 5, (4, 4)).unwrap();
    let pi = TabularPolicy::uniform(25, 4);
    let c = evaluate_from(&mdp, &pi, CriticKind::C, &ValueTable::zeros(CriticKind::C, 25, 4), DEFAULT_TOL).unwrap();
    let q = evaluate_q(&mdp, &pi, DEFAULT_TOL).unwrap();
    assert_eq!(improve_from_c(&mdp, &c.table).unwrap(), improve_from_q(&mdp, &q.table).unwrap());
}

#[test]
fn two_cell_grid_picks_right() {
    let mdp = make_gridworld(2, 1, (1, 0)).unwrap();
    let res = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
    assert_eq!(res.policy.greedy_actions()[0], 1);
}
