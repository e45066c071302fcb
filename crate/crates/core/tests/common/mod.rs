//! Oracles shared by the integration tests.
#![allow(dead_code)]

use arc_core::env::TabularMdp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Solves `(I − γ P_π) V = r_π` by Gaussian elimination with partial pivoting.
pub fn exact_state_values(mdp: &TabularMdp, actions: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let mut m = vec![vec![0.0; n + 1]; n];
    for s in 0..n {
        let p = mdp.next_state_probs(s, actions[s]);
        for t in 0..n {
            m[s][t] = if s == t { 1.0 } else { 0.0 } - mdp.gamma() * p[t];
        }
        m[s][n] = mdp.reward(s, actions[s]);
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

pub fn enumerate_best(mdp: &TabularMdp) -> (Vec<usize>, Vec<f64>) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let total = na.pow(ns as u32);
    let mut best: Option<(Vec<usize>, Vec<f64>)> = None;
    for code in 0..total {
        let mut c = code;
        let actions: Vec<usize> = (0..ns)
            .map(|_| {
                let a = c % na;
                c /= na;
                a
            })
            .collect();
        let v = exact_state_values(mdp, &actions);
        let better = match &best {
            None => true,
            Some((_, bv)) => v.iter().sum::<f64>() > bv.iter().sum::<f64>(),
        };
        if better {
            best = Some((actions, v));
        }
    }
    best.unwrap()
}

pub fn random_mdps() -> Vec<TabularMdp> {
    (0..20)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            TabularMdp::random(4, 3, 0.9, &mut rng).unwrap()
        })
        .collect()
}
