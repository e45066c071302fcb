//! Exact dynamic programming on a [`TabularMdp`] with either critic:
//!
//! - `Q(s,a) = r(s,a) + γ Σ P(s'|s,a) Σ π(a'|s') Q(s',a')`
//! - `C(s,a) = γ Σ P(s'|s,a) Σ π(a'|s') (r(s',a') + C(s',a'))`
//!
//! so that `Q = r + C` for every policy.
//!
//! Both backups share the linear part `L(X) = γ P π X`. Iterates are
//! advanced in increment form, `X ← X + Δ`, `Δ ← L(Δ)`, which computes the
//! same sequence as applying the backup directly while keeping each
//! increment accurate to relative round-off; the sup-norm of `Δ` is the
//! per-iteration residual.

use serde::{Deserialize, Serialize};

use crate::env::TabularMdp;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Greedy values closer than this are treated as ties (lowest action wins).
pub const TIE_EPS: f64 = 1e-9;
const MAX_EVAL_ITERS: usize = 1_000_000;
const MAX_IMPROVEMENTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticKind {
    Q,
    C,
}

/// Stochastic tabular policy `π[s][a]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::contract("policy table has the wrong size"));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::contract(format!("policy row {s} is not a distribution")));
            }
        }
        Ok(Self { n_actions, probs })
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self { n_actions, probs }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    /// Most probable action per state (the action itself for deterministic policies).
    pub fn greedy_actions(&self) -> Vec<usize> {
        self.probs
            .chunks(self.n_actions)
            .map(|row| argmax_lowest(row, 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub kind: CriticKind,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(kind: CriticKind, n_states: usize, n_actions: usize) -> Self {
        Self {
            kind,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        sup_diff(&self.values, &other.values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub table: ValueTable,
    /// `‖X^{n+1} − X^n‖∞` for every backup performed.
    pub residuals: Vec<f64>,
}

impl Evaluation {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `L(X)(s,a) = γ Σ_{s'} P(s'|s,a) Σ_{a'} π(a'|s') X(s',a')`.
fn linear_backup(mdp: &TabularMdp, policy: &TabularPolicy, x: &[f64], out: &mut [f64]) {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut v = vec![0.0; ns];
    for (s, vs) in v.iter_mut().enumerate() {
        *vs = (0..na).map(|a| policy.prob(s, a) * x[s * na + a]).sum();
    }
    for s in 0..ns {
        for a in 0..na {
            let p = mdp.next_state_probs(s, a);
            out[s * na + a] = mdp.gamma() * p.iter().zip(&v).map(|(pi, vi)| pi * vi).sum::<f64>();
        }
    }
}

/// The full backup `T(X)` for the chosen critic.
pub fn backup(mdp: &TabularMdp, policy: &TabularPolicy, kind: CriticKind, x: &[f64]) -> Vec<f64> {
    let r = mdp.rewards();
    let mut out = vec![0.0; x.len()];
    match kind {
        CriticKind::Q => {
            linear_backup(mdp, policy, x, &mut out);
            for (o, ri) in out.iter_mut().zip(r) {
                *o += ri;
            }
        }
        CriticKind::C => {
            let shifted: Vec<f64> = x.iter().zip(r).map(|(xi, ri)| xi + ri).collect();
            linear_backup(mdp, policy, &shifted, &mut out);
        }
    }
    out
}

fn check_inputs(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::contract("evaluation tolerance must be positive"));
    }
    if !(mdp.gamma() < 1.0) {
        return Err(Error::contract("discount must be below 1"));
    }
    if policy.n_states() != mdp.n_states() || policy.n_actions != mdp.n_actions() {
        return Err(Error::contract("policy shape does not match the MDP"));
    }
    Ok(())
}

/// Iterates the chosen backup from `init` until the distance to the fixed
/// point is provably below `tol`, i.e. `γ/(1−γ)·‖Δ‖∞ < tol`.
pub fn evaluate_from(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    kind: CriticKind,
    init: &ValueTable,
    tol: f64,
) -> Result<Evaluation> {
    check_inputs(mdp, policy, tol)?;
    if init.values.len() != mdp.n_states() * mdp.n_actions() {
        return Err(Error::contract("initial table shape does not match the MDP"));
    }
    let gamma = mdp.gamma();
    let mut x = init.values.clone();
    let mut delta: Vec<f64> = backup(mdp, policy, kind, &x)
        .iter()
        .zip(&x)
        .map(|(t, xi)| t - xi)
        .collect();
    let mut next = vec![0.0; x.len()];
    let mut residuals = Vec::new();
    loop {
        for (xi, d) in x.iter_mut().zip(&delta) {
            *xi += d;
        }
        let res = sup_norm(&delta);
        residuals.push(res);
        if gamma * res <= tol * (1.0 - gamma) || res == 0.0 {
            break;
        }
        if residuals.len() >= MAX_EVAL_ITERS {
            return Err(Error::NonFinite("policy evaluation did not converge".into()));
        }
        linear_backup(mdp, policy, &delta, &mut next);
        std::mem::swap(&mut delta, &mut next);
    }
    Ok(Evaluation {
        table: ValueTable {
            kind,
            n_actions: mdp.n_actions(),
            values: x,
        },
        residuals,
    })
}

/// Policy evaluation of the residual critic `C^π`, starting from zero.
pub fn evaluate_c(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<Evaluation> {
    let init = ValueTable::zeros(CriticKind::C, mdp.n_states(), mdp.n_actions());
    evaluate_from(mdp, policy, CriticKind::C, &init, tol)
}

/// Policy evaluation of `Q^π`, starting from zero.
pub fn evaluate_q(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<Evaluation> {
    let init = ValueTable::zeros(CriticKind::Q, mdp.n_states(), mdp.n_actions());
    evaluate_from(mdp, policy, CriticKind::Q, &init, tol)
}

fn argmax_lowest(row: &[f64], eps: f64) -> usize {
    let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.iter().position(|&v| v >= best - eps).unwrap_or(0)
}

/// Greedy scores `r + C` (for C tables) or `Q` (for Q tables).
fn greedy_scores(mdp: &TabularMdp, table: &ValueTable) -> Vec<f64> {
    match table.kind {
        CriticKind::Q => table.values.clone(),
        CriticKind::C => table.values.iter().zip(mdp.rewards()).map(|(c, r)| c + r).collect(),
    }
}

fn greedy(mdp: &TabularMdp, table: &ValueTable) -> TabularPolicy {
    let na = mdp.n_actions();
    let actions: Vec<usize> = greedy_scores(mdp, table)
        .chunks(na)
        .map(|row| argmax_lowest(row, TIE_EPS))
        .collect();
    TabularPolicy::deterministic(na, &actions)
}

/// Deterministic greedy policy over `r + C`; ties go to the lowest action index.
pub fn improve_from_c(mdp: &TabularMdp, c_table: &ValueTable) -> Result<TabularPolicy> {
    if c_table.kind != CriticKind::C {
        return Err(Error::contract("improve_from_c needs a C table"));
    }
    Ok(greedy(mdp, c_table))
}

/// Deterministic greedy policy over `Q`.
pub fn improve_from_q(mdp: &TabularMdp, q_table: &ValueTable) -> Result<TabularPolicy> {
    if q_table.kind != CriticKind::Q {
        return Err(Error::contract("improve_from_q needs a Q table"));
    }
    Ok(greedy(mdp, q_table))
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyIterationResult {
    pub policy: TabularPolicy,
    pub table: ValueTable,
    pub improvement_steps: usize,
    /// Residual trace of every evaluation phase, in order.
    pub residual_history: Vec<Vec<f64>>,
    /// State values `V(s) = Σ_a π(a|s) Q(s,a)` after each evaluation.
    pub value_history: Vec<Vec<f64>>,
}

/// Policy iteration from the zero table. The initial policy is greedy with
/// respect to `r + C⁰` (equivalently `Q⁰ = r`), so both critics start from
/// the same policy.
pub fn policy_iteration(mdp: &TabularMdp, kind: CriticKind, tol: f64) -> Result<PolicyIterationResult> {
    let init = match kind {
        CriticKind::C => ValueTable::zeros(CriticKind::C, mdp.n_states(), mdp.n_actions()),
        CriticKind::Q => ValueTable {
            kind: CriticKind::Q,
            n_actions: mdp.n_actions(),
            values: mdp.rewards().to_vec(),
        },
    };
    policy_iteration_from(mdp, &init, tol)
}

/// Policy iteration seeded with an arbitrary initial table. Each evaluation
/// phase warm-starts from the previous table.
pub fn policy_iteration_from(mdp: &TabularMdp, init: &ValueTable, tol: f64) -> Result<PolicyIterationResult> {
    let kind = init.kind;
    let mut policy = greedy(mdp, init);
    let mut table = init.clone();
    let mut residual_history = Vec::new();
    let mut value_history = Vec::new();
    let mut steps = 0;
    loop {
        let eval = evaluate_from(mdp, &policy, kind, &table, tol)?;
        table = eval.table;
        residual_history.push(eval.residuals);
        value_history.push(state_values(mdp, &policy, &table));
        let next = greedy(mdp, &table);
        steps += 1;
        if next == policy {
            break;
        }
        if steps >= MAX_IMPROVEMENTS {
            return Err(Error::NonFinite("policy iteration did not terminate".into()));
        }
        policy = next;
    }
    Ok(PolicyIterationResult {
        policy,
        table,
        improvement_steps: steps,
        residual_history,
        value_history,
    })
}

/// `V(s) = Σ_a π(a|s) (r(s,a) + C(s,a))` for C tables, `Σ_a π Q` for Q tables.
pub fn state_values(mdp: &TabularMdp, policy: &TabularPolicy, table: &ValueTable) -> Vec<f64> {
    let na = mdp.n_actions();
    greedy_scores(mdp, table)
        .chunks(na)
        .enumerate()
        .map(|(s, row)| row.iter().enumerate().map(|(a, q)| policy.prob(s, a) * q).sum())
        .collect()
}

/// `‖Q − (r + C)‖∞`.
pub fn q_minus_r_plus_c(mdp: &TabularMdp, q: &ValueTable, c: &ValueTable) -> f64 {
    q.values
        .iter()
        .zip(&c.values)
        .zip(mdp.rewards())
        .map(|((qv, cv), r)| (qv - (r + cv)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_gridworld, GridAction};

    fn self_loop(r: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![r], 0.9, vec![false]).unwrap()
    }

    #[test]
    fn single_self_loop_closed_forms() {
        let mdp = self_loop(1.0);
        let pi = TabularPolicy::uniform(1, 1);
        let c = evaluate_c(&mdp, &pi, 1e-12).unwrap();
        let q = evaluate_q(&mdp, &pi, 1e-12).unwrap();
        assert!((c.table.values[0] - 9.0).abs() < 1e-11);
        assert!((q.table.values[0] - 10.0).abs() < 1e-11);
    }

    #[test]
    fn zero_rewards_give_zero_tables() {
        let mdp = self_loop(0.0);
        let pi = TabularPolicy::uniform(1, 1);
        assert_eq!(evaluate_c(&mdp, &pi, 1e-10).unwrap().table.values, vec![0.0]);
        assert_eq!(evaluate_q(&mdp, &pi, 1e-10).unwrap().table.values, vec![0.0]);
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let mdp = self_loop(1.0);
        let pi = TabularPolicy::uniform(1, 1);
        assert!(evaluate_c(&mdp, &pi, 0.0).is_err());
    }

    #[test]
    fn zero_c_improves_greedily_on_reward() {
        let mdp = make_gridworld(2, 1, (1, 0)).unwrap();
        let c = ValueTable::zeros(CriticKind::C, 2, 4);
        let pi = improve_from_c(&mdp, &c).unwrap();
        assert_eq!(pi.greedy_actions()[0], GridAction::Right as usize);
        // all-zero row at the goal: lowest index
        assert_eq!(pi.greedy_actions()[1], 0);
    }

    #[test]
    fn wrong_table_kind_rejected() {
        let mdp = self_loop(1.0);
        let q = ValueTable::zeros(CriticKind::Q, 1, 1);
        assert!(improve_from_c(&mdp, &q).is_err());
    }

    #[test]
    fn single_state_converges_in_one_step() {
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![0.5, 1.0], 0.9, vec![false]).unwrap();
        for kind in [CriticKind::C, CriticKind::Q] {
            let res = policy_iteration(&mdp, kind, DEFAULT_TOL).unwrap();
            assert_eq!(res.improvement_steps, 1);
            assert_eq!(res.policy.greedy_actions(), vec![1]);
        }
    }

    #[test]
    fn goal_neighbours_have_zero_c_and_unit_q() {
        let mdp = make_gridworld(5, 5, (4, 4)).unwrap();
        let c = policy_iteration(&mdp, CriticKind::C, DEFAULT_TOL).unwrap();
        let q = policy_iteration(&mdp, CriticKind::Q, DEFAULT_TOL).unwrap();
        // (3,4) and (4,3) step into the goal
        for s in [23usize, 19] {
            let a = c.policy.greedy_actions()[s];
            assert!(c.table.get(s, a).abs() < 1e-9);
            assert!((q.table.get(s, a) - 1.0).abs() < 1e-9);
        }
    }
}
