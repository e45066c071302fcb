use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Finite MDP with dense transition tensor `P[s][a][s']` and reward table `r[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::contract("an MDP needs at least one state and one action"));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::contract("transition tensor has the wrong size"));
        }
        if reward.len() != n_states * n_actions || terminal.len() != n_states {
            return Err(Error::contract("reward table or terminal mask has the wrong size"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::contract(format!("discount must lie in [0, 1), got {gamma}")));
        }
        let mdp = Self {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            terminal,
        };
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = mdp.next_state_probs(s, a);
                if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::contract(format!("P[{s}][{a}] is not a probability vector")));
                }
                if mdp.terminal[s] && (row[s] != 1.0 || mdp.reward(s, a) != 0.0) {
                    return Err(Error::contract(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        Ok(mdp)
    }

    /// Random MDP with Dirichlet-like transition rows and rewards in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let raw: Vec<f64> = (0..n_states).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
            // renormalize the last entry so the row sums to 1 in floating point
            let head: f64 = row[..n_states - 1].iter().sum();
            row[n_states - 1] = 1.0 - head;
            transition.extend(row);
        }
        let reward = (0..n_states * n_actions).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self::new(n_states, n_actions, transition, reward, gamma, vec![false; n_states])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Grid-world moves. "Up" decreases the row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Left, GridAction::Right, GridAction::Up, GridAction::Down];
}

/// Grid-world layout used to build its [`TabularMdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    pub goal: (usize, usize),
}

pub const GRIDWORLD_GAMMA: f64 = 0.9;

impl GridWorld {
    /// 5x5 grid with the goal in the bottom-right corner.
    pub fn default_suite() -> Self {
        Self {
            width: 5,
            height: 5,
            goal: (4, 4),
        }
    }

    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s % self.width, s / self.width)
    }

    pub fn next_cell(&self, (x, y): (usize, usize), a: GridAction) -> (usize, usize) {
        match a {
            GridAction::Left => (x.saturating_sub(1), y),
            GridAction::Right => ((x + 1).min(self.width - 1), y),
            GridAction::Up => (x, y.saturating_sub(1)),
            GridAction::Down => (x, (y + 1).min(self.height - 1)),
        }
    }
}

/// Deterministic grid world: walls keep the agent in place, entering the goal
/// pays 1, and the goal is absorbing with zero reward. Discount 0.9.
pub fn make_gridworld(width: usize, height: usize, goal: (usize, usize)) -> Result<TabularMdp> {
    if width == 0 || height == 0 || width * height < 2 {
        return Err(Error::contract("grid must have at least two cells"));
    }
    if goal.0 >= width || goal.1 >= height {
        return Err(Error::contract(format!(
            "goal {goal:?} lies outside a {width}x{height} grid"
        )));
    }
    let grid = GridWorld { width, height, goal };
    let n = width * height;
    let na = GridAction::ALL.len();
    let goal_s = grid.state(goal.0, goal.1);
    let mut transition = vec![0.0; n * na * n];
    let mut reward = vec![0.0; n * na];
    let mut terminal = vec![false; n];
    terminal[goal_s] = true;
    for s in 0..n {
        for (ai, &a) in GridAction::ALL.iter().enumerate() {
            let next = if s == goal_s {
                goal_s
            } else {
                let (x, y) = grid.next_cell(grid.cell(s), a);
                grid.state(x, y)
            };
            transition[(s * na + ai) * n + next] = 1.0;
            if s != goal_s && next == goal_s {
                reward[s * na + ai] = 1.0;
            }
        }
    }
    TabularMdp::new(n, na, transition, reward, GRIDWORLD_GAMMA, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_cell_grid_rewards_only_right_from_left() {
        let mdp = make_gridworld(2, 1, (1, 0)).unwrap();
        for (ai, a) in GridAction::ALL.iter().enumerate() {
            let expected = if *a == GridAction::Right { 1.0 } else { 0.0 };
            assert_eq!(mdp.reward(0, ai), expected);
            assert_eq!(mdp.reward(1, ai), 0.0);
        }
    }

    #[test]
    fn corner_goal_has_two_rewarding_pairs() {
        let mdp = make_gridworld(5, 5, (4, 4)).unwrap();
        let count = mdp.rewards().iter().filter(|&&r| r == 1.0).count();
        assert_eq!(count, 2);
        assert!(mdp.is_terminal(24));
        assert_eq!(mdp.gamma(), 0.9);
    }

    #[test]
    fn rows_are_distributions() {
        let mdp = make_gridworld(4, 3, (1, 2)).unwrap();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                assert!((mdp.next_state_probs(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn walls_keep_agent_in_place() {
        let mdp = make_gridworld(3, 3, (2, 2)).unwrap();
        assert_eq!(mdp.next_state_probs(0, GridAction::Left as usize)[0], 1.0);
        assert_eq!(mdp.next_state_probs(0, GridAction::Up as usize)[0], 1.0);
    }

    #[test]
    fn out_of_bounds_goal_rejected() {
        assert!(matches!(make_gridworld(3, 3, (3, 0)), Err(Error::Contract(_))));
    }

    #[test]
    fn random_mdps_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            TabularMdp::random(4, 3, 0.9, &mut rng).unwrap();
        }
    }

    #[test]
    fn discount_of_one_rejected() {
        let r = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 1.0, vec![false]);
        assert!(r.is_err());
    }
}
