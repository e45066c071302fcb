//! The 1D driving task: an expert accelerates toward `x = 1` and slows as it
//! approaches. The static reward is `-100 (a - expert(x))^2`.
//!
//! The stateful [`Car1d`] environment (position update `x += 0.1 a`, 50
//! steps from `x = 0`) is a local extension used for training smoke runs.

use rand::RngCore;

use super::{ContinuousEnv, Transition};

pub const CAR1D_GAIN: f64 = 0.1;
pub const CAR1D_GOAL: f64 = 1.0;
pub const CAR1D_AGENT_ACTION: f64 = 0.15;
pub const CAR1D_HORIZON: usize = 50;
pub const CAR1D_DT: f64 = 0.1;

pub fn car1d_expert(obs: f64) -> f64 {
    CAR1D_GAIN * (CAR1D_GOAL - obs) + 0.1
}

pub fn car1d_reward(obs: f64, a: f64) -> f64 {
    let d = a - car1d_expert(obs);
    -100.0 * d * d
}

/// `d/da` of [`car1d_reward`].
pub fn car1d_reward_grad_action(obs: f64, a: f64) -> f64 {
    -200.0 * (a - car1d_expert(obs))
}

/// Position after one step.
pub fn car1d_advance(x: f64, a: f64) -> f64 {
    x + CAR1D_DT * a
}

#[derive(Debug, Clone)]
pub struct Car1d {
    x: f64,
    t: usize,
    horizon: usize,
    action_bound: f64,
}

impl Car1d {
    pub fn new() -> Self {
        Self::with_horizon(CAR1D_HORIZON)
    }

    pub fn with_horizon(horizon: usize) -> Self {
        Self {
            x: 0.0,
            t: 0,
            horizon,
            action_bound: 1.0,
        }
    }

    pub fn position(&self) -> f64 {
        self.x
    }
}

impl Default for Car1d {
    fn default() -> Self {
        Self::new()
    }
}

impl ContinuousEnv for Car1d {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_bound(&self) -> f64 {
        self.action_bound
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.x = 0.0;
        self.t = 0;
        vec![self.x]
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.x]
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let a = action[0].clamp(-self.action_bound, self.action_bound);
        let state = vec![self.x];
        let reward = car1d_reward(self.x, a);
        self.x = car1d_advance(self.x, a);
        self.t += 1;
        Transition {
            state,
            action: vec![a],
            next_state: vec![self.x],
            reward_env: reward,
            done: self.t >= self.horizon,
        }
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        vec![car1d_expert(obs[0])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expert_values() {
        assert!((car1d_expert(0.0) - 0.2).abs() < 1e-15);
        assert!((car1d_expert(1.0) - 0.1).abs() < 1e-15);
        assert!((car1d_expert(0.5) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn reward_values() {
        assert_eq!(car1d_reward(0.0, 0.2), 0.0);
        assert!((car1d_reward(0.0, 0.15) + 0.25).abs() < 1e-12);
        assert!((car1d_reward(1.0, 0.2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reward_peaks_on_expert_curve() {
        for i in 0..=20 {
            let obs = i as f64 / 10.0 - 0.5;
            let e = car1d_expert(obs);
            assert_eq!(car1d_reward(obs, e), 0.0);
            assert!(car1d_reward(obs, e + 1e-3) < 0.0);
            assert!(car1d_reward(obs, e - 1e-3) < 0.0);
        }
    }

    #[test]
    fn episode_runs_for_horizon() {
        let mut env = Car1d::new();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        env.reset(&mut rng);
        let mut steps = 0;
        loop {
            let tr = env.step(&[0.15]);
            steps += 1;
            if tr.done {
                break;
            }
        }
        assert_eq!(steps, CAR1D_HORIZON);
        assert!((env.position() - 50.0 * 0.015).abs() < 1e-12);
    }
}
