//! Toy environments with fully specified dynamics, rewards and scripted experts.

mod car1d;
mod dataset;
mod planar;
mod tabular;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use car1d::{
    car1d_advance, car1d_expert, car1d_reward, car1d_reward_grad_action, Car1d, CAR1D_AGENT_ACTION, CAR1D_DT,
    CAR1D_HORIZON,
};
pub use dataset::{generate_expert_dataset, read_trajectories_csv, rollout, write_trajectories_csv};
pub use planar::{
    clamp_action, planar_reach_step, push_expert, reach_expert, resolve_push, PlanarPush, PlanarReach, BLOCK_RADIUS,
    EFFECTOR_RADIUS, EXPERT_GAIN, INIT_NOISE_STD, MAX_STEP, PUSH_HORIZON, REACH_HORIZON,
};
pub use tabular::{make_gridworld, GridAction, GridWorld, TabularMdp, GRIDWORLD_GAMMA};

use crate::error::{Error, Result};

/// One environment step `(s, a, s', r, done)`; `done` marks the last step of
/// the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward_env: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub episode_return: f64,
}

impl Trajectory {
    pub fn push(&mut self, tr: Transition) {
        self.episode_return += tr.reward_env;
        self.transitions.push(tr);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Continuous-control environment with a fixed horizon and per-axis action clamp.
pub trait ContinuousEnv {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn action_bound(&self) -> f64;
    /// Starts a new episode; all initial-state noise is drawn from `rng`.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn observe(&self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Transition;
    /// The scripted expert's action for an observation of this environment.
    fn expert_action(&self, obs: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Reach,
    Push,
    Car1d,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn ContinuousEnv> {
        match self {
            EnvKind::Reach => Box::new(PlanarReach::new()),
            EnvKind::Push => Box::new(PlanarPush::new()),
            EnvKind::Car1d => Box::new(Car1d::new()),
        }
    }

    pub fn make_noiseless(self) -> Box<dyn ContinuousEnv> {
        match self {
            EnvKind::Reach => Box::new(PlanarReach::with_noise(0.0)),
            EnvKind::Push => Box::new(PlanarPush::with_noise(0.0)),
            EnvKind::Car1d => Box::new(Car1d::new()),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "reach" | "planar_reach" => Ok(EnvKind::Reach),
            "push" | "planar_push" => Ok(EnvKind::Push),
            "car1d" => Ok(EnvKind::Car1d),
            other => Err(Error::contract(format!("unknown environment kind `{other}`"))),
        }
    }
}

/// Scripted expert action for an environment kind.
pub fn scripted_expert(kind: EnvKind, state: &[f64]) -> Result<Vec<f64>> {
    match kind {
        EnvKind::Reach if state.len() == 2 => Ok(reach_expert(state).to_vec()),
        EnvKind::Push if state.len() == 4 => Ok(push_expert(state).to_vec()),
        EnvKind::Car1d if state.len() == 1 => Ok(vec![car1d_expert(state[0])]),
        _ => Err(Error::contract(format!(
            "state of length {} does not fit environment {kind:?}",
            state.len()
        ))),
    }
}
