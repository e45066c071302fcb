//! Planar replicas of the Fetch reach and push tasks.
//!
//! Positions are in meters in a frame where the end effector starts at the
//! origin. Actions are end-effector displacements, clamped per axis to
//! `±MAX_STEP`. Rewards are the negated goal distance after the move.

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use super::{ContinuousEnv, Transition};

pub const MAX_STEP: f64 = 0.033;
pub const INIT_NOISE_STD: f64 = 0.0001;
pub const REACH_HORIZON: usize = 20;
pub const PUSH_HORIZON: usize = 30;
pub const REACH_GOAL: [f64; 2] = [0.15, -0.15];
pub const PUSH_BLOCK: [f64; 2] = [0.0, -0.10];
pub const PUSH_GOAL: [f64; 2] = [0.0, -0.30];
pub const EFFECTOR_RADIUS: f64 = 0.02;
pub const BLOCK_RADIUS: f64 = 0.025;

/// Proportional gain of the scripted experts.
pub const EXPERT_GAIN: f64 = 0.5;
/// Approach waypoint distance behind the block's contact circle.
pub const PUSH_WAYPOINT_OFFSET: f64 = 0.03;

pub fn clamp_action(action: &[f64], bound: f64) -> [f64; 2] {
    [action[0].clamp(-bound, bound), action[1].clamp(-bound, bound)]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn sample_offset(base: [f64; 2], std: f64, rng: &mut dyn RngCore) -> [f64; 2] {
    if std == 0.0 {
        return base;
    }
    let n = Normal::new(0.0, std).expect("finite std");
    [base[0] + n.sample(rng), base[1] + n.sample(rng)]
}

/// Goal-reaching task; the observation is `goal - effector`.
#[derive(Debug, Clone)]
pub struct PlanarReach {
    offset: [f64; 2],
    t: usize,
    pub noise_std: f64,
    pub horizon: usize,
}

impl PlanarReach {
    pub fn new() -> Self {
        Self {
            offset: REACH_GOAL,
            t: 0,
            noise_std: INIT_NOISE_STD,
            horizon: REACH_HORIZON,
        }
    }

    pub fn with_noise(noise_std: f64) -> Self {
        Self {
            noise_std,
            ..Self::new()
        }
    }

    /// Sets the goal offset directly (used by tests and probes).
    pub fn set_offset(&mut self, offset: [f64; 2]) {
        self.offset = offset;
        self.t = 0;
    }
}

impl Default for PlanarReach {
    fn default() -> Self {
        Self::new()
    }
}

/// One reach transition from `offset`, independent of episode bookkeeping.
pub fn planar_reach_step(offset: [f64; 2], action: &[f64]) -> ([f64; 2], f64) {
    let a = clamp_action(action, MAX_STEP);
    let next = [offset[0] - a[0], offset[1] - a[1]];
    (next, -norm(next))
}

impl ContinuousEnv for PlanarReach {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_bound(&self) -> f64 {
        MAX_STEP
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.offset = sample_offset(REACH_GOAL, self.noise_std, rng);
        self.t = 0;
        self.offset.to_vec()
    }

    fn observe(&self) -> Vec<f64> {
        self.offset.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let state = self.offset.to_vec();
        let (next, reward) = planar_reach_step(self.offset, action);
        self.offset = next;
        self.t += 1;
        Transition {
            state,
            action: clamp_action(action, MAX_STEP).to_vec(),
            next_state: next.to_vec(),
            reward_env: reward,
            done: self.t >= self.horizon,
        }
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        reach_expert(obs).to_vec()
    }
}

/// Saturating proportional controller toward the goal.
pub fn reach_expert(offset: &[f64]) -> [f64; 2] {
    clamp_action(&[EXPERT_GAIN * offset[0], EXPERT_GAIN * offset[1]], MAX_STEP)
}

/// Block-pushing task with rigid disc contact (no friction, no rotation).
///
/// The observation is `(block - effector, goal - block)`.
#[derive(Debug, Clone)]
pub struct PlanarPush {
    effector: [f64; 2],
    block: [f64; 2],
    goal: [f64; 2],
    t: usize,
    pub noise_std: f64,
    pub horizon: usize,
}

impl PlanarPush {
    pub fn new() -> Self {
        Self {
            effector: [0.0, 0.0],
            block: PUSH_BLOCK,
            goal: PUSH_GOAL,
            t: 0,
            noise_std: INIT_NOISE_STD,
            horizon: PUSH_HORIZON,
        }
    }

    pub fn with_noise(noise_std: f64) -> Self {
        Self {
            noise_std,
            ..Self::new()
        }
    }

    /// Places effector, block and goal explicitly.
    pub fn set_layout(&mut self, effector: [f64; 2], block: [f64; 2], goal: [f64; 2]) {
        self.effector = effector;
        self.block = block;
        self.goal = goal;
        self.t = 0;
    }

    pub fn block(&self) -> [f64; 2] {
        self.block
    }

    pub fn effector(&self) -> [f64; 2] {
        self.effector
    }

    fn obs(&self) -> Vec<f64> {
        let rel_block = sub(self.block, self.effector);
        let rel_goal = sub(self.goal, self.block);
        vec![rel_block[0], rel_block[1], rel_goal[0], rel_goal[1]]
    }
}

impl Default for PlanarPush {
    fn default() -> Self {
        Self::new()
    }
}

/// Moves the effector by `displacement` and resolves block overlap by
/// translating the block along the displacement direction until the discs
/// just touch. Returns the new `(effector, block)`.
pub fn resolve_push(effector: [f64; 2], block: [f64; 2], displacement: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let e = [effector[0] + displacement[0], effector[1] + displacement[1]];
    let contact = EFFECTOR_RADIUS + BLOCK_RADIUS;
    let d = sub(block, e);
    let dist = norm(d);
    let step = norm(displacement);
    if dist >= contact || step == 0.0 {
        return (e, block);
    }
    let u = [displacement[0] / step, displacement[1] / step];
    // smallest t > 0 with |d + t u| = contact
    let du = d[0] * u[0] + d[1] * u[1];
    let t = -du + (du * du - dist * dist + contact * contact).sqrt();
    (e, [block[0] + t * u[0], block[1] + t * u[1]])
}

impl ContinuousEnv for PlanarPush {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_bound(&self) -> f64 {
        MAX_STEP
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.effector = [0.0, 0.0];
        self.block = sample_offset(PUSH_BLOCK, self.noise_std, rng);
        self.goal = sample_offset(PUSH_GOAL, self.noise_std, rng);
        self.t = 0;
        self.obs()
    }

    fn observe(&self) -> Vec<f64> {
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Transition {
        let state = self.obs();
        let a = clamp_action(action, MAX_STEP);
        let (e, b) = resolve_push(self.effector, self.block, a);
        self.effector = e;
        self.block = b;
        self.t += 1;
        Transition {
            state,
            action: a.to_vec(),
            next_state: self.obs(),
            reward_env: -norm(sub(self.goal, self.block)),
            done: self.t >= self.horizon,
        }
    }

    fn expert_action(&self, obs: &[f64]) -> Vec<f64> {
        push_expert(obs).to_vec()
    }
}

/// Two-phase push controller working purely from the observation.
///
/// When the effector sits behind the block on the block→goal line it drives
/// `clamp(K (goal - block))`, which the contact transmits to the block.
/// Otherwise it heads for a waypoint `PUSH_WAYPOINT_OFFSET` behind the
/// block's contact circle on that line.
pub fn push_expert(obs: &[f64]) -> [f64; 2] {
    let rel_block = [obs[0], obs[1]];
    let to_goal = [obs[2], obs[3]];
    let dist = norm(to_goal);
    if dist < 1e-9 {
        return [0.0, 0.0];
    }
    let u = [to_goal[0] / dist, to_goal[1] / dist];
    // effector relative to block is -rel_block
    let along = rel_block[0] * u[0] + rel_block[1] * u[1];
    let perp = (rel_block[0] * u[1] - rel_block[1] * u[0]).abs();
    if along > 0.0 && perp < 0.01 {
        clamp_action(&[EXPERT_GAIN * to_goal[0], EXPERT_GAIN * to_goal[1]], MAX_STEP)
    } else {
        let back = EFFECTOR_RADIUS + BLOCK_RADIUS + PUSH_WAYPOINT_OFFSET;
        let waypoint = [rel_block[0] - back * u[0], rel_block[1] - back * u[1]];
        clamp_action(&waypoint, MAX_STEP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reach_zero_distance_zero_reward() {
        let (next, r) = planar_reach_step([0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(next, [0.0, 0.0]);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn reach_saturated_step() {
        let (next, r) = planar_reach_step([0.15, -0.15], &[0.033, -0.033]);
        assert!((next[0] - 0.117).abs() < 1e-12 && (next[1] + 0.117).abs() < 1e-12);
        assert!((r + 0.117 * 2f64.sqrt()).abs() < 1e-12);
        assert!((r + 0.1655).abs() < 1e-4);
    }

    #[test]
    fn reach_clamps_large_actions() {
        let (next, _) = planar_reach_step([0.0, 0.0], &[1.0, -5.0]);
        assert_eq!(next, [-MAX_STEP, MAX_STEP]);
    }

    #[test]
    fn reach_expert_regimes() {
        let a = reach_expert(&[0.001, 0.0]);
        assert!((a[0] - 0.0005).abs() < 1e-15 && a[1] == 0.0);
        assert_eq!(reach_expert(&[0.15, -0.15]), [0.033, -0.033]);
    }

    #[test]
    fn push_without_contact_leaves_block() {
        let (e, b) = resolve_push([0.0, 0.0], [0.0, -0.1], [0.033, 0.0]);
        assert_eq!(e, [0.033, 0.0]);
        assert_eq!(b, [0.0, -0.1]);
    }

    #[test]
    fn push_through_center_moves_block_on_axis() {
        let (e, b) = resolve_push([0.0, -0.04], [0.0, -0.1], [0.0, -0.033]);
        assert!((e[1] + 0.073).abs() < 1e-12);
        assert_eq!(b[0], 0.0);
        assert!((b[1] - (e[1] - 0.045)).abs() < 1e-12);
    }

    #[test]
    fn push_reward_without_contact_is_previous_distance() {
        let mut env = PlanarPush::with_noise(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        let tr = env.step(&[0.033, 0.0]);
        assert!((tr.reward_env + 0.2).abs() < 1e-12);
    }

    #[test]
    fn push_expert_approaches_waypoint_when_misaligned() {
        // effector level with the block, to its right
        let obs = [-0.1, 0.0, 0.0, -0.2];
        let a = push_expert(&obs);
        assert!(a[1] > 0.0 || a[0] < 0.0);
    }
}
