//! One-step update rules. Every function takes its randomness from the RNG
//! passed in; nothing here owns state beyond the networks it is handed.

use rand::Rng;

use super::buffer::Batch;
use super::critic::CriticPair;
use super::policy::{PolicySample, SquashedGaussianPolicy};
use crate::adversary::{Discriminator, PairBatch, RewardKind};
use crate::dp::CriticKind;
use crate::error::{Error, Result};
use crate::nn::GradTape;

/// A reward whose action gradient is available exactly.
pub trait RewardModel {
    fn rewards(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>>;
    /// `(r, ∇ₐ r)`, the gradient row-major `(n, action_dim)`.
    fn rewards_with_action_grads(&self, states: &[f64], actions: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy)]
pub struct AdversarialReward<'a> {
    pub disc: &'a Discriminator,
    pub kind: RewardKind,
}

impl RewardModel for AdversarialReward<'_> {
    fn rewards(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        self.disc.rewards(PairBatch { states, actions }, self.kind)
    }

    fn rewards_with_action_grads(&self, states: &[f64], actions: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.disc.rewards_with_action_grads(PairBatch { states, actions }, self.kind)
    }
}

/// `y = γ (r(s′, ã′) + min C_targ(s′, ã′) − α log π(ã′|s′)) (1 − d)`, with
/// `ã′ ~ π(·|s′)` drawn fresh. The stored reward of `(s, a)` is never read.
pub fn sarc_c_targets<R: Rng + ?Sized>(
    batch: &Batch,
    reward: &dyn RewardModel,
    policy: &SquashedGaussianPolicy,
    critics: &CriticPair,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    critics.expect_kind(CriticKind::C)?;
    let next = policy.sample_batch(&batch.next_states, rng)?;
    let r = reward.rewards(&batch.next_states, &next.actions)?;
    let c = critics.target_min(&batch.next_states, &next.actions)?;
    Ok((0..batch.len())
        .map(|i| gamma * (r[i] + c[i] - alpha * next.log_probs[i]) * (1.0 - batch.terminals[i]))
        .collect())
}

/// `y = r(s, a) + γ (min Q_targ(s′, ã′) − α log π(ã′|s′)) (1 − d)` using the
/// batch's stored reward.
pub fn sac_q_targets<R: Rng + ?Sized>(
    batch: &Batch,
    policy: &SquashedGaussianPolicy,
    critics: &CriticPair,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    critics.expect_kind(CriticKind::Q)?;
    let next = policy.sample_batch(&batch.next_states, rng)?;
    let q = critics.target_min(&batch.next_states, &next.actions)?;
    Ok((0..batch.len())
        .map(|i| batch.rewards[i] + gamma * (q[i] - alpha * next.log_probs[i]) * (1.0 - batch.terminals[i]))
        .collect())
}

/// One regression step of both critics toward `targets`; returns the pre-step loss.
pub fn sarc_critic_update(batch: &Batch, critics: &mut CriticPair, targets: &[f64]) -> Result<f64> {
    critics.regress(&batch.states, &batch.actions, targets)
}

/// Which terms enter the policy objective
/// `mean[ r(s,ã) + min critic(s,ã) − α log π(ã|s) ]`.
pub struct PolicyTerms<'a> {
    pub reward: Option<&'a dyn RewardModel>,
    pub critics: Option<&'a CriticPair>,
    pub alpha: f64,
}

/// Objective value and its θ-gradient for a given reparameterized sample.
pub fn policy_objective_gradient(
    policy: &SquashedGaussianPolicy,
    states: &[f64],
    sample: &PolicySample,
    terms: &PolicyTerms<'_>,
) -> Result<(f64, GradTape)> {
    let n = sample.log_probs.len();
    if n == 0 {
        return Err(Error::contract("policy update needs a non-empty batch"));
    }
    let ad = policy.action_dim();
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; n * ad];
    if let Some(reward) = terms.reward {
        let (r, g) = reward.rewards_with_action_grads(states, &sample.actions)?;
        value += r.iter().sum::<f64>();
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi * inv_n;
        }
    }
    if let Some(critics) = terms.critics {
        let (c, g) = critics.min_with_action_grads(states, &sample.actions)?;
        value += c.iter().sum::<f64>();
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi * inv_n;
        }
    }
    value -= terms.alpha * sample.log_probs.iter().sum::<f64>();
    let tape = policy.objective_gradient(sample, &grad, terms.alpha * inv_n)?;
    Ok((value * inv_n, tape))
}

fn ascend_terms<R: Rng + ?Sized>(
    states: &[f64],
    policy: &mut SquashedGaussianPolicy,
    terms: &PolicyTerms<'_>,
    rng: &mut R,
) -> Result<f64> {
    let sample = policy.sample_batch(states, rng)?;
    let (value, tape) = policy_objective_gradient(policy, states, &sample, terms)?;
    policy.ascend(&tape)?;
    Ok(value)
}

/// Ascent on `mean[ r(s,ã) + min C(s,ã) − α log π(ã|s) ]`; the reward term
/// is differentiated exactly through the reward model.
pub fn sarc_policy_update<R: Rng + ?Sized>(
    states: &[f64],
    reward: &dyn RewardModel,
    policy: &mut SquashedGaussianPolicy,
    critics: &CriticPair,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    critics.expect_kind(CriticKind::C)?;
    let terms = PolicyTerms {
        reward: Some(reward),
        critics: Some(critics),
        alpha,
    };
    ascend_terms(states, policy, &terms, rng)
}

/// Ascent on `mean[ min Q(s,ã) − α log π(ã|s) ]`.
pub fn sac_policy_update<R: Rng + ?Sized>(
    states: &[f64],
    policy: &mut SquashedGaussianPolicy,
    critics: &CriticPair,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    critics.expect_kind(CriticKind::Q)?;
    let terms = PolicyTerms {
        reward: None,
        critics: Some(critics),
        alpha,
    };
    ascend_terms(states, policy, &terms, rng)
}

/// Ascent on the immediate reward alone (plus `α` entropy if non-zero).
pub fn naive_diff_update<R: Rng + ?Sized>(
    states: &[f64],
    reward: &dyn RewardModel,
    policy: &mut SquashedGaussianPolicy,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    let terms = PolicyTerms {
        reward: Some(reward),
        critics: None,
        alpha,
    };
    ascend_terms(states, policy, &terms, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacLosses {
    pub critic_loss: f64,
    pub policy_objective: f64,
}

/// Standard SAC step with the batch rewards relabelled by `reward`:
/// critic regression, policy ascent, Polyak update.
#[allow(clippy::too_many_arguments)]
pub fn sac_update<R: Rng + ?Sized>(
    batch: &mut Batch,
    reward: Option<&dyn RewardModel>,
    policy: &mut SquashedGaussianPolicy,
    critics: &mut CriticPair,
    alpha: f64,
    gamma: f64,
    zeta: f64,
    rng: &mut R,
) -> Result<SacLosses> {
    if let Some(r) = reward {
        batch.rewards = r.rewards(&batch.states, &batch.actions)?;
    }
    let y = sac_q_targets(batch, policy, critics, alpha, gamma, rng)?;
    let critic_loss = critics.regress(&batch.states, &batch.actions, &y)?;
    let policy_objective = sac_policy_update(&batch.states, policy, critics, alpha, rng)?;
    critics.polyak_update(zeta)?;
    Ok(SacLosses {
        critic_loss,
        policy_objective,
    })
}

/// Polyak step on both target critics.
pub fn polyak_update(critics: &mut CriticPair, zeta: f64) -> Result<()> {
    critics.polyak_update(zeta)
}
