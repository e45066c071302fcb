//! Policy optimization: SARC (soft actor residual critic), the SAC baseline,
//! the Naive-Diff baseline, behavior cloning, and the interleaved AIL loop.

mod bc;
mod buffer;
mod critic;
mod policy;
mod train;
mod update;

pub use bc::{bc_fit, bc_mse};
pub use buffer::{Batch, ReplayBuffer};
pub use critic::CriticPair;
pub use policy::{PolicySample, SquashedGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use train::{
    evaluate_policy, train_ail, Actor, AgentKind, DeployedPolicy, EvalRow, Normalizer, RewardChoice, RunRecord,
    ScriptedExpert, TrainConfig, TrainOutput,
};
pub use update::{
    naive_diff_update, policy_objective_gradient, polyak_update, sac_policy_update, sac_q_targets, sac_update,
    sarc_c_targets, sarc_critic_update, sarc_policy_update, AdversarialReward, PolicyTerms, RewardModel, SacLosses,
};
