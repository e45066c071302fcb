use std::time::Instant;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::bc::bc_fit;
use super::buffer::ReplayBuffer;
use super::critic::CriticPair;
use super::policy::SquashedGaussianPolicy;
use super::update::{naive_diff_update, sac_update, sarc_c_targets, sarc_policy_update, AdversarialReward, RewardModel};
use crate::adversary::{Discriminator, DiscriminatorConfig, PairBatch, RewardKind};
use crate::dp::CriticKind;
use crate::env::{generate_expert_dataset, rollout, ContinuousEnv, EnvKind, Trajectory};
use crate::error::{Error, Result};
use crate::seeding::{indexed_rng, stream_rng, Stream};

/// Per-dimension affine observation normalizer `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of every state in `trajectories`. A
    /// dimension with (near-)zero spread keeps unit scale.
    pub fn from_trajectories(trajectories: &[Trajectory]) -> Result<Self> {
        let states: Vec<&Vec<f64>> = trajectories.iter().flat_map(|t| t.transitions.iter().map(|x| &x.state)).collect();
        let first = states.first().ok_or_else(|| Error::contract("no expert states to normalize by"))?;
        let d = first.len();
        let n = states.len() as f64;
        let mut mean = vec![0.0; d];
        for s in &states {
            for (m, v) in mean.iter_mut().zip(s.iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for s in &states {
            for ((v, x), m) in var.iter_mut().zip(s.iter()).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let std = var.iter().map(|v| if v.sqrt() < 1e-6 { 1.0 } else { v.sqrt() }).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Anything that maps a raw environment observation to an environment action.
pub trait Actor {
    fn act(&self, raw_obs: &[f64]) -> Vec<f64>;
}

/// Deterministic deployment of a trained policy: normalize the observation,
/// take `tanh(μ)`, scale to the environment's action range.
#[derive(Debug, Clone)]
pub struct DeployedPolicy {
    pub policy: SquashedGaussianPolicy,
    pub normalizer: Normalizer,
    pub env_action_scale: f64,
}

impl Actor for DeployedPolicy {
    fn act(&self, raw_obs: &[f64]) -> Vec<f64> {
        let a = self
            .policy
            .deterministic_batch(&self.normalizer.apply(raw_obs))
            .expect("observation matches policy input");
        a.into_iter().map(|v| v * self.env_action_scale).collect()
    }
}

/// The scripted expert as an [`Actor`].
#[derive(Debug, Clone, Copy)]
pub struct ScriptedExpert(pub EnvKind);

impl Actor for ScriptedExpert {
    fn act(&self, raw_obs: &[f64]) -> Vec<f64> {
        crate::env::scripted_expert(self.0, raw_obs).expect("observation matches env")
    }
}

/// Mean and (population) standard deviation of the return over `n_episodes`
/// rollouts; episode `i` resets from its own sub-stream of `seed`.
pub fn evaluate_policy(actor: &dyn Actor, env: &mut dyn ContinuousEnv, n_episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if n_episodes == 0 {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let returns: Vec<f64> = (0..n_episodes)
        .map(|i| {
            let mut rng = indexed_rng(seed, Stream::Eval, i as u32);
            rollout(env, &mut rng, |obs| actor.act(obs)).episode_return
        })
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    // shifted by the first return so identical returns give exactly zero spread
    let shift = returns[0];
    let m1 = returns.iter().map(|r| r - shift).sum::<f64>() / n;
    let m2 = returns.iter().map(|r| (r - shift) * (r - shift)).sum::<f64>() / n;
    Ok((mean, (m2 - m1 * m1).max(0.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Sarc,
    Sac,
    NaiveDiff,
    Bc,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Sarc => "sarc",
            AgentKind::Sac => "sac",
            AgentKind::NaiveDiff => "naive_diff",
            AgentKind::Bc => "bc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardChoice {
    Gail,
    FmaxRkl,
    /// The environment's own reward (no discriminator).
    Env,
}

impl RewardChoice {
    pub fn adversarial(self) -> Option<RewardKind> {
        match self {
            RewardChoice::Gail => Some(RewardKind::Gail),
            RewardChoice::FmaxRkl => Some(RewardKind::FmaxRkl),
            RewardChoice::Env => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub reward: RewardChoice,
    pub seed: u64,
    pub max_env_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub expert_trajectories: usize,
    pub update_every: usize,
    pub update_after: usize,
    pub random_steps: usize,
    pub disc_iterations: usize,
    pub agent_iterations: usize,
    pub disc_batch: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub polyak: f64,
    pub critic_updates_per_policy: usize,
    pub bc_epochs: usize,
    pub disc: DiscriminatorConfig,
}

impl TrainConfig {
    /// Defaults for `agent`; learning rate, entropy weight and critic ratio
    /// depend on the agent.
    pub fn new(env: EnvKind, agent: AgentKind, reward: RewardChoice, seed: u64) -> Self {
        let (learning_rate, alpha, critic_updates_per_policy) = match agent {
            AgentKind::Sarc => (1e-4, 1.0, 10),
            AgentKind::Sac => (1e-3, 0.2, 1),
            AgentKind::NaiveDiff => (1e-4, 0.0, 1),
            AgentKind::Bc => (1e-3, 0.0, 1),
        };
        Self {
            env,
            agent,
            reward,
            seed,
            max_env_steps: 25_000,
            eval_every: 5_000,
            eval_episodes: 20,
            expert_trajectories: 64,
            update_every: 20,
            update_after: 1_000,
            random_steps: 1_000,
            disc_iterations: 10,
            agent_iterations: 10,
            disc_batch: 128,
            batch_size: 256,
            buffer_capacity: 100_000,
            hidden: vec![64, 64],
            learning_rate,
            alpha,
            gamma: 0.99,
            polyak: 0.995,
            critic_updates_per_policy,
            bc_epochs: 10_000,
            disc: DiscriminatorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
            ("expert_trajectories", self.expert_trajectories),
            ("update_every", self.update_every),
            ("disc_batch", self.disc_batch),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("critic_updates_per_policy", self.critic_updates_per_policy),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return Err(Error::config("polyak", "must lie in [0, 1]"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be non-negative"));
        }
        match (self.agent, self.reward) {
            (AgentKind::Bc, RewardChoice::Gail | RewardChoice::FmaxRkl) => Err(Error::config(
                "reward_kind",
                "bc does not use a reward; use reward_kind \"env\"",
            )),
            (AgentKind::Sarc | AgentKind::NaiveDiff, RewardChoice::Env) => Err(Error::config(
                "reward_kind",
                "sarc and naive_diff need a differentiable adversarial reward (gail or fmax_rkl)",
            )),
            _ => Ok(()),
        }
    }
}

/// One evaluation point. Losses are those of the latest update round
/// (`NaN` before the first).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub eval_step: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub disc_loss: f64,
    pub critic_loss: f64,
    pub policy_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mean_return)
    }

    /// CSV with header `eval_step,mean_return,std_return,disc_loss,critic_loss,policy_objective`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["eval_step", "mean_return", "std_return", "disc_loss", "critic_loss", "policy_objective"])?;
        for r in &self.rows {
            w.write_record([
                r.eval_step.to_string(),
                format!("{:.16e}", r.mean_return),
                format!("{:.16e}", r.std_return),
                format!("{:.16e}", r.disc_loss),
                format!("{:.16e}", r.critic_loss),
                format!("{:.16e}", r.policy_objective),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub struct TrainOutput {
    pub record: RunRecord,
    pub actor: DeployedPolicy,
    pub discriminator: Option<Discriminator>,
}

struct Expert {
    states: Vec<f64>,
    actions: Vec<f64>,
}

fn expert_arrays(trajs: &[Trajectory], norm: &Normalizer, action_scale: f64) -> Expert {
    let mut states = Vec::new();
    let mut actions = Vec::new();
    for tr in trajs.iter().flat_map(|t| &t.transitions) {
        states.extend(norm.apply(&tr.state));
        actions.extend(tr.action.iter().map(|a| a / action_scale));
    }
    Expert { states, actions }
}

struct Losses {
    disc: f64,
    critic: f64,
    policy: f64,
}

/// Interleaved adversarial imitation: environment steps fill the replay
/// buffer; every `update_every` steps the discriminator and then the agent
/// are trained for their configured number of iterations. Behavior cloning
/// (`agent = bc`) fits the expert data once and is evaluated once.
///
/// Agents act in `[-1, 1]` per action axis; the environment receives the
/// action times its own bound, and expert actions are divided by it.
pub fn train_ail(config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let started = Instant::now();
    let seed = config.seed;
    let mut env = config.env.make();
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let bound = env.action_bound();

    let expert_trajs = generate_expert_dataset(config.env, config.expert_trajectories, seed)?;
    let normalizer = Normalizer::from_trajectories(&expert_trajs)?;
    let expert = expert_arrays(&expert_trajs, &normalizer, bound);
    let n_expert = expert.states.len() / sd;

    let mut policy = SquashedGaussianPolicy::new(
        sd,
        ad,
        &config.hidden,
        1.0,
        config.learning_rate,
        &mut stream_rng(seed, Stream::PolicyInit),
    )?;
    let mut record = RunRecord {
        config_hash: String::new(),
        seed,
        rows: Vec::new(),
        wall_time_s: 0.0,
    };

    if config.agent == AgentKind::Bc {
        let mut rng = stream_rng(seed, Stream::Data);
        let mse = bc_fit(
            &mut policy,
            &expert.states,
            &expert.actions,
            config.bc_epochs,
            config.learning_rate,
            config.batch_size,
            &mut rng,
        )?;
        let actor = DeployedPolicy {
            policy,
            normalizer,
            env_action_scale: bound,
        };
        let (mean_return, std_return) = evaluate_policy(&actor, env.as_mut(), config.eval_episodes, seed)?;
        record.rows.push(EvalRow {
            eval_step: 0,
            mean_return,
            std_return,
            disc_loss: f64::NAN,
            critic_loss: f64::NAN,
            policy_objective: -mse,
        });
        record.wall_time_s = started.elapsed().as_secs_f64();
        return Ok(TrainOutput {
            record,
            actor,
            discriminator: None,
        });
    }

    let kind = config.reward.adversarial();
    let mut disc = match kind {
        Some(_) => Some(Discriminator::new(
            sd,
            ad,
            config.disc.clone(),
            &mut stream_rng(seed, Stream::DiscriminatorInit),
        )?),
        None => None,
    };
    let mut critics = match config.agent {
        AgentKind::Sarc => Some(CriticPair::new(
            CriticKind::C,
            sd,
            ad,
            &config.hidden,
            config.learning_rate,
            &mut stream_rng(seed, Stream::CriticInit),
        )?),
        AgentKind::Sac => Some(CriticPair::new(
            CriticKind::Q,
            sd,
            ad,
            &config.hidden,
            config.learning_rate,
            &mut stream_rng(seed, Stream::CriticInit),
        )?),
        _ => None,
    };
    let mut buffer = ReplayBuffer::new(config.buffer_capacity, sd, ad, stream_rng(seed, Stream::Buffer))?;
    let mut env_rng = stream_rng(seed, Stream::Env);
    let mut explore_rng = indexed_rng(seed, Stream::Actor, 0);
    let mut update_rng = indexed_rng(seed, Stream::Actor, 1);
    let mut data_rng = stream_rng(seed, Stream::Data);
    let mut losses = Losses {
        disc: f64::NAN,
        critic: f64::NAN,
        policy: f64::NAN,
    };

    let mut obs = normalizer.apply(&env.reset(&mut env_rng));
    for step in 1..=config.max_env_steps {
        let action: Vec<f64> = if step <= config.random_steps {
            (0..ad).map(|_| explore_rng.random_range(-1.0..1.0)).collect()
        } else {
            policy.sample_batch(&obs, &mut explore_rng)?.actions
        };
        let env_action: Vec<f64> = action.iter().map(|a| a * bound).collect();
        let tr = env.step(&env_action);
        let next = normalizer.apply(&tr.next_state);
        // The tasks end only by time limit, so no transition is terminal for bootstrapping.
        buffer.push(&obs, &action, &next, tr.reward_env, false)?;
        obs = if tr.done {
            normalizer.apply(&env.reset(&mut env_rng))
        } else {
            next
        };

        if step >= config.update_after && step % config.update_every == 0 {
            if let (Some(d), Some(_)) = (disc.as_mut(), kind) {
                for _ in 0..config.disc_iterations {
                    let mut es = Vec::with_capacity(config.disc_batch * sd);
                    let mut ea = Vec::with_capacity(config.disc_batch * ad);
                    for _ in 0..config.disc_batch {
                        let i = data_rng.random_range(0..n_expert);
                        es.extend_from_slice(&expert.states[i * sd..(i + 1) * sd]);
                        ea.extend_from_slice(&expert.actions[i * ad..(i + 1) * ad]);
                    }
                    let agent = buffer.sample(config.disc_batch)?;
                    let obj = d.update(
                        PairBatch {
                            states: &es,
                            actions: &ea,
                        },
                        PairBatch {
                            states: &agent.states,
                            actions: &agent.actions,
                        },
                        &mut data_rng,
                    )?;
                    losses.disc = -obj / (2 * config.disc_batch) as f64;
                }
            }
            let reward_model = match (disc.as_ref(), kind) {
                (Some(d), Some(k)) => Some(AdversarialReward { disc: d, kind: k }),
                _ => None,
            };
            let reward: Option<&dyn RewardModel> = reward_model.as_ref().map(|r| r as &dyn RewardModel);
            for _ in 0..config.agent_iterations {
                agent_iteration(config, &mut buffer, reward, &mut policy, critics.as_mut(), &mut update_rng, &mut losses)?;
            }
            if !policy.net().all_finite() || critics.as_ref().is_some_and(|c| !c.all_finite()) {
                return Err(Error::NonFinite(format!("parameters became non-finite at step {step}")));
            }
        }

        if step % config.eval_every == 0 || step == config.max_env_steps {
            let actor = DeployedPolicy {
                policy: policy.clone(),
                normalizer: normalizer.clone(),
                env_action_scale: bound,
            };
            let mut eval_env = config.env.make();
            let (mean_return, std_return) = evaluate_policy(&actor, eval_env.as_mut(), config.eval_episodes, seed)?;
            log::debug!("seed {seed} step {step}: return {mean_return:.4} ± {std_return:.4}");
            record.rows.push(EvalRow {
                eval_step: step,
                mean_return,
                std_return,
                disc_loss: losses.disc,
                critic_loss: losses.critic,
                policy_objective: losses.policy,
            });
        }
    }
    record.wall_time_s = started.elapsed().as_secs_f64();
    Ok(TrainOutput {
        record,
        actor: DeployedPolicy {
            policy,
            normalizer,
            env_action_scale: bound,
        },
        discriminator: disc,
    })
}

fn agent_iteration(
    config: &TrainConfig,
    buffer: &mut ReplayBuffer,
    reward: Option<&dyn RewardModel>,
    policy: &mut SquashedGaussianPolicy,
    critics: Option<&mut CriticPair>,
    rng: &mut dyn RngCore,
    losses: &mut Losses,
) -> Result<()> {
    match config.agent {
        AgentKind::Sarc => {
            let critics = critics.ok_or_else(|| Error::contract("sarc needs critics"))?;
            let reward = reward.ok_or_else(|| Error::contract("sarc needs a differentiable reward"))?;
            let mut batch = buffer.sample(config.batch_size)?;
            for k in 0..config.critic_updates_per_policy {
                if k > 0 {
                    batch = buffer.sample(config.batch_size)?;
                }
                let y = sarc_c_targets(&batch, reward, policy, critics, config.alpha, config.gamma, rng)?;
                losses.critic = critics.regress(&batch.states, &batch.actions, &y)?;
                critics.polyak_update(config.polyak)?;
            }
            losses.policy = sarc_policy_update(&batch.states, reward, policy, critics, config.alpha, rng)?;
        }
        AgentKind::Sac => {
            let critics = critics.ok_or_else(|| Error::contract("sac needs critics"))?;
            let mut batch = buffer.sample(config.batch_size)?;
            let out = sac_update(
                &mut batch,
                reward,
                policy,
                critics,
                config.alpha,
                config.gamma,
                config.polyak,
                rng,
            )?;
            losses.critic = out.critic_loss;
            losses.policy = out.policy_objective;
        }
        AgentKind::NaiveDiff => {
            let reward = reward.ok_or_else(|| Error::contract("naive_diff needs a differentiable reward"))?;
            let batch = buffer.sample(config.batch_size)?;
            losses.policy = naive_diff_update(&batch.states, reward, policy, config.alpha, rng)?;
        }
        AgentKind::Bc => return Err(Error::contract("bc has no interactive update")),
    }
    Ok(())
}
