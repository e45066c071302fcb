//! Discriminator `D(s,a) = sigmoid(logit(s,a))` and the rewards built from it.
//!
//! | kind       | reward                         |
//! |------------|--------------------------------|
//! | `gail`     | `log D`                        |
//! | `fmax_rkl` | `log D − log(1 − D)` = logit   |
//!
//! The logit is clipped to `[-10, 10]`, so both rewards are finite and the
//! action gradient is zero wherever the clip is active.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{concat_rows, snapshot, Activation, Adam, GradTape, Mlp, OutputActivation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Gail,
    FmaxRkl,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Gail => "gail",
            RewardKind::FmaxRkl => "fmax_rkl",
        }
    }

    /// `h(logit)`.
    #[inline]
    pub fn from_logit(self, z: f64) -> f64 {
        match self {
            RewardKind::Gail => log_sigmoid(z),
            RewardKind::FmaxRkl => z,
        }
    }

    /// `dh/dlogit`.
    #[inline]
    pub fn dlogit(self, z: f64) -> f64 {
        match self {
            RewardKind::Gail => sigmoid(-z),
            RewardKind::FmaxRkl => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(z)) = −softplus(−z)`, stable for large `|z|`.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub logit_clip: f64,
    pub learning_rate: f64,
    /// Two-sided gradient-penalty weight; 0 disables the penalty.
    pub gp_lambda: f64,
    /// Multiplier applied to every reward.
    pub reward_scale: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            activation: Activation::Tanh,
            logit_clip: 10.0,
            learning_rate: 3e-4,
            gp_lambda: 4.0,
            reward_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    net: Mlp,
    optimizer: Adam,
    state_dim: usize,
    action_dim: usize,
    config: DiscriminatorConfig,
}

/// Rows of `(s, a)` pairs stored as two flat row-major buffers.
#[derive(Debug, Clone, Copy)]
pub struct PairBatch<'a> {
    pub states: &'a [f64],
    pub actions: &'a [f64],
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        config: DiscriminatorConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, &config);
        let out = OutputActivation::Clip {
            lo: -config.logit_clip,
            hi: config.logit_clip,
        };
        let net = Mlp::new(&sizes, config.activation, out, rng)?;
        Ok(Self::from_net(net, state_dim, action_dim, config))
    }

    /// Discriminator whose parameters are all zero (`D ≡ 0.5`).
    pub fn zeroed(state_dim: usize, action_dim: usize, config: DiscriminatorConfig) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, &config);
        let out = OutputActivation::Clip {
            lo: -config.logit_clip,
            hi: config.logit_clip,
        };
        let net = Mlp::zeros(&sizes, config.activation, out)?;
        Ok(Self::from_net(net, state_dim, action_dim, config))
    }

    pub fn from_net(net: Mlp, state_dim: usize, action_dim: usize, config: DiscriminatorConfig) -> Self {
        let optimizer = Adam::for_net(&net, config.learning_rate);
        Self {
            net,
            optimizer,
            state_dim,
            action_dim,
            config,
        }
    }

    fn sizes(state_dim: usize, action_dim: usize, config: &DiscriminatorConfig) -> Vec<usize> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend(&config.hidden);
        sizes.push(1);
        sizes
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    fn join(&self, batch: PairBatch<'_>) -> Result<(Vec<f64>, usize)> {
        concat_rows(batch.states, self.state_dim, batch.actions, self.action_dim)
    }

    pub fn logits(&self, batch: PairBatch<'_>) -> Result<Vec<f64>> {
        let (x, _) = self.join(batch)?;
        Ok(self.net.forward_batch(&x)?.output().to_vec())
    }

    pub fn logit(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        Ok(self.logits(PairBatch { states: s, actions: a })?[0])
    }

    /// `D(s,a) = P(expert | s, a)`.
    pub fn prob(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(s, a)?))
    }

    pub fn reward(&self, s: &[f64], a: &[f64], kind: RewardKind) -> Result<f64> {
        Ok(self.config.reward_scale * kind.from_logit(self.logit(s, a)?))
    }

    pub fn rewards(&self, batch: PairBatch<'_>, kind: RewardKind) -> Result<Vec<f64>> {
        Ok(self
            .logits(batch)?
            .into_iter()
            .map(|z| self.config.reward_scale * kind.from_logit(z))
            .collect())
    }

    /// Rewards and their exact gradients w.r.t. the action coordinates,
    /// returned as `(rewards, grads)` with `grads` row-major `(n, action_dim)`.
    pub fn rewards_with_action_grads(&self, batch: PairBatch<'_>, kind: RewardKind) -> Result<(Vec<f64>, Vec<f64>)> {
        let (x, n) = self.join(batch)?;
        let trace = self.net.forward_batch(&x)?;
        let logits = trace.output();
        let scale = self.config.reward_scale;
        let rewards: Vec<f64> = logits.iter().map(|&z| scale * kind.from_logit(z)).collect();
        let cot: Vec<f64> = logits.iter().map(|&z| scale * kind.dlogit(z)).collect();
        let igt = self.net.input_gradient(&trace, &cot)?;
        let g = igt.input_gradient();
        let (sd, ad) = (self.state_dim, self.action_dim);
        let width = sd + ad;
        let mut grads = Vec::with_capacity(n * ad);
        for i in 0..n {
            grads.extend_from_slice(&g[i * width + sd..(i + 1) * width]);
        }
        Ok((rewards, grads))
    }

    /// `∇ₐ reward(s, a)`.
    pub fn reward_grad_action(&self, s: &[f64], a: &[f64], kind: RewardKind) -> Result<Vec<f64>> {
        Ok(self.rewards_with_action_grads(PairBatch { states: s, actions: a }, kind)?.1)
    }

    /// `Σ log D(expert) + Σ log(1 − D(agent))`.
    pub fn objective(&self, expert: PairBatch<'_>, agent: PairBatch<'_>) -> Result<f64> {
        let e: f64 = self.logits(expert)?.iter().map(|&z| log_sigmoid(z)).sum();
        let a: f64 = self.logits(agent)?.iter().map(|&z| log_sigmoid(-z)).sum();
        Ok(e + a)
    }

    /// One Adam ascent step on the mean classification log-likelihood, minus
    /// the optional gradient penalty `λ·mean (‖∇_{(s,a)} logit‖ − 1)²` on
    /// random interpolates of expert and agent pairs.
    ///
    /// Returns the pre-step objective `Σ log D(expert) + Σ log(1 − D(agent))`.
    pub fn update<R: Rng + ?Sized>(&mut self, expert: PairBatch<'_>, agent: PairBatch<'_>, rng: &mut R) -> Result<f64> {
        let (xe, ne) = self.join(expert)?;
        let (xa, na) = self.join(agent)?;
        if ne == 0 || na == 0 {
            return Err(Error::contract("discriminator update needs non-empty expert and agent batches"));
        }
        let mut tape = GradTape::zeros_like(&self.net);

        let te = self.net.forward_batch(&xe)?;
        let objective_e: f64 = te.output().iter().map(|&z| log_sigmoid(z)).sum();
        // descent on the negated log-likelihood
        let cot_e: Vec<f64> = te.output().iter().map(|&z| -sigmoid(-z) / ne as f64).collect();
        self.net.backward_batch(&te, &cot_e, &mut tape)?;

        let ta = self.net.forward_batch(&xa)?;
        let objective_a: f64 = ta.output().iter().map(|&z| log_sigmoid(-z)).sum();
        let cot_a: Vec<f64> = ta.output().iter().map(|&z| sigmoid(z) / na as f64).collect();
        self.net.backward_batch(&ta, &cot_a, &mut tape)?;

        if self.config.gp_lambda > 0.0 {
            self.penalty_gradient(&xe, ne, &xa, na, rng, &mut tape)?;
        }
        self.net.adam_step(&tape, &mut self.optimizer)?;
        Ok(objective_e + objective_a)
    }

    fn penalty_gradient<R: Rng + ?Sized>(
        &self,
        xe: &[f64],
        ne: usize,
        xa: &[f64],
        na: usize,
        rng: &mut R,
        tape: &mut GradTape,
    ) -> Result<()> {
        let width = self.state_dim + self.action_dim;
        let m = ne.min(na);
        let mut mixed = Vec::with_capacity(m * width);
        for i in 0..m {
            let eps: f64 = rng.random();
            for k in 0..width {
                mixed.push(eps * xe[i * width + k] + (1.0 - eps) * xa[i * width + k]);
            }
        }
        let trace = self.net.forward_batch(&mixed)?;
        let igt = self.net.input_gradient(&trace, &vec![1.0; m])?;
        let coeff = self.config.gp_lambda / m as f64;
        let mut v = Vec::with_capacity(m * width);
        for g in igt.input_gradient().chunks(width) {
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.extend(g.iter().map(|gi| coeff * 2.0 * (norm - 1.0) * gi / norm));
            } else {
                v.extend(std::iter::repeat(0.0).take(width));
            }
        }
        self.net.input_gradient_vjp(&trace, &igt, &v, tape)
    }

    /// Parameter snapshot plus a one-line JSON sidecar `{kind, clip, lambda}`.
    pub fn save(&self, snapshot_path: &Path, kind: RewardKind) -> Result<()> {
        let file = std::fs::File::create(snapshot_path)?;
        snapshot::write_snapshot(&self.net, std::io::BufWriter::new(file))?;
        let sidecar = serde_json::json!({
            "kind": kind.name(),
            "clip": self.config.logit_clip,
            "lambda": self.config.gp_lambda,
        });
        let mut f = std::fs::File::create(snapshot_path.with_extension("json"))?;
        writeln!(f, "{sidecar}")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> DiscriminatorConfig {
        DiscriminatorConfig {
            hidden: vec![16, 16],
            gp_lambda: 0.0,
            ..DiscriminatorConfig::default()
        }
    }

    #[test]
    fn half_probability_rewards() {
        assert!((RewardKind::Gail.from_logit(0.0) + 0.693_147_180_559_945_3).abs() < 1e-15);
        assert_eq!(RewardKind::FmaxRkl.from_logit(0.0), 0.0);
        assert_eq!(RewardKind::FmaxRkl.from_logit(3.0), 3.0);
    }

    #[test]
    fn clip_floor_gail_reward() {
        // log(sigmoid(-10)) = -10 - log(1 + e^-10)
        let expected = -10.0 - (-10.0f64).exp().ln_1p();
        assert!((RewardKind::Gail.from_logit(-10.0) - expected).abs() < 1e-15);
        assert!((expected + 10.000_045_4).abs() < 1e-7);
    }

    #[test]
    fn zero_network_first_objective() {
        let mut d = Discriminator::zeroed(2, 1, small_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let es = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ea = [0.1, 0.2, 0.3];
        let as_ = [9.0, 9.0];
        let aa = [0.5];
        let obj = d
            .update(
                PairBatch { states: &es, actions: &ea },
                PairBatch { states: &as_, actions: &aa },
                &mut rng,
            )
            .unwrap();
        assert!((obj - 4.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut d = Discriminator::zeroed(1, 1, small_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = d.update(
            PairBatch { states: &[], actions: &[] },
            PairBatch { states: &[1.0], actions: &[1.0] },
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn constant_discriminator_has_zero_action_gradient() {
        let d = Discriminator::zeroed(3, 2, small_config()).unwrap();
        for kind in [RewardKind::Gail, RewardKind::FmaxRkl] {
            assert_eq!(d.reward_grad_action(&[1.0, 2.0, 3.0], &[0.1, -0.1], kind).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn fmax_gradient_is_logit_input_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Discriminator::new(2, 2, small_config(), &mut rng).unwrap();
        let (s, a) = ([0.3, -0.2], [0.1, 0.05]);
        let g = d.reward_grad_action(&s, &a, RewardKind::FmaxRkl).unwrap();
        let full = d.net().backward(&[0.3, -0.2, 0.1, 0.05], &[1.0]).unwrap().input;
        assert_eq!(g, full[2..].to_vec());
    }
}
