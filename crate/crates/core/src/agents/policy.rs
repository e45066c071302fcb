use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, GradTape, Mlp, OutputActivation, Trace};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln(1 − tanh²u)` without cancellation for large `|u|`.
#[inline]
fn ln_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - crate::adversary::softplus(-2.0 * u))
}

/// `a = scale · tanh(μ(s) + σ(s) ξ)` with `ξ ~ N(0, I)`. The network has one
/// trunk and two heads packed in its output: `[μ, log σ]`.
#[derive(Debug, Clone)]
pub struct SquashedGaussianPolicy {
    net: Mlp,
    optimizer: Adam,
    action_dim: usize,
    action_scale: f64,
}

/// A reparameterized batch of actions with everything the gradient needs.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub noise: Vec<f64>,
    trace: Trace,
    pre_tanh: Vec<f64>,
    std: Vec<f64>,
    log_std_free: Vec<bool>,
}

impl SquashedGaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        action_scale: f64,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, hidden);
        let net = Mlp::new(&sizes, Activation::Relu, OutputActivation::Identity, rng)?;
        Self::from_net(net, action_scale, learning_rate)
    }

    /// All parameters zero: `μ = 0`, `log σ = 0`.
    pub fn zeroed(state_dim: usize, action_dim: usize, hidden: &[usize], action_scale: f64) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, hidden);
        let net = Mlp::zeros(&sizes, Activation::Relu, OutputActivation::Identity)?;
        Self::from_net(net, action_scale, 1e-3)
    }

    pub fn from_net(net: Mlp, action_scale: f64, learning_rate: f64) -> Result<Self> {
        if net.output_dim() % 2 != 0 {
            return Err(Error::contract("policy network needs an even output (mean and log-std heads)"));
        }
        if !(action_scale > 0.0 && action_scale.is_finite()) {
            return Err(Error::contract("action scale must be positive"));
        }
        Ok(Self {
            optimizer: Adam::for_net(&net, learning_rate),
            action_dim: net.output_dim() / 2,
            net,
            action_scale,
        })
    }

    fn sizes(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![state_dim];
        sizes.extend(hidden);
        sizes.push(2 * action_dim);
        sizes
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_scale(&self) -> f64 {
        self.action_scale
    }

    /// Replaces the optimizer state with a fresh Adam at `learning_rate`.
    pub fn reset_optimizer(&mut self, learning_rate: f64) {
        self.optimizer = Adam::for_net(&self.net, learning_rate);
    }

    /// `scale · tanh(μ(s))` for every row of `states`.
    pub fn deterministic_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        let trace = self.net.forward_batch(states)?;
        let ad = self.action_dim;
        Ok(trace
            .output()
            .chunks_exact(2 * ad)
            .flat_map(|row| row[..ad].iter().map(|&m| self.action_scale * m.tanh()))
            .collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, states: &[f64], rng: &mut R) -> Result<PolicySample> {
        let n = states.len() / self.state_dim().max(1);
        let noise: Vec<f64> = (0..n * self.action_dim).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(states, noise)
    }

    /// Reparameterized sample with the standard-normal draws supplied.
    pub fn sample_with_noise(&self, states: &[f64], noise: Vec<f64>) -> Result<PolicySample> {
        let trace = self.net.forward_batch(states)?;
        let n = trace.batch();
        let ad = self.action_dim;
        if noise.len() != n * ad {
            return Err(Error::contract("noise length does not match batch x action dim"));
        }
        let mut actions = Vec::with_capacity(n * ad);
        let mut log_probs = Vec::with_capacity(n);
        let mut pre_tanh = Vec::with_capacity(n * ad);
        let mut std = Vec::with_capacity(n * ad);
        let mut log_std_free = Vec::with_capacity(n * ad);
        let ln_scale = self.action_scale.ln();
        for (i, row) in trace.output().chunks_exact(2 * ad).enumerate() {
            let mut lp = 0.0;
            for j in 0..ad {
                let raw = row[ad + j];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                let sigma = ls.exp();
                let xi = noise[i * ad + j];
                let u = row[j] + sigma * xi;
                lp += -0.5 * xi * xi - ls - HALF_LN_2PI - ln_scale - ln_one_minus_tanh_sq(u);
                actions.push(self.action_scale * u.tanh());
                pre_tanh.push(u);
                std.push(sigma);
                log_std_free.push(raw > LOG_STD_MIN && raw < LOG_STD_MAX);
            }
            log_probs.push(lp);
        }
        Ok(PolicySample {
            actions,
            log_probs,
            noise,
            trace,
            pre_tanh,
            std,
            log_std_free,
        })
    }

    /// Single-state convenience: `(action, Some(log π))`, or `(scale·tanh μ, None)`
    /// when `deterministic`.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Option<f64>)> {
        if deterministic {
            return Ok((self.deterministic_batch(state)?, None));
        }
        let s = self.sample_batch(state, rng)?;
        Ok((s.actions, Some(s.log_probs[0])))
    }

    /// `log π(a | s)` for an action strictly inside the box.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let out = self.net.forward(state)?;
        let ad = self.action_dim;
        if action.len() != ad {
            return Err(Error::contract("action length does not match policy"));
        }
        let mut lp = 0.0;
        for j in 0..ad {
            let y = action[j] / self.action_scale;
            if y.abs() >= 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let u = y.atanh();
            let ls = out[ad + j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let xi = (u - out[j]) / ls.exp();
            lp += -0.5 * xi * xi - ls - HALF_LN_2PI - self.action_scale.ln() - ln_one_minus_tanh_sq(u);
        }
        Ok(lp)
    }

    /// Gradient w.r.t. θ of `Σᵢ gᵢ·aᵢ(θ) − c·Σᵢ log π(aᵢ|sᵢ)` at fixed noise,
    /// where `g = grad_actions` is the caller's `∂(objective)/∂a`.
    pub fn objective_gradient(&self, sample: &PolicySample, grad_actions: &[f64], entropy_coef: f64) -> Result<GradTape> {
        let n = sample.trace.batch();
        let ad = self.action_dim;
        if grad_actions.len() != n * ad {
            return Err(Error::contract("action gradient length does not match sample"));
        }
        let mut cot = vec![0.0; n * 2 * ad];
        for i in 0..n {
            for j in 0..ad {
                let k = i * ad + j;
                let t = sample.pre_tanh[k].tanh();
                let du = grad_actions[k] * self.action_scale * (1.0 - t * t) - entropy_coef * 2.0 * t;
                cot[i * 2 * ad + j] = du;
                cot[i * 2 * ad + ad + j] = if sample.log_std_free[k] {
                    du * sample.std[k] * sample.noise[k] + entropy_coef
                } else {
                    0.0
                };
            }
        }
        let mut tape = GradTape::zeros_like(&self.net);
        self.net.backward_batch(&sample.trace, &cot, &mut tape)?;
        Ok(tape)
    }

    /// One Adam step *up* the gradient in `tape`.
    pub fn ascend(&mut self, tape: &GradTape) -> Result<()> {
        let mut neg = tape.clone();
        neg.scale(-1.0);
        self.net.adam_step(&neg, &mut self.optimizer)
    }

    /// One Adam step *down* the gradient in `tape`.
    pub fn descend(&mut self, tape: &GradTape) -> Result<()> {
        self.net.adam_step(tape, &mut self.optimizer)
    }

    /// Gradient of `Σᵢ gᵢ · scale·tanh(μ(sᵢ))` for deterministic-output losses.
    pub fn deterministic_gradient(&self, states: &[f64], grad_actions: &[f64]) -> Result<(Vec<f64>, GradTape)> {
        let trace = self.net.forward_batch(states)?;
        let n = trace.batch();
        let ad = self.action_dim;
        if grad_actions.len() != n * ad {
            return Err(Error::contract("action gradient length does not match batch"));
        }
        let mut actions = Vec::with_capacity(n * ad);
        let mut cot = vec![0.0; n * 2 * ad];
        for (i, row) in trace.output().chunks_exact(2 * ad).enumerate() {
            for j in 0..ad {
                let t = row[j].tanh();
                actions.push(self.action_scale * t);
                cot[i * 2 * ad + j] = grad_actions[i * ad + j] * self.action_scale * (1.0 - t * t);
            }
        }
        let mut tape = GradTape::zeros_like(&self.net);
        self.net.backward_batch(&trace, &cot, &mut tape)?;
        Ok((actions, tape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_deterministic_action_is_zero() {
        let p = SquashedGaussianPolicy::zeroed(3, 2, &[8], 1.0).unwrap();
        assert_eq!(p.deterministic_batch(&[0.5, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn samples_stay_inside_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = SquashedGaussianPolicy::new(2, 2, &[16], 0.5, 1e-3, &mut rng).unwrap();
        let states: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let s = p.sample_batch(&states, &mut rng).unwrap();
        assert!(s.actions.iter().all(|a| a.abs() < 0.5 + 1e-15));
        assert!(s.log_probs.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn log_prob_matches_sampled_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = SquashedGaussianPolicy::new(2, 2, &[16], 2.0, 1e-3, &mut rng).unwrap();
        let s = [0.3, -0.4];
        let smp = p.sample_batch(&s, &mut rng).unwrap();
        let lp = p.log_prob(&s, &smp.actions).unwrap();
        assert!((lp - smp.log_probs[0]).abs() < 1e-8);
    }

    #[test]
    fn zero_net_zero_noise_log_prob() {
        let p = SquashedGaussianPolicy::zeroed(1, 1, &[4], 1.0).unwrap();
        let s = p.sample_with_noise(&[0.0], vec![0.0]).unwrap();
        assert!((s.log_probs[0] + HALF_LN_2PI).abs() < 1e-15);
    }
}
