use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::SquashedGaussianPolicy;
use crate::error::{Error, Result};

/// Mean squared error of the deterministic policy output against `actions`,
/// averaged over every action coordinate.
pub fn bc_mse(policy: &SquashedGaussianPolicy, states: &[f64], actions: &[f64]) -> Result<f64> {
    let pred = policy.deterministic_batch(states)?;
    if pred.len() != actions.len() || pred.is_empty() {
        return Err(Error::contract("expert states and actions do not line up"));
    }
    Ok(pred.iter().zip(actions).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / pred.len() as f64)
}

/// Behavior cloning: minibatch Adam on the deterministic-output MSE.
/// Returns the full-dataset MSE after the last epoch.
pub fn bc_fit<R: Rng + ?Sized>(
    policy: &mut SquashedGaussianPolicy,
    states: &[f64],
    actions: &[f64],
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<f64> {
    let (sd, ad) = (policy.state_dim(), policy.action_dim());
    if states.is_empty() || states.len() % sd != 0 {
        return Err(Error::contract("behavior cloning needs a non-empty dataset"));
    }
    let n = states.len() / sd;
    if actions.len() != n * ad {
        return Err(Error::contract("expert states and actions do not line up"));
    }
    if batch_size == 0 {
        return Err(Error::contract("batch size must be positive"));
    }
    if epochs > 0 {
        policy.reset_optimizer(learning_rate);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            let mut s = Vec::with_capacity(chunk.len() * sd);
            let mut target = Vec::with_capacity(chunk.len() * ad);
            for &i in chunk {
                s.extend_from_slice(&states[i * sd..(i + 1) * sd]);
                target.extend_from_slice(&actions[i * ad..(i + 1) * ad]);
            }
            let pred = policy.deterministic_batch(&s)?;
            let m = pred.len() as f64;
            let g: Vec<f64> = pred.iter().zip(&target).map(|(p, a)| 2.0 * (p - a) / m).collect();
            let (_, tape) = policy.deterministic_gradient(&s, &g)?;
            policy.descend(&tape)?;
        }
    }
    bc_mse(policy, states, actions)
}
