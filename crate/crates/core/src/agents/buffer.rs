use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Minibatch of transitions, each field row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub next_states: Vec<f64>,
    /// Reward of the stored `(s, a)`; only Q-style targets read it.
    pub rewards: Vec<f64>,
    /// 1.0 for true termination, 0.0 otherwise (time-limit ends are not terminal).
    pub terminals: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring of transitions with seeded uniform sampling (with
/// replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    next_states: Vec<f64>,
    rewards: Vec<f64>,
    terminals: Vec<f64>,
    len: usize,
    head: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize, rng: ChaCha8Rng) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::contract("replay buffer capacity must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: vec![0.0; capacity * state_dim],
            actions: vec![0.0; capacity * action_dim],
            next_states: vec![0.0; capacity * state_dim],
            rewards: vec![0.0; capacity],
            terminals: vec![0.0; capacity],
            len: 0,
            head: 0,
            rng,
        })
    }

    pub fn with_seed(capacity: usize, state_dim: usize, action_dim: usize, seed: u64) -> Result<Self> {
        Self::new(capacity, state_dim, action_dim, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], next_state: &[f64], reward: f64, terminal: bool) -> Result<()> {
        let (sd, ad) = (self.state_dim, self.action_dim);
        if state.len() != sd || next_state.len() != sd || action.len() != ad {
            return Err(Error::contract("transition shape does not match buffer"));
        }
        let i = self.head;
        self.states[i * sd..(i + 1) * sd].copy_from_slice(state);
        self.next_states[i * sd..(i + 1) * sd].copy_from_slice(next_state);
        self.actions[i * ad..(i + 1) * ad].copy_from_slice(action);
        self.rewards[i] = reward;
        self.terminals[i] = if terminal { 1.0 } else { 0.0 };
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Slot indices of a uniform sample with replacement.
    pub fn sample_indices(&mut self, n: usize) -> Result<Vec<usize>> {
        if self.len == 0 {
            return Err(Error::contract("cannot sample from an empty buffer"));
        }
        Ok((0..n).map(|_| self.rng.random_range(0..self.len)).collect())
    }

    pub fn sample(&mut self, n: usize) -> Result<Batch> {
        let idx = self.sample_indices(n)?;
        Ok(self.gather(&idx))
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut b = Batch {
            states: Vec::with_capacity(idx.len() * sd),
            actions: Vec::with_capacity(idx.len() * ad),
            next_states: Vec::with_capacity(idx.len() * sd),
            rewards: Vec::with_capacity(idx.len()),
            terminals: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            b.states.extend_from_slice(&self.states[i * sd..(i + 1) * sd]);
            b.actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            b.next_states.extend_from_slice(&self.next_states[i * sd..(i + 1) * sd]);
            b.rewards.push(self.rewards[i]);
            b.terminals.push(self.terminals[i]);
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::with_seed(3, 1, 1, 0).unwrap();
        for i in 0..5 {
            let x = i as f64;
            b.push(&[x], &[x], &[x + 1.0], x, false).unwrap();
        }
        assert_eq!(b.len(), 3);
        let all = b.gather(&[0, 1, 2]);
        assert_eq!(all.rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn empty_sample_rejected() {
        let mut b = ReplayBuffer::with_seed(3, 1, 1, 0).unwrap();
        assert!(b.sample(1).is_err());
        assert!(ReplayBuffer::with_seed(0, 1, 1, 0).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let fill = |seed| {
            let mut b = ReplayBuffer::with_seed(10, 1, 1, seed).unwrap();
            for i in 0..10 {
                b.push(&[i as f64], &[0.0], &[0.0], 0.0, false).unwrap();
            }
            b.sample(50).unwrap()
        };
        assert_eq!(fill(7), fill(7));
        assert_ne!(fill(7), fill(8));
    }
}
