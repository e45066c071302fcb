use rand::Rng;

use crate::dp::CriticKind;
use crate::error::{Error, Result};
use crate::nn::{concat_rows, Activation, Adam, GradTape, Mlp, OutputActivation};

/// Twin critics on `(s, a)` with Polyak-averaged targets. `kind` records
/// whether they estimate `Q` or the residual `C = Q − r`.
#[derive(Debug, Clone)]
pub struct CriticPair {
    pub kind: CriticKind,
    pub c1: Mlp,
    pub c2: Mlp,
    pub c1_targ: Mlp,
    pub c2_targ: Mlp,
    opt1: Adam,
    opt2: Adam,
    state_dim: usize,
    action_dim: usize,
}

impl CriticPair {
    pub fn new<R: Rng + ?Sized>(
        kind: CriticKind,
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, hidden);
        let c1 = Mlp::new(&sizes, Activation::Relu, OutputActivation::Identity, rng)?;
        let c2 = Mlp::new(&sizes, Activation::Relu, OutputActivation::Identity, rng)?;
        Ok(Self::from_nets(kind, c1, c2, state_dim, action_dim, learning_rate))
    }

    /// Both critics (and targets) identically zero.
    pub fn zeroed(kind: CriticKind, state_dim: usize, action_dim: usize, hidden: &[usize], learning_rate: f64) -> Result<Self> {
        let sizes = Self::sizes(state_dim, action_dim, hidden);
        let c = Mlp::zeros(&sizes, Activation::Relu, OutputActivation::Identity)?;
        Ok(Self::from_nets(kind, c.clone(), c, state_dim, action_dim, learning_rate))
    }

    pub fn from_nets(kind: CriticKind, c1: Mlp, c2: Mlp, state_dim: usize, action_dim: usize, learning_rate: f64) -> Self {
        Self {
            kind,
            opt1: Adam::for_net(&c1, learning_rate),
            opt2: Adam::for_net(&c2, learning_rate),
            c1_targ: c1.clone(),
            c2_targ: c2.clone(),
            c1,
            c2,
            state_dim,
            action_dim,
        }
    }

    fn sizes(state_dim: usize, action_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend(hidden);
        sizes.push(1);
        sizes
    }

    pub fn expect_kind(&self, kind: CriticKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::contract(format!("expected {kind:?} critics, found {:?}", self.kind)));
        }
        Ok(())
    }

    fn inputs(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        Ok(concat_rows(states, self.state_dim, actions, self.action_dim)?.0)
    }

    /// `min(c1_targ, c2_targ)` per row.
    pub fn target_min(&self, states: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        let x = self.inputs(states, actions)?;
        let a = self.c1_targ.forward_batch(&x)?;
        let b = self.c2_targ.forward_batch(&x)?;
        Ok(a.output().iter().zip(b.output()).map(|(p, q)| p.min(*q)).collect())
    }

    /// `min(c1, c2)` per row and its action gradient (taken through the
    /// network attaining the minimum).
    pub fn min_with_action_grads(&self, states: &[f64], actions: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.inputs(states, actions)?;
        let t1 = self.c1.forward_batch(&x)?;
        let t2 = self.c2.forward_batch(&x)?;
        let n = t1.batch();
        let mut values = Vec::with_capacity(n);
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for i in 0..n {
            let (p, q) = (t1.output()[i], t2.output()[i]);
            if p <= q {
                values.push(p);
                w1[i] = 1.0;
            } else {
                values.push(q);
                w2[i] = 1.0;
            }
        }
        let g1 = self.c1.input_gradient(&t1, &w1)?;
        let g2 = self.c2.input_gradient(&t2, &w2)?;
        let (sd, ad) = (self.state_dim, self.action_dim);
        let width = sd + ad;
        let mut grads = Vec::with_capacity(n * ad);
        for i in 0..n {
            for j in 0..ad {
                let k = i * width + sd + j;
                grads.push(g1.input_gradient()[k] + g2.input_gradient()[k]);
            }
        }
        Ok((values, grads))
    }

    /// One Adam step per network on `mean (cᵢ(s,a) − y)²`; returns the
    /// pre-step loss averaged over the two networks.
    pub fn regress(&mut self, states: &[f64], actions: &[f64], targets: &[f64]) -> Result<f64> {
        let x = self.inputs(states, actions)?;
        let n = targets.len();
        if n == 0 || x.len() != n * (self.state_dim + self.action_dim) {
            return Err(Error::contract("critic targets do not match the batch"));
        }
        let mut total = 0.0;
        for (net, opt) in [(&mut self.c1, &mut self.opt1), (&mut self.c2, &mut self.opt2)] {
            let trace = net.forward_batch(&x)?;
            let mut loss = 0.0;
            let cot: Vec<f64> = trace
                .output()
                .iter()
                .zip(targets)
                .map(|(c, y)| {
                    let e = c - y;
                    loss += e * e;
                    2.0 * e / n as f64
                })
                .collect();
            let mut tape = GradTape::zeros_like(net);
            net.backward_batch(&trace, &cot, &mut tape)?;
            net.adam_step(&tape, opt)?;
            total += loss / n as f64;
        }
        Ok(total / 2.0)
    }

    /// `targ ← ζ·targ + (1 − ζ)·live`.
    pub fn polyak_update(&mut self, zeta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(Error::contract("polyak coefficient must lie in [0, 1]"));
        }
        self.c1_targ.polyak_from(&self.c1, zeta)?;
        self.c2_targ.polyak_from(&self.c2, zeta)
    }

    pub fn all_finite(&self) -> bool {
        self.c1.all_finite() && self.c2.all_finite()
    }
}
