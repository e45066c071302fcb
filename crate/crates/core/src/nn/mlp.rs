//! Dense feed-forward network with exact reverse-mode gradients.
//!
//! Parameters live in one flat buffer, laid out layer by layer as a row-major
//! weight matrix of shape `(out, in)` followed by its bias vector. Optimizers,
//! polyak averaging and snapshots all operate on that flat view.
//!
//! Batched inputs are flat row-major `(batch, input_dim)` slices.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::linalg::{matmul, matmul_at_acc, matmul_bt};
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu,
}

impl Activation {
    pub const LEAKY_SLOPE: f64 = 0.01;

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    Self::LEAKY_SLOPE * z
                }
            }
        }
    }

    /// First derivative, given the pre-activation `z` and its image `y`.
    #[inline]
    fn d1(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    Self::LEAKY_SLOPE
                }
            }
        }
    }

    #[inline]
    fn d2(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * y * (1.0 - y * y),
            _ => 0.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::LeakyRelu => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::LeakyRelu),
            _ => None,
        }
    }
}

/// Output-layer map. `Clip` carries its bounds so they exist iff clipping is on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
    Clip { lo: f64, hi: f64 },
}

impl OutputActivation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => z,
            OutputActivation::Tanh => z.tanh(),
            OutputActivation::Clip { lo, hi } => z.clamp(lo, hi),
        }
    }

    #[inline]
    fn d1(self, z: f64, y: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Tanh => 1.0 - y * y,
            OutputActivation::Clip { lo, hi } => {
                if z > lo && z < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    fn d2(self, y: f64) -> f64 {
        match self {
            OutputActivation::Tanh => -2.0 * y * (1.0 - y * y),
            _ => 0.0,
        }
    }

    fn validate(self) -> Result<()> {
        if let OutputActivation::Clip { lo, hi } = self {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::contract(format!(
                    "clip bounds must be finite with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Multi-layer perceptron `sizes[0] -> ... -> sizes[L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    hidden: Activation,
    output: OutputActivation,
    params: Vec<f64>,
    /// `(weight_offset, bias_offset)` per layer.
    offsets: Vec<(usize, usize)>,
}

/// Exact gradients of `cotangent · output` for one backward pass.
///
/// `params` mirrors [`Mlp::params`]; `input` holds one row per batch sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GradTape {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl GradTape {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            params: vec![0.0; net.num_params()],
            input: Vec::new(),
        }
    }

    pub fn zero(&mut self) {
        self.params.iter_mut().for_each(|g| *g = 0.0);
        self.input.clear();
    }

    pub fn scale(&mut self, factor: f64) {
        self.params.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn add_assign(&mut self, other: &GradTape) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += b;
        }
    }
}

/// Activations recorded by a batched forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    batch: usize,
    /// `acts[i]` is the input of layer `i`; `acts[L]` is the network output.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least one layer")
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }
}

/// Intermediate quantities of an input-gradient computation, kept so the
/// gradient itself can be differentiated with respect to the parameters.
#[derive(Debug, Clone)]
pub struct InputGradTrace {
    cotangent: Vec<f64>,
    /// `d[i]`: gradient w.r.t. the pre-activation of layer `i`.
    d: Vec<Vec<f64>>,
    /// `u[i]`: gradient w.r.t. the input of layer `i`; `u[0]` is the input gradient.
    u: Vec<Vec<f64>>,
}

impl InputGradTrace {
    pub fn input_gradient(&self) -> &[f64] {
        &self.u[0]
    }
}

impl Mlp {
    /// Glorot-uniform initialized network: each weight drawn from
    /// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`, biases zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new(-limit, limit).expect("positive limit");
            let (w, _) = net.offsets[l];
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::contract("an MLP needs at least input and output sizes"));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::contract("layer sizes must be positive"));
        }
        output.validate()?;
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut at = 0;
        for w in sizes.windows(2) {
            let w_off = at;
            at += w[0] * w[1];
            offsets.push((w_off, at));
            at += w[1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            hidden,
            output,
            params: vec![0.0; at],
            offsets,
        })
    }

    /// Builds a network from an explicit flat parameter vector.
    pub fn from_params(
        sizes: &[usize],
        hidden: Activation,
        output: OutputActivation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters contain NaN/Inf".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major `(out, in)` weights of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.offsets[l];
        &self.params[w..b]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (_, b) = self.offsets[l];
        &self.params[b..b + self.sizes[l + 1]]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (w, b) = self.offsets[l];
        &mut self.params[w..b]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (_, b) = self.offsets[l];
        let n = self.sizes[l + 1];
        &mut self.params[b..b + n]
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(self.forward_batch(input)?.output().to_vec())
    }

    /// Single-sample reverse pass: gradients of `cotangent · forward(input)`.
    pub fn backward(&self, input: &[f64], cotangent: &[f64]) -> Result<GradTape> {
        if input.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_dim()
            )));
        }
        let trace = self.forward_batch(input)?;
        let mut tape = GradTape::zeros_like(self);
        self.backward_batch(&trace, cotangent, &mut tape)?;
        Ok(tape)
    }

    /// Forward pass over a row-major batch, recording everything the reverse
    /// pass needs.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Trace> {
        let din = self.input_dim();
        if inputs.len() % din != 0 {
            return Err(Error::contract(format!(
                "batch buffer of length {} is not a multiple of input dim {}",
                inputs.len(),
                din
            )));
        }
        let n = inputs.len() / din;
        let layers = self.num_layers();
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        acts.push(inputs.to_vec());
        for l in 0..layers {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = vec![0.0; n * fout];
            matmul_bt(&acts[l], self.weights(l), &mut z, n, fin, fout);
            let b = self.bias(l);
            for row in z.chunks_exact_mut(fout) {
                for (zi, bi) in row.iter_mut().zip(b) {
                    *zi += bi;
                }
            }
            let h: Vec<f64> = if l + 1 == layers {
                z.iter().map(|&v| self.output.apply(v)).collect()
            } else {
                z.iter().map(|&v| self.hidden.apply(v)).collect()
            };
            pre.push(z);
            acts.push(h);
        }
        Ok(Trace { batch: n, acts, pre })
    }

    /// Reverse pass. Parameter gradients are *accumulated* into `tape.params`;
    /// `tape.input` is overwritten with the per-sample input gradients.
    pub fn backward_batch(&self, trace: &Trace, cotangent: &[f64], tape: &mut GradTape) -> Result<()> {
        let n = trace.batch;
        let layers = self.num_layers();
        if cotangent.len() != n * self.output_dim() {
            return Err(Error::contract(format!(
                "cotangent length {} does not match batch {} x output {}",
                cotangent.len(),
                n,
                self.output_dim()
            )));
        }
        if tape.params.len() != self.params.len() {
            return Err(Error::contract("gradient tape does not match network shape"));
        }
        let last = layers - 1;
        let mut delta: Vec<f64> = cotangent
            .iter()
            .zip(&trace.pre[last])
            .zip(&trace.acts[layers])
            .map(|((&c, &z), &y)| c * self.output.d1(z, y))
            .collect();
        for l in (0..layers).rev() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.offsets[l];
            matmul_at_acc(&delta, &trace.acts[l], &mut tape.params[w_off..b_off], n, fout, fin);
            let gb = &mut tape.params[b_off..b_off + fout];
            for row in delta.chunks_exact(fout) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let mut up = vec![0.0; n * fin];
            matmul(&delta, self.weights(l), &mut up, n, fout, fin);
            if l == 0 {
                tape.input = up;
            } else {
                for ((u, &z), &y) in up.iter_mut().zip(&trace.pre[l - 1]).zip(&trace.acts[l]) {
                    *u *= self.hidden.d1(z, y);
                }
                delta = up;
            }
        }
        Ok(())
    }

    /// Input gradients of `cotangent · output` without touching parameter
    /// gradients, keeping the intermediates for [`Mlp::input_gradient_vjp`].
    pub fn input_gradient(&self, trace: &Trace, cotangent: &[f64]) -> Result<InputGradTrace> {
        let n = trace.batch;
        let layers = self.num_layers();
        if cotangent.len() != n * self.output_dim() {
            return Err(Error::contract("cotangent length does not match batch x output"));
        }
        let last = layers - 1;
        let mut d = vec![Vec::new(); layers];
        let mut u = vec![Vec::new(); layers];
        d[last] = cotangent
            .iter()
            .zip(&trace.pre[last])
            .zip(&trace.acts[layers])
            .map(|((&c, &z), &y)| c * self.output.d1(z, y))
            .collect();
        for l in (0..layers).rev() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let mut up = vec![0.0; n * fin];
            matmul(&d[l], self.weights(l), &mut up, n, fout, fin);
            if l > 0 {
                d[l - 1] = up
                    .iter()
                    .zip(&trace.pre[l - 1])
                    .zip(&trace.acts[l])
                    .map(|((&v, &z), &y)| v * self.hidden.d1(z, y))
                    .collect();
            }
            u[l] = up;
        }
        Ok(InputGradTrace {
            cotangent: cotangent.to_vec(),
            d,
            u,
        })
    }

    /// Given `v = dP/dG` for the input gradients `G` computed by
    /// [`Mlp::input_gradient`], accumulates `dP/dθ` into `tape.params`.
    pub fn input_gradient_vjp(
        &self,
        trace: &Trace,
        igt: &InputGradTrace,
        v: &[f64],
        tape: &mut GradTape,
    ) -> Result<()> {
        let n = trace.batch;
        let layers = self.num_layers();
        if v.len() != n * self.input_dim() {
            return Err(Error::contract("input-gradient cotangent has wrong length"));
        }
        let last = layers - 1;
        let mut zinj: Vec<Vec<f64>> = vec![Vec::new(); layers];
        let mut ubar = v.to_vec();
        for l in 0..layers {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.offsets[l];
            // u[l] = d[l] W_l
            matmul_at_acc(&igt.d[l], &ubar, &mut tape.params[w_off..b_off], n, fout, fin);
            let mut dbar = vec![0.0; n * fout];
            matmul_bt(&ubar, self.weights(l), &mut dbar, n, fin, fout);
            if l < last {
                // d[l] = u[l+1] ⊙ σ'(z_l)
                let z = &trace.pre[l];
                let y = &trace.acts[l + 1];
                let up = &igt.u[l + 1];
                zinj[l] = (0..n * fout)
                    .map(|i| dbar[i] * self.hidden.d2(y[i]) * up[i])
                    .collect();
                ubar = (0..n * fout).map(|i| dbar[i] * self.hidden.d1(z[i], y[i])).collect();
            } else {
                let y = &trace.acts[layers];
                zinj[l] = (0..n * fout)
                    .map(|i| dbar[i] * igt.cotangent[i] * self.output.d2(y[i]))
                    .collect();
            }
        }
        let mut zbar = std::mem::take(&mut zinj[last]);
        for l in (0..layers).rev() {
            let (fin, fout) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.offsets[l];
            matmul_at_acc(&zbar, &trace.acts[l], &mut tape.params[w_off..b_off], n, fout, fin);
            let gb = &mut tape.params[b_off..b_off + fout];
            for row in zbar.chunks_exact(fout) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let mut hbar = vec![0.0; n * fin];
                matmul(&zbar, self.weights(l), &mut hbar, n, fout, fin);
                let z = &trace.pre[l - 1];
                let y = &trace.acts[l];
                let inj = &zinj[l - 1];
                for i in 0..n * fin {
                    hbar[i] = hbar[i] * self.hidden.d1(z[i], y[i]) + inj[i];
                }
                zbar = hbar;
            }
        }
        Ok(())
    }

    /// Polyak averaging: `self ← ζ·self + (1−ζ)·source`.
    pub fn polyak_from(&mut self, source: &Mlp, zeta: f64) -> Result<()> {
        if source.sizes != self.sizes {
            return Err(Error::contract("polyak source shape differs from target"));
        }
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = zeta * *t + (1.0 - zeta) * s;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(w: f64, b: f64) -> Mlp {
        Mlp::from_params(&[1, 1], Activation::Relu, OutputActivation::Identity, vec![w, b]).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2], Activation::Tanh, OutputActivation::Identity).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_one_by_one() {
        let net = linear(2.0, 1.0);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        let tape = net.backward(&[3.0], &[1.0]).unwrap();
        assert_eq!(tape.input, vec![2.0]);
        assert_eq!(tape.params, vec![3.0, 1.0]);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 2], Activation::Tanh, OutputActivation::Identity, &mut rng).unwrap();
        let tape = net.backward(&[0.1, 0.2, 0.3], &[0.0, 0.0]).unwrap();
        assert!(tape.params.iter().all(|&g| g == 0.0));
        assert!(tape.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = linear(1.0, 0.0);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(net.backward(&[1.0], &[1.0, 1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn invalid_clip_bounds_rejected() {
        let r = Mlp::zeros(&[1, 1], Activation::Relu, OutputActivation::Clip { lo: 1.0, hi: -1.0 });
        assert!(r.is_err());
    }

    #[test]
    fn clip_output_gradient_masks() {
        let clip = OutputActivation::Clip { lo: -1.0, hi: 1.0 };
        let net = Mlp::from_params(&[1, 1], Activation::Relu, clip, vec![1.0, 0.0]).unwrap();
        assert_eq!(net.backward(&[0.5], &[1.0]).unwrap().input, vec![1.0]);
        assert_eq!(net.backward(&[3.0], &[1.0]).unwrap().input, vec![0.0]);
        assert_eq!(net.backward(&[-3.0], &[1.0]).unwrap().input, vec![0.0]);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn glorot_bounds_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[4, 6], Activation::Relu, OutputActivation::Identity, &mut rng).unwrap();
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(net.weights(0).iter().all(|w| w.abs() <= limit));
        assert!(net.bias(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn batch_matches_per_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::new(&[2, 7, 3], Activation::LeakyRelu, OutputActivation::Tanh, &mut rng).unwrap();
        let xs = [0.3, -0.2, 1.5, 0.7, -0.9, 0.0];
        let trace = net.forward_batch(&xs).unwrap();
        for (i, x) in xs.chunks(2).enumerate() {
            let single = net.forward(x).unwrap();
            assert_eq!(&trace.output()[i * 3..i * 3 + 3], single.as_slice());
        }
    }

    #[test]
    fn polyak_blend() {
        let mut target = linear(1.0, 1.0);
        let live = linear(3.0, 3.0);
        target.polyak_from(&live, 0.995).unwrap();
        assert!((target.params()[0] - 1.01).abs() < 1e-12);
        let mut t2 = linear(1.0, 1.0);
        t2.polyak_from(&live, 0.0).unwrap();
        assert_eq!(t2.params(), live.params());
    }
}
