//! Gradient-quality studies: an accurate approximation with a wildly wrong
//! derivative, the signal-to-noise algebra of the `r + C` decomposition,
//! and a fitting experiment comparing `∇ₐ Q̂` with `∇ₐ (r + Ĉ)`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{car1d_advance, car1d_reward, car1d_reward_grad_action, CAR1D_AGENT_ACTION, CAR1D_HORIZON};
use crate::error::{Error, Result};
use crate::nn::{concat_rows, Activation, Adam, GradTape, Mlp, OutputActivation};
use crate::seeding::{indexed_rng, stream_rng, Stream};

/// `f̂(x) = f(x) + ε sin(b (x − x₀))` with `b = 2D/ε`: within `ε` of `f`
/// everywhere, yet `f̂′(x₀) − f′(x₀) = 2D`.
pub struct AdversarialApprox {
    base: Box<dyn Fn(f64) -> f64>,
    base_grad: Box<dyn Fn(f64) -> f64>,
    pub epsilon: f64,
    pub big_d: f64,
    pub x0: f64,
    pub b: f64,
}

impl std::fmt::Debug for AdversarialApprox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdversarialApprox")
            .field("epsilon", &self.epsilon)
            .field("big_d", &self.big_d)
            .field("x0", &self.x0)
            .field("b", &self.b)
            .finish()
    }
}

impl AdversarialApprox {
    pub fn new(
        base: impl Fn(f64) -> f64 + 'static,
        base_grad: impl Fn(f64) -> f64 + 'static,
        epsilon: f64,
        big_d: f64,
        x0: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) || !(big_d > 0.0 && big_d.is_finite()) {
            return Err(Error::contract("epsilon and D must be positive and finite"));
        }
        Ok(Self {
            base: Box::new(base),
            base_grad: Box::new(base_grad),
            epsilon,
            big_d,
            x0,
            b: 2.0 * big_d / epsilon,
        })
    }

    pub fn base(&self, x: f64) -> f64 {
        (self.base)(x)
    }

    pub fn base_grad(&self, x: f64) -> f64 {
        (self.base_grad)(x)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.base(x) + self.epsilon * (self.b * (x - self.x0)).sin()
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.base_grad(x) + self.epsilon * self.b * (self.b * (x - self.x0)).cos()
    }

    /// `max |f̂ − f|` over `n` evenly spaced points of `[lo, hi]`.
    pub fn grid_sup_error(&self, lo: f64, hi: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
                (self.value(x) - self.base(x)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Signal strengths of `∇ₐ r` and the true `∇ₐ C`, their cross term, and the
/// SNRs of the learned `∇ₐ Ĉ` and `∇ₐ Q̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrInputs {
    pub s_r: f64,
    pub s_c: f64,
    pub s_rc: f64,
    pub snr_c: f64,
    pub snr_q: f64,
}

/// Ratio `S_r/S_c + 1 + 2 S_rc/S_c`.
fn gain(inputs: &SnrInputs) -> Result<f64> {
    if inputs.s_c <= 0.0 {
        return Err(Error::contract("S_c must be positive"));
    }
    Ok(inputs.s_r / inputs.s_c + 1.0 + 2.0 * inputs.s_rc / inputs.s_c)
}

/// SNR of `∇ₐ r + ∇ₐ Ĉ`: `snr_c (S_r/S_c + 1 + 2 S_rc/S_c)`.
pub fn net_snr(inputs: &SnrInputs) -> Result<f64> {
    Ok(inputs.snr_c * gain(inputs)?)
}

/// Smallest `snr_c` at which the decomposition matches `snr_q`.
pub fn snr_threshold(inputs: &SnrInputs) -> Result<f64> {
    let g = gain(inputs)?;
    if g == 0.0 {
        return Err(Error::Undefined("net signal strength is zero".into()));
    }
    Ok(inputs.snr_q / g)
}

/// Empirical SNR of `g_r + g_c + ε` where `(g_r, g_c)` are jointly Gaussian
/// with second moments `(S_r, S_c, S_rc)` and `ε ~ N(0, S_c / snr_c)`.
/// Returns `+∞` when the noise is identically zero.
pub fn monte_carlo_snr<R: Rng + ?Sized>(inputs: &SnrInputs, n_samples: usize, rng: &mut R) -> Result<f64> {
    if n_samples < 10_000 {
        return Err(Error::contract("monte_carlo_snr needs at least 10^4 samples"));
    }
    let SnrInputs { s_r, s_c, s_rc, snr_c, .. } = *inputs;
    if s_r < 0.0 || s_c <= 0.0 || !(snr_c > 0.0) {
        return Err(Error::contract("need S_r >= 0, S_c > 0, snr_c > 0"));
    }
    if s_rc * s_rc > s_r * s_c * (1.0 + 1e-12) {
        return Err(Error::contract("cross term exceeds the Cauchy-Schwarz bound"));
    }
    let rho = if s_r > 0.0 { (s_rc / (s_r * s_c).sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
    let (sr, sc) = (s_r.sqrt(), s_c.sqrt());
    let noise_std = (s_c / snr_c).sqrt();
    let mut signal = 0.0;
    let mut noise = 0.0;
    for _ in 0..n_samples {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z3: f64 = rng.sample(StandardNormal);
        let g_r = sr * z1;
        let g_c = sc * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
        let e = noise_std * z3;
        signal += (g_r + g_c) * (g_r + g_c);
        noise += e * e;
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal / noise)
}

/// Which branch of the cross-term analysis a configuration falls in:
/// 1 for `S_rc ≥ 0`, 2 for `−S_r/2 ≤ S_rc < 0`, 3 below that.
pub fn snr_case(inputs: &SnrInputs) -> u8 {
    if inputs.s_rc >= 0.0 {
        1
    } else if inputs.s_rc >= -0.5 * inputs.s_r {
        2
    } else {
        3
    }
}

/// Ten configurations covering all three cases, two of them on the
/// `S_rc = −S_r/2` boundary.
pub fn standard_snr_cases() -> Vec<SnrInputs> {
    let c = |s_r, s_c, s_rc, snr_c| SnrInputs { s_r, s_c, s_rc, snr_c, snr_q: 1.0 };
    vec![
        c(1.0, 1.0, 0.0, 1.0),
        c(1.0, 1.0, 0.5, 2.0),
        c(4.0, 1.0, 2.0, 0.5),
        c(0.0, 1.0, 0.0, 3.0),
        c(1.0, 1.0, -0.25, 1.0),
        c(1.0, 1.0, -0.5, 1.0),
        c(2.0, 0.5, -1.0, 4.0),
        c(1.0, 1.0, -0.75, 1.0),
        c(4.0, 4.0, -3.0, 2.0),
        c(9.0, 4.0, -5.0, 1.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub case: u8,
    pub inputs: SnrInputs,
    pub formula: f64,
    pub threshold: Option<f64>,
    pub monte_carlo: f64,
    pub relative_error: f64,
}

/// Formula against simulation for each configuration; configuration `i`
/// draws from sub-stream `i` of `seed`.
pub fn snr_study(cases: &[SnrInputs], n_samples: usize, seed: u64) -> Result<Vec<SnrRow>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, inputs)| {
            let formula = net_snr(inputs)?;
            let mut rng = indexed_rng(seed, Stream::Data, i as u32);
            let monte_carlo = monte_carlo_snr(inputs, n_samples, &mut rng)?;
            Ok(SnrRow {
                case: snr_case(inputs),
                inputs: *inputs,
                formula,
                threshold: snr_threshold(inputs).ok(),
                monte_carlo,
                relative_error: (monte_carlo - formula).abs() / formula.abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRow {
    pub epsilon: f64,
    pub big_d: f64,
    pub x0: f64,
    /// Largest `|f̂ − f|` on the grid over `[x0 − 1, x0 + 1]`.
    pub sup_error: f64,
    /// `f̂′(x0) − f′(x0)`, which should equal `2D`.
    pub grad_gap: f64,
}

/// Random `(f, ε, D, x0)` draws with `f(x) = c₁x² + sin(c₂x)`, each checked on
/// `grid_points` points.
pub fn approximation_study(n_configs: usize, grid_points: usize, seed: u64) -> Result<Vec<ApproximationRow>> {
    let mut rng = stream_rng(seed, Stream::Data);
    (0..n_configs)
        .map(|_| {
            let epsilon = rng.random_range(1e-3..1.0);
            let big_d = rng.random_range(0.1..100.0);
            let x0 = rng.random_range(-2.0..2.0);
            let c1: f64 = rng.random_range(-3.0..3.0);
            let c2: f64 = rng.random_range(-3.0..3.0);
            let f = AdversarialApprox::new(
                move |x| c1 * x * x + (c2 * x).sin(),
                move |x| 2.0 * c1 * x + c2 * (c2 * x).cos(),
                epsilon,
                big_d,
                x0,
            )?;
            Ok(ApproximationRow {
                epsilon,
                big_d,
                x0,
                sup_error: f.grid_sup_error(x0 - 1.0, x0 + 1.0, grid_points),
                grad_gap: f.grad(x0) - f.base_grad(x0),
            })
        })
        .collect()
}

/// Settings of the Car1D fitting study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradAccuracyConfig {
    pub seeds: Vec<u64>,
    pub epochs: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub state_range: (f64, f64),
    pub action_range: (f64, f64),
}

impl Default for GradAccuracyConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            epochs: (0..=10).map(|i| i * 100).collect(),
            n_train: 1024,
            n_test: 1024,
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            batch_size: 256,
            gamma: 0.99,
            horizon: CAR1D_HORIZON,
            state_range: (0.0, 1.0),
            action_range: (0.0, 0.3),
        }
    }
}

/// True `Q(s, a)`: take `a` once, then the constant agent action for the
/// rest of the horizon.
pub fn car1d_true_q(s: f64, a: f64, gamma: f64, horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let mut q = car1d_reward(s, a);
    let mut x = car1d_advance(s, a);
    let mut disc = 1.0;
    for _ in 1..horizon {
        disc *= gamma;
        q += disc * car1d_reward(x, CAR1D_AGENT_ACTION);
        x = car1d_advance(x, CAR1D_AGENT_ACTION);
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `Q̂` fit to `Q` directly.
    Q,
    /// `r + Ĉ` with `Ĉ` fit to `Q − r`.
    RPlusC,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Q => "q",
            Estimator::RPlusC => "r_plus_c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub estimator: Estimator,
    pub seed: u64,
    pub epoch: usize,
    pub value_mae: f64,
    pub grad_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
    /// `max Q − min Q` over the test points, averaged over seeds.
    pub value_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMeans {
    pub epoch: usize,
    pub q_value_mae: f64,
    pub q_grad_mae: f64,
    pub rc_value_mae: f64,
    pub rc_grad_mae: f64,
}

impl AccuracyReport {
    /// Means over seeds, per epoch checkpoint.
    pub fn epoch_means(&self) -> Vec<EpochMeans> {
        let mut acc: BTreeMap<usize, [f64; 5]> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.epoch).or_insert([0.0; 5]);
            match r.estimator {
                Estimator::Q => {
                    e[0] += r.value_mae;
                    e[1] += r.grad_mae;
                    e[4] += 1.0;
                }
                Estimator::RPlusC => {
                    e[2] += r.value_mae;
                    e[3] += r.grad_mae;
                }
            }
        }
        acc.into_iter()
            .map(|(epoch, e)| EpochMeans {
                epoch,
                q_value_mae: e[0] / e[4],
                q_grad_mae: e[1] / e[4],
                rc_value_mae: e[2] / e[4],
                rc_grad_mae: e[3] / e[4],
            })
            .collect()
    }

    /// CSV with header `estimator,seed,epoch,value_mae,grad_mae`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["estimator", "seed", "epoch", "value_mae", "grad_mae"])?;
        for r in &self.rows {
            w.write_record([
                r.estimator.name().to_string(),
                r.seed.to_string(),
                r.epoch.to_string(),
                format!("{:.16e}", r.value_mae),
                format!("{:.16e}", r.grad_mae),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self, config: &GradAccuracyConfig) -> serde_json::Value {
        serde_json::json!({
            "config": config,
            "value_range": self.value_range,
            "epoch_means": self.epoch_means(),
        })
    }
}

struct Points {
    s: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    grad_q: Vec<f64>,
    grad_r: Vec<f64>,
}

fn sample_points<R: Rng + ?Sized>(config: &GradAccuracyConfig, n: usize, rng: &mut R) -> Points {
    let (s_lo, s_hi) = config.state_range;
    let (a_lo, a_hi) = config.action_range;
    let h = 1e-6;
    let mut p = Points {
        s: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        grad_q: Vec::with_capacity(n),
        grad_r: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let s = rng.random_range(s_lo..s_hi);
        let a = rng.random_range(a_lo..a_hi);
        let q = |a: f64| car1d_true_q(s, a, config.gamma, config.horizon);
        p.s.push(s);
        p.a.push(a);
        p.q.push(q(a));
        p.r.push(car1d_reward(s, a));
        p.grad_q.push((q(a + h) - q(a - h)) / (2.0 * h));
        p.grad_r.push(car1d_reward_grad_action(s, a));
    }
    p
}

fn fit_epochs<R: Rng + ?Sized>(
    net: &mut Mlp,
    opt: &mut Adam,
    x: &[f64],
    y: &[f64],
    epochs: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<()> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            let xb: Vec<f64> = chunk.iter().flat_map(|&i| [x[2 * i], x[2 * i + 1]]).collect();
            let trace = net.forward_batch(&xb)?;
            let m = chunk.len() as f64;
            let cot: Vec<f64> = trace
                .output()
                .iter()
                .zip(chunk)
                .map(|(p, &i)| 2.0 * (p - y[i]) / m)
                .collect();
            let mut tape = GradTape::zeros_like(net);
            net.backward_batch(&trace, &cot, &mut tape)?;
            net.adam_step(&tape, opt)?;
        }
    }
    Ok(())
}

/// Values and action-gradients of a scalar net on `(s, a)` rows.
fn net_values_and_action_grads(net: &Mlp, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let trace = net.forward_batch(x)?;
    let n = trace.batch();
    let igt = net.input_gradient(&trace, &vec![1.0; n])?;
    let g = igt.input_gradient();
    Ok((trace.output().to_vec(), (0..n).map(|i| g[2 * i + 1]).collect()))
}

/// Fits `Q̂` to the true Car1D `Q` and `Ĉ` to `Q − r` on uniform samples,
/// recording test-set value and action-gradient errors at every checkpoint
/// in `config.epochs`. Both networks start from the same initial weights.
pub fn gradient_accuracy_experiment(config: &GradAccuracyConfig) -> Result<AccuracyReport> {
    if config.seeds.len() < 3 {
        return Err(Error::config("seeds", "the study needs at least 3 seeds"));
    }
    if config.n_train == 0 || config.n_test == 0 || config.batch_size == 0 {
        return Err(Error::config("n_train", "sample counts and batch size must be positive"));
    }
    let mut checkpoints = config.epochs.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let mut rows = Vec::new();
    let mut range_sum = 0.0;
    for &seed in &config.seeds {
        let mut data_rng = indexed_rng(seed, Stream::Data, 0);
        let train = sample_points(config, config.n_train, &mut data_rng);
        let test = sample_points(config, config.n_test, &mut data_rng);
        let (qmin, qmax) = test.q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        range_sum += qmax - qmin;

        let x_train = concat_rows(&train.s, 1, &train.a, 1)?.0;
        let x_test = concat_rows(&test.s, 1, &test.a, 1)?.0;
        let c_targets: Vec<f64> = train.q.iter().zip(&train.r).map(|(q, r)| q - r).collect();
        let mut sizes = vec![2];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let init = Mlp::new(
            &sizes,
            Activation::Relu,
            OutputActivation::Identity,
            &mut indexed_rng(seed, Stream::CriticInit, 0),
        )?;
        for est in [Estimator::Q, Estimator::RPlusC] {
            let mut net = init.clone();
            let mut opt = Adam::for_net(&net, config.learning_rate);
            let mut shuffle_rng = indexed_rng(seed, Stream::Buffer, est as u32);
            let targets = match est {
                Estimator::Q => &train.q,
                Estimator::RPlusC => &c_targets,
            };
            let mut done = 0;
            for &epoch in &checkpoints {
                fit_epochs(&mut net, &mut opt, &x_train, targets, epoch - done, config.batch_size, &mut shuffle_rng)?;
                done = epoch;
                let (v, g) = net_values_and_action_grads(&net, &x_test)?;
                let n = config.n_test as f64;
                let (mut value_mae, mut grad_mae) = (0.0, 0.0);
                for i in 0..config.n_test {
                    let (qhat, ghat) = match est {
                        Estimator::Q => (v[i], g[i]),
                        Estimator::RPlusC => (test.r[i] + v[i], test.grad_r[i] + g[i]),
                    };
                    value_mae += (qhat - test.q[i]).abs() / n;
                    grad_mae += (ghat - test.grad_q[i]).abs() / n;
                }
                rows.push(AccuracyRow {
                    estimator: est,
                    seed,
                    epoch,
                    value_mae,
                    grad_mae,
                });
            }
        }
    }
    Ok(AccuracyReport {
        rows,
        value_range: range_sum / config.seeds.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(s_r: f64, s_c: f64, s_rc: f64) -> SnrInputs {
        SnrInputs {
            s_r,
            s_c,
            s_rc,
            snr_c: 1.0,
            snr_q: 1.0,
        }
    }

    #[test]
    fn net_snr_cases() {
        assert_eq!(net_snr(&inputs(1.0, 1.0, 0.0)).unwrap(), 2.0);
        assert_eq!(net_snr(&inputs(0.0, 1.0, 0.0)).unwrap(), 1.0);
        assert!((net_snr(&inputs(2.0, 3.0, -1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(net_snr(&inputs(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn threshold_cases() {
        assert_eq!(snr_threshold(&inputs(1.0, 1.0, 0.0)).unwrap(), 0.5);
        assert!(snr_threshold(&inputs(1.0, 2.0, 0.3)).unwrap() <= 1.0);
        assert!(snr_threshold(&inputs(0.5, 1.0, -0.5)).unwrap() > 1.0);
        assert!(matches!(snr_threshold(&inputs(1.0, 1.0, -1.0)), Err(Error::Undefined(_))));
    }

    #[test]
    fn true_q_first_term_is_reward() {
        assert_eq!(car1d_true_q(0.3, 0.2, 0.99, 1), car1d_reward(0.3, 0.2));
        assert_eq!(car1d_true_q(0.3, 0.2, 0.0, 50), car1d_reward(0.3, 0.2));
        assert_eq!(car1d_true_q(0.3, 0.2, 0.99, 0), 0.0);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(AdversarialApprox::new(|_| 0.0, |_| 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(AdversarialApprox::new(|_| 0.0, |_| 0.0, 0.1, -1.0, 0.0).is_err());
    }
}
