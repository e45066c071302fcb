use serde::{Deserialize, Serialize};

use super::mlp::{GradTape, Mlp};
use crate::error::{Error, Result};

/// Adam optimizer state over a flat parameter vector (descent direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self::with_betas(num_params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn for_net(net: &Mlp, learning_rate: f64) -> Self {
        Self::new(net.num_params(), learning_rate)
    }

    pub fn with_betas(num_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One bias-corrected Adam step, `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::contract(format!(
                "adam state has {} slots, params {}, grads {}",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i} is {}", grads[i])));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters became non-finite after Adam step".into()));
        }
        Ok(())
    }
}

impl Mlp {
    /// Gradient-descent Adam step using the parameter gradients in `tape`.
    pub fn adam_step(&mut self, tape: &GradTape, state: &mut Adam) -> Result<()> {
        state.step(self.params_mut(), &tape.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar Adam written out independently of the vectorized loop.
    fn scalar_adam(mut w: f64, grads: &[f64], lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v) = (0.0, 0.0);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        w
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(1, 0.1);
        let mut w = [0.0];
        adam.step(&mut w, &[1.0]).unwrap();
        assert!((w[0] + 0.1).abs() < 1e-8);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(3, 0.1);
        let mut w = [1.0, -2.0, 0.5];
        adam.step(&mut w, &[0.0; 3]).unwrap();
        assert_eq!(w, [1.0, -2.0, 0.5]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn two_steps_match_scalar_oracle() {
        let mut adam = Adam::new(1, 0.05);
        let mut w = [0.3];
        adam.step(&mut w, &[0.7]).unwrap();
        adam.step(&mut w, &[0.7]).unwrap();
        let expected = scalar_adam(0.3, &[0.7, 0.7], 0.05);
        assert!((w[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut adam = Adam::new(2, 0.1);
        let mut w = [0.0, 0.0];
        assert!(matches!(adam.step(&mut w, &[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert_eq!(adam.step_count(), 0);
        assert_eq!(w, [0.0, 0.0]);
    }
}
