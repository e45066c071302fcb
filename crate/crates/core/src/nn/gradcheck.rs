//! Central finite differences, used as the independent oracle for every
//! reverse-mode gradient in the crate.

use super::mlp::Mlp;
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference estimate of `d output / d input` for a scalar-output net.
pub fn finite_diff_input_grad(net: &Mlp, input: &[f64], h: f64) -> Result<Vec<f64>> {
    if net.output_dim() != 1 {
        return Err(Error::contract("finite differences need a scalar-output network"));
    }
    if !(h > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let f = |x: &[f64]| -> Result<f64> { Ok(net.forward(x)?[0]) };
    central_diff(f, input, h)
}

/// Central-difference gradient of an arbitrary scalar function.
pub fn central_diff<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe)?;
        probe[i] = orig - h;
        let down = f(&probe)?;
        probe[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Central-difference gradient of `cotangent · net(input)` w.r.t. every parameter.
pub fn finite_diff_param_grad(net: &Mlp, input: &[f64], cotangent: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut probe = net.clone();
    let mut grad = Vec::with_capacity(net.num_params());
    for i in 0..net.num_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = dot(&probe.forward_batch(input)?.output().to_vec(), cotangent);
        probe.params_mut()[i] = orig - h;
        let down = dot(&probe.forward_batch(input)?.output().to_vec(), cotangent);
        probe.params_mut()[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps vanishing entries from
/// dominating through pure round-off.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y, floor))
        .fold(0.0, f64::max)
}
