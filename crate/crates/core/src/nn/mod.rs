//! Differentiable building blocks: the MLP, its optimizer, and the
//! finite-difference oracle used to check every gradient.

mod adam;
mod gradcheck;
mod linalg;
mod mlp;
pub mod snapshot;

pub use adam::Adam;
pub use gradcheck::{
    central_diff, finite_diff_input_grad, finite_diff_param_grad, max_relative_error, relative_error,
    DEFAULT_FD_STEP,
};
pub use mlp::{Activation, GradTape, InputGradTrace, Mlp, OutputActivation, Trace};

/// Row-wise concatenation `[a_i, b_i]` of two row-major buffers.
pub fn concat_rows(a: &[f64], a_dim: usize, b: &[f64], b_dim: usize) -> crate::Result<(Vec<f64>, usize)> {
    if a_dim == 0 || a.len() % a_dim != 0 || b.len() % b_dim.max(1) != 0 {
        return Err(crate::Error::contract("row buffers do not match their widths"));
    }
    let n = a.len() / a_dim;
    if b.len() != n * b_dim {
        return Err(crate::Error::contract("row buffers differ in row count"));
    }
    let mut x = Vec::with_capacity(n * (a_dim + b_dim));
    for i in 0..n {
        x.extend_from_slice(&a[i * a_dim..(i + 1) * a_dim]);
        x.extend_from_slice(&b[i * b_dim..(i + 1) * b_dim]);
    }
    Ok((x, n))
}
