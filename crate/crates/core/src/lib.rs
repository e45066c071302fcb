//! Actor Residual Critic toolkit.
//!
//! The critic of an actor-critic method normally estimates `Q(s,a)`, the
//! immediate reward plus the discounted future. When the reward is a known
//! differentiable function (as the discriminator reward is in adversarial
//! imitation learning), the critic can estimate only the residual
//! `C(s,a) = Q(s,a) - r(s,a)` and the policy gradient can use the exact
//! `∇ₐ r(s,a)`. This crate builds that idea out end to end:
//!
//! - [`nn`]: a small MLP with exact reverse-mode gradients and Adam.
//! - [`env`]: tabular grid world, the 1D driving task, planar reach/push.
//! - [`dp`]: policy evaluation and policy iteration with `C` and `Q`.
//! - [`adversary`]: discriminator training and the GAIL / f-MAX-RKL rewards.
//! - [`agents`]: SARC, SAC, Naive-Diff and behavior cloning.
//! - [`analysis`]: gradient-quality experiments (adversarial approximation,
//!   SNR algebra, the `Q` vs `r + C` fitting study).
//! - [`harness`]: experiment configs, seeding, evaluation, artifacts.

pub mod adversary;
pub mod agents;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod dp;
pub mod env;
pub mod nn;
pub mod seeding;

pub use error::{Error, Result};
