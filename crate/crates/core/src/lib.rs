//! Adan — adaptive Nesterov momentum optimization.
//!
//! This crate implements the Adan optimizer (Nesterov momentum estimation with
//! decoupled first/second moments, proximal decoupled weight decay, and an
//! optional restart schedule) together with the classical baselines it is
//! usually compared against (heavy-ball, Nesterov AGD and its gradient-difference
//! reformulation, RMSProp, Adam, AdamW, NAdam).
//!
//! Everything is plain `f64` over dense vectors. The crate is organized as:
//!
//! - [`vecmath`] — dense parameter vectors and the weighted norms used by the
//!   update rules,
//! - [`problems`] — differentiable test objectives with exact gradients and a
//!   seeded stochastic gradient oracle,
//! - [`optim`] — the optimizers themselves,
//! - [`refcheck`] — independent oracles (closed-form moment sums, a numeric
//!   proximal argmin, the x/y reformulation) used to cross-check the
//!   optimizers algebraically,
//! - [`harness`] — deterministic experiment runner and metrics,
//! - [`cli`] — configuration grammar, output formats, and the named
//!   verification checks behind `adan verify`.

pub mod cli;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod refcheck;
pub mod rng;
pub mod vecmath;

pub use vecmath::ParamVector;
