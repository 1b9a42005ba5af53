//! Optimizers: Adan and the baselines it is compared against.
//!
//! Sign convention throughout: the momentum coefficient β weights the *new*
//! term, `m_k = (1-β1) m_{k-1} + β1 g_k`. Callers holding hyperparameters in
//! the complementary convention must convert before constructing
//! [`HyperParams`].

mod adan;
mod baselines;

pub use adan::{
    adan_init, adan_restart, adan_step, extrapolation_point, prox_decay_update, restart_check,
    AdanState, StepReport,
};
pub use baselines::{
    adam_family_step, agd2_step, agd_step, baseline_init, hba_step, BaselineKind, BaselineState,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("non-finite value in optimizer state at step {step}")]
    NonFinite { step: u64 },
    #[error("operation requires optimizer kind {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: String },
    #[error("invalid hyperparameter {name}: {value}")]
    InvalidHyper { name: &'static str, value: f64 },
}

/// Hyperparameters shared by Adan and the baselines.
///
/// With `debias` unset the moments start from the gradient itself
/// (`m_0 = g_0`, `n_0 = g_0²`, and at the second step `v_1 = g_1 - g_0`
/// directly), which keeps the hand-traceable form of the update. With
/// `debias` set the moments start from zero and every use divides by
/// `1-(1-β)^k`, the convention of deployed Adam-family implementations; the
/// direct `v_1` seed does not apply there.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Base learning rate η.
    pub eta: f64,
    /// Stability constant ε; keeps every `√n + ε` denominator positive.
    pub eps: f64,
    /// Decoupled weight decay λ.
    pub lambda: f64,
    pub debias: bool,
    /// Use `n_{k-1}` instead of `n_k` when forming the per-coordinate step
    /// size, which makes the step size independent of the current gradient
    /// draw. The restart schedule assumes this mode.
    pub shifted_n: bool,
    /// Global gradient-norm clip threshold applied to every incoming gradient.
    pub clip: Option<f64>,
    /// Restart radius R; restarts fire when `(k+1)·Σ‖y_{t+1}-y_t‖²_{√n}` exceeds R².
    pub restart_r: Option<f64>,
    /// Optional decay μ giving the schedule `λ_k = λ(1-μ)^k`.
    pub lambda_decay_mu: Option<f64>,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            beta1: 0.02,
            beta2: 0.08,
            beta3: 0.01,
            eta: 0.01,
            eps: 1e-8,
            lambda: 0.0,
            debias: false,
            shifted_n: false,
            clip: None,
            restart_r: None,
            lambda_decay_mu: None,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), OptimError> {
        let beta_ok = |b: f64| (0.0..=1.0).contains(&b);
        if !beta_ok(self.beta1) {
            return Err(OptimError::InvalidHyper {
                name: "beta1",
                value: self.beta1,
            });
        }
        if !beta_ok(self.beta2) {
            return Err(OptimError::InvalidHyper {
                name: "beta2",
                value: self.beta2,
            });
        }
        if !beta_ok(self.beta3) {
            return Err(OptimError::InvalidHyper {
                name: "beta3",
                value: self.beta3,
            });
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(OptimError::InvalidHyper {
                name: "eta",
                value: self.eta,
            });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(OptimError::InvalidHyper {
                name: "eps",
                value: self.eps,
            });
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(OptimError::InvalidHyper {
                name: "lambda",
                value: self.lambda,
            });
        }
        if let Some(c) = self.clip {
            if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(OptimError::InvalidHyper {
                    name: "clip",
                    value: c,
                });
            }
        }
        if let Some(r) = self.restart_r {
            if r.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(OptimError::InvalidHyper {
                    name: "restart_r",
                    value: r,
                });
            }
        }
        if let Some(mu) = self.lambda_decay_mu {
            if !(0.0..1.0).contains(&mu) {
                return Err(OptimError::InvalidHyper {
                    name: "lambda_decay_mu",
                    value: mu,
                });
            }
        }
        Ok(())
    }

    /// Weight decay at step `k` under the optional `λ_k = λ(1-μ)^k` schedule.
    pub fn lambda_at(&self, k: u64) -> f64 {
        match self.lambda_decay_mu {
            Some(mu) => self.lambda * (1.0 - mu).powi(k as i32),
            None => self.lambda,
        }
    }
}
