//! The Adan update: Nesterov momentum estimation with decoupled moments,
//! proximal weight decay, and the restart schedule.

use super::{HyperParams, OptimError};
use crate::vecmath::{global_norm_clip, weighted_sq_norm, ParamVector};

/// Full optimizer state for one run.
///
/// `k` counts completed parameter updates; after `adan_step` returns, `theta`
/// is θ_{k} for the new `k`. The restart accumulator carries
/// `Σ_t ‖y_{t+1} - y_t‖²_{√n̂_t}` with `n̂_t` the second moment actually used
/// for the step size at step `t`; it only resets on restart.
#[derive(Debug, Clone)]
pub struct AdanState {
    pub theta: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    pub n: ParamVector,
    pub g_prev: ParamVector,
    pub k: u64,
    pub restart_acc: f64,
    pub y_prev: ParamVector,
    /// Per-coordinate step size η_k of the last completed update.
    pub last_eta: ParamVector,
}

/// Per-step bookkeeping returned to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// The incoming gradient exceeded the clip threshold and was rescaled.
    pub clipped: bool,
}

/// Initialize state at θ0 from the first gradient draw.
///
/// Without de-bias the moments seed from the gradient itself: `m = g0`,
/// `v = 0`, `n = g0∘g0`. With de-bias everything starts at zero.
pub fn adan_init(theta0: ParamVector, g0: &ParamVector, h: &HyperParams) -> AdanState {
    assert_eq!(theta0.dim(), g0.dim(), "dimension mismatch");
    let g0 = match h.clip {
        Some(c) => global_norm_clip(g0, c),
        None => g0.clone(),
    };
    let dim = theta0.dim();
    let (m, v, n) = if h.debias {
        (
            ParamVector::zeros(dim),
            ParamVector::zeros(dim),
            ParamVector::zeros(dim),
        )
    } else {
        (g0.clone(), ParamVector::zeros(dim), g0.square())
    };
    AdanState {
        y_prev: theta0.clone(),
        theta: theta0,
        m,
        v,
        n,
        g_prev: g0,
        k: 0,
        restart_acc: 0.0,
        last_eta: ParamVector::zeros(dim),
    }
}

/// Closed-form proximal step `(θ - (η/(√n+ε))∘m̄) / (1 + λ_k η)`.
///
/// This is the argmin of the linearized objective plus the `‖·-θ‖²_{√n}/(2η)`
/// proximity term, with the ℓ2 regularizer kept exact instead of linearized.
pub fn prox_decay_update(
    theta: &ParamVector,
    m_bar: &ParamVector,
    n: &ParamVector,
    eta: f64,
    eps: f64,
    lambda_k: f64,
) -> ParamVector {
    let step = m_bar.div_sqrt_guarded(n, eps).scale(eta);
    theta.sub(&step).scale(1.0 / (1.0 + lambda_k * eta))
}

/// Extrapolation point `y_{k+1} = θ_{k+1} + η_k∘(m_k + (1-β2)v_k - β1 g_k)`,
/// formed right after the θ-update of the same step. With λ = 0 it collapses
/// to `θ_k - β1 η_k∘g_k`.
pub fn extrapolation_point(
    theta_next: &ParamVector,
    eta_vec: &ParamVector,
    m: &ParamVector,
    v: &ParamVector,
    g: &ParamVector,
    beta1: f64,
    beta2: f64,
) -> ParamVector {
    let inner = m.add_scaled(v, 1.0 - beta2).add_scaled(g, -beta1);
    theta_next.add(&eta_vec.mul(&inner))
}

/// One Adan update consuming the gradient sampled at the current θ.
///
/// At `k = 0` the moments are (re)seeded from the passed gradient, which must
/// be the same draw that initialized the state; at `k = 1` (without de-bias)
/// the difference moment is set to `g_1 - g_0` directly rather than through
/// its recurrence.
pub fn adan_step(
    s: &mut AdanState,
    g: &ParamVector,
    h: &HyperParams,
) -> Result<StepReport, OptimError> {
    assert_eq!(s.theta.dim(), g.dim(), "dimension mismatch");
    if !g.is_finite() {
        return Err(OptimError::NonFinite { step: s.k });
    }
    let mut clipped = false;
    let g = match h.clip {
        Some(c) => {
            clipped = g.dot(g) > c * c;
            global_norm_clip(g, c)
        }
        None => g.clone(),
    };
    let k = s.k;
    let n_prev = s.n.clone();

    if h.debias {
        let diff = g.sub(&s.g_prev);
        s.m = s.m.scale(1.0 - h.beta1).add_scaled(&g, h.beta1);
        s.v = s.v.scale(1.0 - h.beta2).add_scaled(&diff, h.beta2);
        let composite = g.add_scaled(&diff, 1.0 - h.beta2);
        s.n =
            s.n.scale(1.0 - h.beta3)
                .add_scaled(&composite.square(), h.beta3);
    } else if k == 0 {
        s.m = g.clone();
        s.v = ParamVector::zeros(g.dim());
        s.n = g.square();
    } else {
        let diff = g.sub(&s.g_prev);
        s.m = s.m.scale(1.0 - h.beta1).add_scaled(&g, h.beta1);
        s.v = if k == 1 {
            diff.clone()
        } else {
            s.v.scale(1.0 - h.beta2).add_scaled(&diff, h.beta2)
        };
        let composite = g.add_scaled(&diff, 1.0 - h.beta2);
        s.n =
            s.n.scale(1.0 - h.beta3)
                .add_scaled(&composite.square(), h.beta3);
    }

    // De-bias factors use the 1-based step count. A zero β leaves its moment
    // at zero forever, so the factor degenerates to 1 there.
    let bias = |beta: f64, t: i32| {
        let f = 1.0 - (1.0 - beta).powi(t);
        if f > 0.0 {
            f
        } else {
            1.0
        }
    };
    let t = (k + 1) as i32;
    let (m_eff, v_eff) = if h.debias {
        (
            s.m.scale(1.0 / bias(h.beta1, t)),
            s.v.scale(1.0 / bias(h.beta2, t)),
        )
    } else {
        (s.m.clone(), s.v.clone())
    };
    // Shifted mode steps with the previous second moment (independent of the
    // current draw); at k = 0 there is no previous moment and n_0 is used.
    let (n_hat, n_power) = if h.shifted_n && k >= 1 {
        (n_prev, k as i32)
    } else {
        (s.n.clone(), t)
    };
    let n_eff = if h.debias {
        n_hat.scale(1.0 / bias(h.beta3, n_power))
    } else {
        n_hat.clone()
    };

    let eta_vec = ParamVector::filled(g.dim(), h.eta).div_sqrt_guarded(&n_eff, h.eps);
    let composite = m_eff.add_scaled(&v_eff, 1.0 - h.beta2);
    let lambda_k = h.lambda_at(k);
    let theta_next = prox_decay_update(&s.theta, &composite, &n_eff, h.eta, h.eps, lambda_k);
    if !theta_next.is_finite() {
        return Err(OptimError::NonFinite { step: k });
    }
    let y_next = extrapolation_point(&theta_next, &eta_vec, &m_eff, &v_eff, &g, h.beta1, h.beta2);
    let motion = y_next.sub(&s.y_prev);
    s.restart_acc += weighted_sq_norm(&motion, &n_hat, h.eps)
        .expect("second moment is non-negative by construction");

    s.theta = theta_next;
    s.y_prev = y_next;
    s.g_prev = g;
    s.last_eta = eta_vec;
    s.k = k + 1;
    Ok(StepReport { clipped })
}

/// Restart condition `(k+1)·Σ_{t≤k} ‖y_{t+1}-y_t‖²_{√n_t} > R²` (strict).
///
/// `s.k` already counts the step that produced the latest `y`, so it equals
/// the `k+1` factor directly.
pub fn restart_check(s: &AdanState, r: f64) -> bool {
    s.k as f64 * s.restart_acc > r * r
}

/// Restart: reinitialize all moments at the current θ from a fresh gradient,
/// clear the motion accumulator, and immediately take the first update so the
/// state resumes at `k = 1`.
pub fn adan_restart(
    s: &mut AdanState,
    h: &HyperParams,
    g0_new: &ParamVector,
) -> Result<StepReport, OptimError> {
    *s = adan_init(s.theta.clone(), g0_new, h);
    adan_step(s, g0_new, h)
}
