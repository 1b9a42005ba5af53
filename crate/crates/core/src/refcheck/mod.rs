//! Independent oracles recomputing the optimizer's closed forms, used to
//! cross-check the recurrences in `optim` without sharing code paths.
//!
//! The first-moment recurrence has the closed form `m_k = Σ_t c_{k,t} g_t`
//! with `c_{k,t} = β(1-β)^{k-t}` for `t > 0` and `c_{k,0} = (1-β)^k`; the
//! coefficients sum to one. The decoupled gradient/difference pair has the
//! analogous two-stream sum. Because the difference moment is seeded directly
//! with `g_1 - g_0` at the second step, the `t = 0` slot of the difference
//! stream carries `g_1 - g_0` as well (the seed splits as
//! `(1-β)^{k-1} = c'_{k,1} + c'_{k,0}` across the two earliest slots).

pub mod invariants;

use crate::optim::HyperParams;
use crate::vecmath::ParamVector;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RefcheckError {
    #[error("gradient tape is empty")]
    EmptyTape,
    #[error("beta out of range: {0}")]
    BadBeta(f64),
    #[error("unsupported setting: {0}")]
    BadSetting(String),
}

/// Immutable record of the stochastic gradients `g_0 … g_k` of a run.
#[derive(Debug, Clone)]
pub struct GradientTape {
    grads: Vec<ParamVector>,
}

impl GradientTape {
    pub fn new(grads: Vec<ParamVector>) -> Result<Self, RefcheckError> {
        if grads.is_empty() {
            return Err(RefcheckError::EmptyTape);
        }
        let dim = grads[0].dim();
        assert!(
            grads.iter().all(|g| g.dim() == dim),
            "dimension mismatch in tape"
        );
        Ok(Self { grads })
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty() // construction rejects empty tapes
    }

    pub fn dim(&self) -> usize {
        self.grads[0].dim()
    }

    pub fn grad(&self, t: usize) -> &ParamVector {
        &self.grads[t]
    }
}

fn check_beta(beta: f64) -> Result<(), RefcheckError> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(RefcheckError::BadBeta(beta))
    }
}

/// Moving-average coefficients `c_{k,t}` for `t = 0..=k`; they sum to one.
pub fn moment_coefficients(k: usize, beta: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(k + 1);
    c.push((1.0 - beta).powi(k as i32));
    for t in 1..=k {
        c.push(beta * (1.0 - beta).powi((k - t) as i32));
    }
    c
}

/// Accumulate `Σ w_i·v_i` visiting terms in descending weight order.
fn weighted_sum(terms: &mut [(f64, ParamVector)], dim: usize) -> ParamVector {
    terms.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut acc = ParamVector::zeros(dim);
    for (w, v) in terms.iter() {
        acc = acc.add_scaled(v, *w);
    }
    acc
}

/// Closed form of the plain first-moment average at the end of the tape:
/// `m_k = Σ_t c_{k,t} g_t`.
pub fn moment_closed_form(tape: &GradientTape, beta1: f64) -> Result<ParamVector, RefcheckError> {
    check_beta(beta1)?;
    let k = tape.len() - 1;
    let c = moment_coefficients(k, beta1);
    let mut terms: Vec<(f64, ParamVector)> = c
        .iter()
        .enumerate()
        .map(|(t, &w)| (w, tape.grad(t).clone()))
        .collect();
    Ok(weighted_sum(&mut terms, tape.dim()))
}

/// Closed form of the decoupled composite `m_k + (1-β2) v_k`, including the
/// direct `v_1 = g_1 - g_0` seed for the difference stream.
pub fn combined_closed_form(
    tape: &GradientTape,
    beta1: f64,
    beta2: f64,
) -> Result<ParamVector, RefcheckError> {
    check_beta(beta1)?;
    check_beta(beta2)?;
    let k = tape.len() - 1;
    if k == 0 {
        return Ok(tape.grad(0).clone());
    }
    let c = moment_coefficients(k, beta1);
    let cp = moment_coefficients(k, beta2);
    let mut terms: Vec<(f64, ParamVector)> = Vec::with_capacity(2 * k + 2);
    for (t, &w) in c.iter().enumerate() {
        terms.push((w, tape.grad(t).clone()));
    }
    for (t, &w) in cp.iter().enumerate().skip(1) {
        let diff = tape.grad(t).sub(tape.grad(t - 1));
        terms.push(((1.0 - beta2) * w, diff));
    }
    // The t = 0 slot of the difference stream carries the v_1 seed.
    let seed = tape.grad(1).sub(tape.grad(0));
    terms.push(((1.0 - beta2) * cp[0], seed));
    Ok(weighted_sum(&mut terms, tape.dim()))
}

/// Closed form of the single-average composite moment
/// `Σ_t c_{k,t}·[g_t + (1-β)(g_t - g_{t-1})]`, i.e. the undecoupled variant;
/// with β1 = β2 it coincides with [`combined_closed_form`]. The `t = 0`
/// difference slot follows the same `g_1 - g_0` seeding convention.
pub fn vanilla_composite_closed_form(
    tape: &GradientTape,
    beta: f64,
) -> Result<ParamVector, RefcheckError> {
    check_beta(beta)?;
    let k = tape.len() - 1;
    if k == 0 {
        return Ok(tape.grad(0).clone());
    }
    let c = moment_coefficients(k, beta);
    let mut terms: Vec<(f64, ParamVector)> = Vec::with_capacity(k + 1);
    for (t, &w) in c.iter().enumerate() {
        let diff = if t == 0 {
            tape.grad(1).sub(tape.grad(0))
        } else {
            tape.grad(t).sub(tape.grad(t - 1))
        };
        terms.push((w, tape.grad(t).add_scaled(&diff, 1.0 - beta)));
    }
    Ok(weighted_sum(&mut terms, tape.dim()))
}

/// Numeric argmin of the proximal surrogate
/// `λ_k/2·‖θ'‖²_{√n} + ⟨m̄, θ'-θ⟩ + ‖θ'-θ‖²_{√n}/(2η)`, solved per coordinate
/// by bisecting the sign change of the derivative. Bisection on the
/// first-order condition localizes the optimum to full precision, which a
/// value-comparison search cannot (the surrogate is flat to O(δ²) there).
pub fn prox_argmin_oracle(
    theta: &ParamVector,
    m_bar: &ParamVector,
    n: &ParamVector,
    eta: f64,
    eps: f64,
    lambda_k: f64,
) -> ParamVector {
    let dim = theta.dim();
    let mut out = vec![0.0; dim];
    for i in 0..dim {
        let a = n[i].sqrt() + eps; // weight of the √n-norm on this coordinate
        let deriv = |x: f64| lambda_k * a * x + m_bar[i] + a / eta * (x - theta[i]);
        // Bracket the root around θ_i.
        let mut width = eta * (m_bar[i].abs() + 1.0) / a + theta[i].abs() + 1.0;
        let (mut lo, mut hi) = (theta[i] - width, theta[i] + width);
        while deriv(lo) > 0.0 || deriv(hi) < 0.0 {
            width *= 2.0;
            lo = theta[i] - width;
            hi = theta[i] + width;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if deriv(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out[i] = 0.5 * (lo + hi);
    }
    ParamVector::new(out)
}

/// Reference run of the x/y-reformulated update, equivalent to the
/// shifted-second-moment optimizer when β1 = β2 = β, β3 = β², λ = 0.
///
/// The second moment here is one step behind (built from the previous
/// composite gradient), matching the shifted mode on the recurrence side.
/// The first loop pass is special: because the difference moment is seeded
/// directly with `g_1 - g_0`, the composite moment collapses to `g_1` there
/// and the update is a full (not β-weighted) preconditioned gradient step.
/// From the second pass on the generic two-sequence recurrence applies.
pub fn xy_reformulation_run(
    mut grad: impl FnMut(usize, &ParamVector) -> ParamVector,
    theta0: &ParamVector,
    h: &HyperParams,
    steps: usize,
) -> Result<Vec<ParamVector>, RefcheckError> {
    let beta = h.beta1;
    if (h.beta1 - h.beta2).abs() > 1e-15 {
        return Err(RefcheckError::BadSetting("requires beta1 = beta2".into()));
    }
    if (h.beta3 - beta * beta).abs() > 1e-15 * (1.0 + beta * beta) {
        return Err(RefcheckError::BadSetting("requires beta3 = beta^2".into()));
    }
    if h.lambda != 0.0 {
        return Err(RefcheckError::BadSetting("requires lambda = 0".into()));
    }
    if h.debias || !h.shifted_n {
        return Err(RefcheckError::BadSetting(
            "requires shifted_n mode without de-bias".into(),
        ));
    }
    check_beta(beta)?;

    let dim = theta0.dim();
    let eta_of = |n: &ParamVector| ParamVector::filled(dim, h.eta).div_sqrt_guarded(n, h.eps);

    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(theta0.clone());
    if steps == 0 {
        return Ok(traj);
    }

    let g0 = grad(0, theta0);
    let mut n = g0.square();
    let mut eta_prev = eta_of(&n);
    let mut x = theta0.sub(&eta_prev.mul(&g0));
    let mut y_prev = x.clone();
    let mut mhat_prev = g0.clone();
    let mut comp_prev = g0.clone();
    let mut g_prev = g0;
    traj.push(x.clone());

    for k in 1..steps {
        let g = grad(k, &x);
        n = n
            .scale(1.0 - beta * beta)
            .add_scaled(&comp_prev.square(), beta * beta);
        let eta = eta_of(&n);
        let y = x.sub(&eta.mul(&g).scale(beta));
        let (x_next, mhat) = if k == 1 {
            // Composite moment is exactly g here, so the step is the full
            // preconditioned gradient: x2 = x1 - η1∘g1.
            (x.sub(&eta.mul(&g)), g.clone())
        } else {
            let carry = mhat_prev.add_scaled(&g_prev, -beta);
            let correction = y.sub(&y_prev).add(&eta_prev.sub(&eta).mul(&carry));
            let x_next = y.add(&correction.scale(1.0 - beta));
            let g_corr = g.add_scaled(&g.sub(&g_prev), 1.0 - beta);
            (
                x_next,
                mhat_prev.scale(1.0 - beta).add_scaled(&g_corr, beta),
            )
        };
        comp_prev = g.add_scaled(&g.sub(&g_prev), 1.0 - beta);
        mhat_prev = mhat;
        g_prev = g;
        eta_prev = eta;
        y_prev = y;
        x = x_next;
        traj.push(x.clone());
    }
    Ok(traj)
}
