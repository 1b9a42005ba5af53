//! Per-step invariants of the moment recurrences, checked against recorded
//! run histories.
//!
//! Both bounds are consequences of the moments being convex combinations:
//! the first moment can never exceed the largest gradient seen so far, the
//! second moment never exceeds the squared largest composite gradient, and
//! the per-coordinate step-size ratio moves by at most `√2·β3·G/ε` per step
//! where `G` bounds the composite gradients.

use crate::vecmath::ParamVector;

/// Per-step history of an optimizer run, recorded by the harness tracer.
#[derive(Debug, Default)]
pub struct MomentTrace {
    /// Gradients as consumed by the optimizer (after clipping, if any).
    pub grads: Vec<ParamVector>,
    /// Composite gradients `g_k + (1-β2)(g_k - g_{k-1})` (`g_0` at the start).
    pub composites: Vec<ParamVector>,
    /// Raw first moment after each step.
    pub m: Vec<ParamVector>,
    /// Raw second moment after each step.
    pub n: Vec<ParamVector>,
    /// Per-coordinate step size used at each step.
    pub eta: Vec<ParamVector>,
}

/// `‖m_k‖∞ ≤ max_{t≤k}‖g_t‖∞` and `‖n_k‖∞ ≤ (max_{t≤k}‖g'_t‖∞)²`, exactly up
/// to accumulation roundoff.
pub fn check_moment_bounds(trace: &MomentTrace) -> Result<(), String> {
    let slack = 1.0 + 1e-14;
    let mut max_g = 0.0f64;
    let mut max_comp = 0.0f64;
    for k in 0..trace.m.len() {
        max_g = max_g.max(trace.grads[k].norm_linf());
        max_comp = max_comp.max(trace.composites[k].norm_linf());
        let m_inf = trace.m[k].norm_linf();
        if m_inf > max_g * slack {
            return Err(format!(
                "step {k}: ‖m‖∞ = {m_inf} exceeds max ‖g‖∞ = {max_g}"
            ));
        }
        let n_inf = trace.n[k].norm_linf();
        if n_inf > max_comp * max_comp * slack {
            return Err(format!(
                "step {k}: ‖n‖∞ = {n_inf} exceeds max composite² = {}",
                max_comp * max_comp
            ));
        }
    }
    Ok(())
}

/// `max_i |(η_k - η_{k-1})/η_{k-1}|_i ≤ √2·β3·G_k/ε` with `G_k` the running
/// composite-gradient bound.
pub fn check_eta_ratio(trace: &MomentTrace, beta3: f64, eps: f64) -> Result<(), String> {
    let slack = 1.0 + 1e-12;
    let mut max_comp = trace.composites.first().map_or(0.0, ParamVector::norm_linf);
    for k in 1..trace.eta.len() {
        max_comp = max_comp.max(trace.composites[k].norm_linf());
        let bound = std::f64::consts::SQRT_2 * beta3 * max_comp / eps;
        let prev = &trace.eta[k - 1];
        let cur = &trace.eta[k];
        for i in 0..prev.dim() {
            let ratio = ((cur[i] - prev[i]) / prev[i]).abs();
            if ratio > bound * slack {
                return Err(format!(
                    "step {k} coord {i}: step-size ratio {ratio} exceeds bound {bound}"
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_violated_moment_bound() {
        let trace = MomentTrace {
            grads: vec![ParamVector::scalar(1.0)],
            composites: vec![ParamVector::scalar(1.0)],
            m: vec![ParamVector::scalar(1.5)], // impossible for a convex average
            n: vec![ParamVector::scalar(0.5)],
            eta: vec![ParamVector::scalar(0.1)],
        };
        assert!(check_moment_bounds(&trace).is_err());
    }

    #[test]
    fn accepts_valid_trace() {
        let trace = MomentTrace {
            grads: vec![ParamVector::scalar(1.0), ParamVector::scalar(0.5)],
            composites: vec![ParamVector::scalar(1.0), ParamVector::scalar(0.4)],
            m: vec![ParamVector::scalar(1.0), ParamVector::scalar(0.9)],
            n: vec![ParamVector::scalar(1.0), ParamVector::scalar(0.9)],
            eta: vec![ParamVector::scalar(0.1), ParamVector::scalar(0.100001)],
        };
        assert!(check_moment_bounds(&trace).is_ok());
        // Tiny η motion, large bound: passes.
        assert!(check_eta_ratio(&trace, 0.1, 0.1).is_ok());
    }

    #[test]
    fn detects_eta_jump() {
        let trace = MomentTrace {
            grads: vec![ParamVector::scalar(1.0), ParamVector::scalar(1.0)],
            composites: vec![ParamVector::scalar(1.0), ParamVector::scalar(1.0)],
            m: vec![ParamVector::scalar(1.0), ParamVector::scalar(1.0)],
            n: vec![ParamVector::scalar(1.0), ParamVector::scalar(1.0)],
            eta: vec![ParamVector::scalar(0.1), ParamVector::scalar(0.2)],
        };
        // Ratio 1.0 against bound √2·0.01·1/1 ≈ 0.014.
        assert!(check_eta_ratio(&trace, 0.01, 1.0).is_err());
    }
}
