//! Baseline optimizers: heavy-ball, Nesterov AGD (extrapolation form), its
//! gradient-difference reformulation AGD-II, and the Adam family.
//!
//! Heavy-ball and AGD accumulate the *unscaled* gradient
//! (`m_k = (1-β1) m_{k-1} + g_k`, no β1 factor on the new term); the Adam
//! family weights it by β1 as usual.

use super::{HyperParams, OptimError};
use crate::optim::StepReport;
use crate::vecmath::{global_norm_clip, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Hba,
    Agd,
    Agd2,
    RmsProp,
    Adam,
    AdamW,
    Nadam,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Hba => "hba",
            BaselineKind::Agd => "agd",
            BaselineKind::Agd2 => "agd2",
            BaselineKind::RmsProp => "rmsprop",
            BaselineKind::Adam => "adam",
            BaselineKind::AdamW => "adamw",
            BaselineKind::Nadam => "nadam",
        }
    }
}

/// State shared by every baseline; unused fields stay at zero.
///
/// Momentum methods start from `m_{-1} = 0` (and AGD-II additionally from
/// `g_{-1} = 0`, which makes its mapping onto AGD exact from the very first
/// step). Without de-bias the Adam family seeds `m_0 = g_0`, `n_0 = g_0²` on
/// its first step, mirroring the Adan convention.
#[derive(Debug, Clone)]
pub struct BaselineState {
    pub kind: BaselineKind,
    pub theta: ParamVector,
    pub m: ParamVector,
    pub n: ParamVector,
    pub g_prev: ParamVector,
    pub k: u64,
}

pub fn baseline_init(kind: BaselineKind, theta0: ParamVector) -> BaselineState {
    let dim = theta0.dim();
    BaselineState {
        kind,
        theta: theta0,
        m: ParamVector::zeros(dim),
        n: ParamVector::zeros(dim),
        g_prev: ParamVector::zeros(dim),
        k: 0,
    }
}

/// Heavy-ball step: gradient at the current iterate.
pub fn hba_step(
    s: &mut BaselineState,
    grad_at: &mut dyn FnMut(&ParamVector) -> ParamVector,
    h: &HyperParams,
) -> Result<(), OptimError> {
    expect_kind(s, BaselineKind::Hba)?;
    let g = grad_at(&s.theta);
    s.m = s.m.scale(1.0 - h.beta1).add(&g);
    s.theta = s.theta.add_scaled(&s.m, -h.eta);
    finite_or_fault(s)?;
    s.k += 1;
    Ok(())
}

/// Nesterov AGD step: gradient at the extrapolation point
/// `θ_k - η(1-β1) m_{k-1}`.
pub fn agd_step(
    s: &mut BaselineState,
    grad_at: &mut dyn FnMut(&ParamVector) -> ParamVector,
    h: &HyperParams,
) -> Result<(), OptimError> {
    expect_kind(s, BaselineKind::Agd)?;
    let probe = s.theta.add_scaled(&s.m, -h.eta * (1.0 - h.beta1));
    let g = grad_at(&probe);
    s.m = s.m.scale(1.0 - h.beta1).add(&g);
    s.theta = s.theta.add_scaled(&s.m, -h.eta);
    finite_or_fault(s)?;
    s.k += 1;
    Ok(())
}

/// AGD-II step: the extrapolation is replaced by the gradient-difference
/// correction `g' = g + (1-β1)(g - g_prev)`, evaluated at the current iterate.
pub fn agd2_step(
    s: &mut BaselineState,
    g: &ParamVector,
    h: &HyperParams,
) -> Result<(), OptimError> {
    expect_kind(s, BaselineKind::Agd2)?;
    let g_corr = g.add_scaled(&g.sub(&s.g_prev), 1.0 - h.beta1);
    s.m = s.m.scale(1.0 - h.beta1).add(&g_corr);
    s.theta = s.theta.add_scaled(&s.m, -h.eta);
    s.g_prev = g.clone();
    finite_or_fault(s)?;
    s.k += 1;
    Ok(())
}

/// One step of RMSProp / Adam / AdamW / NAdam.
pub fn adam_family_step(
    s: &mut BaselineState,
    g: &ParamVector,
    h: &HyperParams,
) -> Result<StepReport, OptimError> {
    match s.kind {
        BaselineKind::RmsProp | BaselineKind::Adam | BaselineKind::AdamW | BaselineKind::Nadam => {}
        other => {
            return Err(OptimError::KindMismatch {
                expected: "rmsprop|adam|adamw|nadam",
                got: other.name().to_string(),
            })
        }
    }
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
    let first = k == 0 && !h.debias;

    if first {
        s.n = g.square();
    } else {
        s.n = s.n.scale(1.0 - h.beta2).add_scaled(&g.square(), h.beta2);
    }
    let uses_m = s.kind != BaselineKind::RmsProp;
    if uses_m {
        if first {
            s.m = g.clone();
        } else {
            s.m = s.m.scale(1.0 - h.beta1).add_scaled(&g, h.beta1);
        }
    }

    let bias = |beta: f64, t: i32| {
        let f = 1.0 - (1.0 - beta).powi(t);
        if f > 0.0 {
            f
        } else {
            1.0
        }
    };
    let t = (k + 1) as i32;
    let n_eff = if h.debias {
        s.n.scale(1.0 / bias(h.beta2, t))
    } else {
        s.n.clone()
    };
    let direction = match s.kind {
        BaselineKind::RmsProp => g.clone(),
        BaselineKind::Adam | BaselineKind::AdamW => {
            if h.debias {
                s.m.scale(1.0 / bias(h.beta1, t))
            } else {
                s.m.clone()
            }
        }
        BaselineKind::Nadam => {
            // Nesterov lookahead on the first moment with a constant decay:
            // blend the bias-corrected momentum one step ahead with the
            // current gradient.
            if h.debias {
                s.m.scale((1.0 - h.beta1) / bias(h.beta1, t + 1))
                    .add_scaled(&g, h.beta1 / bias(h.beta1, t))
            } else {
                s.m.scale(1.0 - h.beta1).add_scaled(&g, h.beta1)
            }
        }
        _ => unreachable!(),
    };
    let step = direction.div_sqrt_guarded(&n_eff, h.eps).scale(h.eta);
    let lambda_k = h.lambda_at(k);
    s.theta = match s.kind {
        BaselineKind::AdamW => s.theta.scale(1.0 - lambda_k * h.eta).sub(&step),
        _ => s.theta.sub(&step),
    };
    s.g_prev = g;
    finite_or_fault(s)?;
    s.k = k + 1;
    Ok(StepReport { clipped })
}

fn expect_kind(s: &BaselineState, want: BaselineKind) -> Result<(), OptimError> {
    if s.kind == want {
        Ok(())
    } else {
        Err(OptimError::KindMismatch {
            expected: want.name(),
            got: s.kind.name().to_string(),
        })
    }
}

fn finite_or_fault(s: &BaselineState) -> Result<(), OptimError> {
    if s.theta.is_finite() && s.m.is_finite() && s.n.is_finite() {
        Ok(())
    } else {
        Err(OptimError::NonFinite { step: s.k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(beta1: f64, eta: f64) -> HyperParams {
        HyperParams {
            beta1,
            beta2: beta1,
            eta,
            eps: 0.0,
            ..HyperParams::default()
        }
    }

    fn quad_grad() -> impl FnMut(&ParamVector) -> ParamVector {
        |p: &ParamVector| p.clone() // ∇(½θ²) = θ
    }

    #[test]
    fn hba_hand_trace() {
        let h = hyper(0.5, 0.1);
        let mut s = baseline_init(BaselineKind::Hba, ParamVector::scalar(1.0));
        let mut grad = quad_grad();
        hba_step(&mut s, &mut grad, &h).unwrap();
        assert!((s.m[0] - 1.0).abs() < 1e-15);
        assert!((s.theta[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn agd_hand_trace() {
        let h = hyper(0.5, 0.1);
        let mut s = baseline_init(BaselineKind::Agd, ParamVector::scalar(1.0));
        let mut grad = quad_grad();
        agd_step(&mut s, &mut grad, &h).unwrap();
        assert!((s.theta[0] - 0.9).abs() < 1e-15);
        agd_step(&mut s, &mut grad, &h).unwrap();
        // g1 = ∇f(0.9 - 0.05·1) = 0.85, m1 = 0.5 + 0.85 = 1.35, θ2 = 0.765.
        assert!((s.m[0] - 1.35).abs() < 1e-15);
        assert!((s.theta[0] - 0.765).abs() < 1e-15);
    }

    #[test]
    fn stationary_start_stays_put() {
        let h = hyper(0.5, 0.1);
        for kind in [BaselineKind::Hba, BaselineKind::Agd] {
            let mut s = baseline_init(kind, ParamVector::scalar(0.0));
            let mut grad = quad_grad();
            for _ in 0..10 {
                match kind {
                    BaselineKind::Hba => hba_step(&mut s, &mut grad, &h).unwrap(),
                    _ => agd_step(&mut s, &mut grad, &h).unwrap(),
                }
                assert_eq!(s.theta[0], 0.0);
            }
        }
    }

    #[test]
    fn agd2_hand_trace_and_mapping() {
        let h = hyper(0.5, 0.1);
        let mut s = baseline_init(BaselineKind::Agd2, ParamVector::scalar(1.0));
        // Step 0: g'0 = (1+α)·1 = 1.5 with g_{-1} = 0.
        agd2_step(&mut s, &ParamVector::scalar(1.0), &h).unwrap();
        assert!((s.m[0] - 1.5).abs() < 1e-15);
        assert!((s.theta[0] - 0.85).abs() < 1e-15);
        // Step 1 at x1 = 0.85: g'1 = 0.85 + 0.5(0.85-1) = 0.775.
        agd2_step(&mut s, &ParamVector::scalar(0.85), &h).unwrap();
        assert!((s.m[0] - 1.525).abs() < 1e-15);
        assert!((s.theta[0] - 0.6975).abs() < 1e-15);

        // Mapping check against the AGD trace: θ̄2 - η(1-β1) m̄1 = x2.
        let mut agd = baseline_init(BaselineKind::Agd, ParamVector::scalar(1.0));
        let mut grad = quad_grad();
        agd_step(&mut agd, &mut grad, &h).unwrap();
        agd_step(&mut agd, &mut grad, &h).unwrap();
        let mapped = agd.theta[0] - 0.1 * 0.5 * agd.m[0];
        assert!((mapped - s.theta[0]).abs() < 1e-15);
    }

    #[test]
    fn adam_family_step_zero_values() {
        // θ0=1, g0=1, β1=β=0.5, η=0.1, ε=0, m0=g0, n0=g0².
        let h = hyper(0.5, 0.1);
        for (kind, expected) in [(BaselineKind::Adam, 0.9), (BaselineKind::RmsProp, 0.9)] {
            let mut s = baseline_init(kind, ParamVector::scalar(1.0));
            adam_family_step(&mut s, &ParamVector::scalar(1.0), &h).unwrap();
            assert!((s.theta[0] - expected).abs() < 1e-15, "{}", kind.name());
        }

        let hw = HyperParams {
            lambda: 0.1,
            ..hyper(0.5, 0.1)
        };
        let mut s = baseline_init(BaselineKind::AdamW, ParamVector::scalar(1.0));
        adam_family_step(&mut s, &ParamVector::scalar(1.0), &hw).unwrap();
        assert!((s.theta[0] - 0.89).abs() < 1e-15);
    }

    #[test]
    fn adam_debias_first_step_is_raw_gradient_direction() {
        let h = HyperParams {
            debias: true,
            eps: 1e-12,
            ..hyper(0.5, 0.1)
        };
        let mut s = baseline_init(BaselineKind::Adam, ParamVector::scalar(1.0));
        adam_family_step(&mut s, &ParamVector::scalar(0.4), &h).unwrap();
        // m̂ = β1 g/β1 = g, n̂ = g², so θ1 = 1 - η·g/(|g|+ε).
        let expected = 1.0 - 0.1 * 0.4 / (0.4 + 1e-12);
        assert!((s.theta[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn wrong_kind_is_usage_error() {
        let h = hyper(0.5, 0.1);
        let mut s = baseline_init(BaselineKind::Hba, ParamVector::scalar(1.0));
        let err = adam_family_step(&mut s, &ParamVector::scalar(1.0), &h).unwrap_err();
        assert!(matches!(err, OptimError::KindMismatch { .. }));
        let mut s2 = baseline_init(BaselineKind::Adam, ParamVector::scalar(1.0));
        let mut grad = quad_grad();
        assert!(hba_step(&mut s2, &mut grad, &h).is_err());
    }

    #[test]
    fn nadam_converges_on_scalar_quadratic() {
        let h = HyperParams {
            debias: true,
            eps: 1e-8,
            ..hyper(0.1, 0.05)
        };
        let mut s = baseline_init(BaselineKind::Nadam, ParamVector::scalar(2.0));
        for _ in 0..500 {
            let g = s.theta.clone();
            adam_family_step(&mut s, &g, &h).unwrap();
        }
        assert!(s.theta[0].abs() < 1e-2, "nadam end point {}", s.theta[0]);
    }
}
