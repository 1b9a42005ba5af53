//! Named verification checks: every closed form, equivalence, and proposition
//! the optimizers are supposed to satisfy, runnable as `adan verify`.
//!
//! Each check recomputes one algebraic claim through an independent oracle
//! from `refcheck` and compares against the live recurrences in `optim`.
//! The `ADAN_FAULT_INJECT` environment variable lets the test harness break a
//! recurrence on purpose to confirm the corresponding check catches it.

use crate::harness::{run_adan_traced, RunConfig};
use crate::optim::{
    adan_init, adan_step, agd2_step, agd_step, baseline_init, prox_decay_update, restart_check,
    BaselineKind, HyperParams,
};
use crate::problems::{NoiseModel, Problem};
use crate::refcheck::invariants::{check_eta_ratio, check_moment_bounds, MomentTrace};
use crate::refcheck::{
    combined_closed_form, moment_closed_form, moment_coefficients, prox_argmin_oracle,
    vanilla_composite_closed_form, xy_reformulation_run, GradientTape,
};
use crate::rng::SplitMix64;
use crate::vecmath::ParamVector;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn check(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

fn fault_injected(which: &str) -> bool {
    std::env::var("ADAN_FAULT_INJECT").is_ok_and(|v| v == which)
}

fn random_vec(rng: &mut SplitMix64, dim: usize, lo: f64, hi: f64) -> ParamVector {
    ParamVector::new((0..dim).map(|_| rng.uniform(lo, hi)).collect())
}

fn random_tape(rng: &mut SplitMix64, dim: usize, len: usize) -> Vec<ParamVector> {
    (0..len).map(|_| random_vec(rng, dim, -1.0, 1.0)).collect()
}

/// Max ∞-deviation between the AGD-II trajectory and the mapped AGD
/// trajectory `θ̄_k - η(1-β1) m̄_{k-1}` over a deterministic quadratic.
pub fn agd_equivalence_deviation(dim: usize, steps: usize, beta1: f64, eta: f64) -> f64 {
    let problem = Problem::quadratic_conditioned(dim, 4.0);
    let theta0 = ParamVector::filled(dim, 2.0);
    let h = HyperParams {
        beta1,
        eta,
        ..HyperParams::default()
    };

    let mut agd = baseline_init(BaselineKind::Agd, theta0.clone());
    let mut agd2 = baseline_init(BaselineKind::Agd2, theta0);
    let mut grad_exact = |p: &ParamVector| problem.raw_loss_grad(p).1;

    let mut max_dev = 0.0f64;
    for _ in 0..steps {
        let mapped = agd.theta.add_scaled(&agd.m, -eta * (1.0 - beta1));
        max_dev = max_dev.max(mapped.sub(&agd2.theta).norm_linf());
        let g = grad_exact(&agd2.theta);
        agd2_step(&mut agd2, &g, &h).unwrap();
        agd_step(&mut agd, &mut grad_exact, &h).unwrap();
    }
    let mapped = agd.theta.add_scaled(&agd.m, -eta * (1.0 - beta1));
    max_dev.max(mapped.sub(&agd2.theta).norm_linf())
}

fn check_agd_equivalence() -> CheckOutcome {
    let mut worst = 0.0f64;
    for beta1 in [0.1, 0.5] {
        worst = worst.max(agd_equivalence_deviation(10, 200, beta1, 0.1));
    }
    CheckOutcome::check(
        "agd-equivalence",
        worst <= 1e-9,
        format!("AGD vs AGD-II mapped trajectories, max ∞-dev {worst:.2e} (tol 1e-9)"),
    )
}

/// Drive the optimizer recurrences over a tape and report the worst relative
/// deviation from the closed-form oracles at every prefix:
/// (first moment, decoupled composite).
pub fn closed_form_deviation(
    grads: &[ParamVector],
    beta1: f64,
    beta2: f64,
    swap_beta_fault: bool,
) -> (f64, f64) {
    let dim = grads[0].dim();
    let h = HyperParams {
        beta1,
        beta2,
        beta3: 0.05,
        ..HyperParams::default()
    };
    let mut s = adan_init(ParamVector::zeros(dim), &grads[0], &h);
    let mut fault_m = grads[0].clone();
    let (mut dev_m, mut dev_u) = (0.0f64, 0.0f64);
    for k in 0..grads.len() {
        adan_step(&mut s, &grads[k], &h).unwrap();
        if k > 0 {
            // The deliberately broken recurrence weights old/new the wrong
            // way round; only used under fault injection.
            fault_m = fault_m.scale(beta1).add_scaled(&grads[k], 1.0 - beta1);
        }
        let tape = GradientTape::new(grads[..=k].to_vec()).unwrap();
        let m_oracle = moment_closed_form(&tape, beta1).unwrap();
        let m_live = if swap_beta_fault { &fault_m } else { &s.m };
        let scale_m = 1.0 + m_oracle.norm_linf().max(m_live.norm_linf());
        dev_m = dev_m.max(m_live.sub(&m_oracle).norm_linf() / scale_m);

        let u_oracle = combined_closed_form(&tape, beta1, beta2).unwrap();
        let u_live = s.m.add_scaled(&s.v, 1.0 - beta2);
        let scale_u = 1.0 + u_oracle.norm_linf().max(u_live.norm_linf());
        dev_u = dev_u.max(u_live.sub(&u_oracle).norm_linf() / scale_u);
    }
    (dev_m, dev_u)
}

fn check_moment_closed_form() -> CheckOutcome {
    let fault = fault_injected("moment-beta-sign");
    let mut rng = SplitMix64::new(1001);
    let grads = random_tape(&mut rng, 5, 100);
    let mut worst = 0.0f64;
    for beta1 in [0.02, 0.08, 0.5] {
        let (dev_m, _) = closed_form_deviation(&grads, beta1, 0.1, fault);
        worst = worst.max(dev_m);
    }
    CheckOutcome::check(
        "moment-closed-form",
        worst <= 1e-12,
        format!("first-moment recurrence vs closed-form sum, max rel dev {worst:.2e} (tol 1e-12)"),
    )
}

fn check_decoupled_closed_form() -> CheckOutcome {
    let mut rng = SplitMix64::new(1002);
    let grads = random_tape(&mut rng, 5, 100);
    let mut worst = 0.0f64;
    for beta1 in [0.02, 0.08, 0.5] {
        for beta2 in [0.02, 0.08, 0.5] {
            let (_, dev_u) = closed_form_deviation(&grads, beta1, beta2, false);
            worst = worst.max(dev_u);
        }
    }
    CheckOutcome::check(
        "decoupled-closed-form",
        worst <= 1e-12,
        format!("m+(1-β2)v vs two-stream closed form, max rel dev {worst:.2e} (tol 1e-12)"),
    )
}

/// Worst relative deviation between the recurrence composite `m+(1-β)v`
/// (β1 = β2 = β) and the single-average closed form over every tape prefix.
pub fn vanilla_identity_deviation(grads: &[ParamVector], beta: f64) -> f64 {
    let dim = grads[0].dim();
    let h = HyperParams {
        beta1: beta,
        beta2: beta,
        beta3: 0.05,
        ..HyperParams::default()
    };
    let mut s = adan_init(ParamVector::zeros(dim), &grads[0], &h);
    let mut worst = 0.0f64;
    for k in 0..grads.len() {
        adan_step(&mut s, &grads[k], &h).unwrap();
        let tape = GradientTape::new(grads[..=k].to_vec()).unwrap();
        let oracle = vanilla_composite_closed_form(&tape, beta).unwrap();
        let live = s.m.add_scaled(&s.v, 1.0 - beta);
        let scale = 1.0 + oracle.norm_linf().max(live.norm_linf());
        worst = worst.max(live.sub(&oracle).norm_linf() / scale);
    }
    worst
}

fn check_composite_identity() -> CheckOutcome {
    let mut rng = SplitMix64::new(1003);
    let grads = random_tape(&mut rng, 5, 100);
    let mut worst = 0.0f64;
    for beta in [0.02, 0.08, 0.5] {
        worst = worst.max(vanilla_identity_deviation(&grads, beta));
    }
    CheckOutcome::check(
        "composite-identity",
        worst <= 1e-12,
        format!(
            "β1=β2 composite vs single-average closed form, max rel dev {worst:.2e} (tol 1e-12)"
        ),
    )
}

fn check_coeff_normalization() -> CheckOutcome {
    let mut worst = 0.0f64;
    for beta in [0.02, 0.08, 0.1, 0.5, 0.9] {
        for k in [0usize, 1, 7, 50, 199] {
            let s: f64 = moment_coefficients(k, beta).iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    CheckOutcome::check(
        "coeff-norm",
        worst <= 1e-14,
        format!("Σ c_k,t over β grid, max |Σ-1| = {worst:.2e} (tol 1e-14)"),
    )
}

/// Worst ∞-deviation between the closed-form proximal step and the numeric
/// argmin oracle over random instances.
pub fn prox_oracle_deviation(instances: usize, lambdas: &[f64], seed: u64) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let lambda = lambdas[i % lambdas.len()];
        let theta = random_vec(&mut rng, 10, -3.0, 3.0);
        let m_bar = random_vec(&mut rng, 10, -2.0, 2.0);
        let n = random_vec(&mut rng, 10, 0.0, 4.0);
        let eta = rng.uniform(0.01, 0.5);
        let closed = prox_decay_update(&theta, &m_bar, &n, eta, 1e-8, lambda);
        let numeric = prox_argmin_oracle(&theta, &m_bar, &n, eta, 1e-8, lambda);
        worst = worst.max(closed.sub(&numeric).norm_linf());
    }
    worst
}

fn check_prox_argmin() -> CheckOutcome {
    let worst = prox_oracle_deviation(50, &[0.0, 0.02, 0.1], 1004);
    CheckOutcome::check(
        "prox-argmin",
        worst <= 1e-10,
        format!("proximal closed form vs numeric argmin, max dev {worst:.2e} (tol 1e-10)"),
    )
}

/// Run the shifted-second-moment optimizer and the x/y reformulation oracle
/// side by side on the same gradient source; return the worst trajectory
/// ∞-deviation.
pub fn reformulation_max_deviation(
    mut grad: impl FnMut(usize, &ParamVector) -> ParamVector,
    theta0: &ParamVector,
    beta: f64,
    eta: f64,
    eps: f64,
    steps: usize,
) -> f64 {
    let h = HyperParams {
        beta1: beta,
        beta2: beta,
        beta3: beta * beta,
        eta,
        eps,
        shifted_n: true,
        ..HyperParams::default()
    };
    let mut adan_traj = Vec::with_capacity(steps + 1);
    adan_traj.push(theta0.clone());
    let mut state = None;
    for k in 0..steps {
        let theta = state
            .as_ref()
            .map_or(theta0, |s: &crate::optim::AdanState| &s.theta)
            .clone();
        let g = grad(k, &theta);
        let s = state.get_or_insert_with(|| adan_init(theta.clone(), &g, &h));
        adan_step(s, &g, &h).unwrap();
        adan_traj.push(s.theta.clone());
    }
    let oracle = xy_reformulation_run(grad, theta0, &h, steps).unwrap();
    adan_traj
        .iter()
        .zip(&oracle)
        .map(|(a, b)| a.sub(b).norm_linf())
        .fold(0.0, f64::max)
}

fn check_reformulation_quadratic() -> CheckOutcome {
    let problem = Problem::quadratic_conditioned(10, 50.0);
    let theta0 = ParamVector::filled(10, 1.5);
    let mut worst = 0.0f64;
    for beta in [0.1, 0.5] {
        let dev = reformulation_max_deviation(
            |_, x| problem.raw_loss_grad(x).1,
            &theta0,
            beta,
            0.05,
            1e-8,
            200,
        );
        worst = worst.max(dev);
    }
    CheckOutcome::check(
        "reform-quadratic",
        worst <= 1e-9,
        format!("shifted-n run vs x/y reformulation on a 10-d quadratic, max dev {worst:.2e} (tol 1e-9)"),
    )
}

fn check_reformulation_scalar() -> CheckOutcome {
    let mut rng = SplitMix64::new(1005);
    let tape = random_tape(&mut rng, 1, 100);
    let mut worst = 0.0f64;
    for beta in [0.1, 0.5] {
        let dev = reformulation_max_deviation(
            |k, _| tape[k].clone(),
            &ParamVector::scalar(0.0),
            beta,
            0.1,
            0.5,
            tape.len(),
        );
        worst = worst.max(dev);
    }
    CheckOutcome::check(
        "reform-scalar",
        worst <= 1e-10,
        format!("shifted-n run vs x/y reformulation on random scalar tapes, max dev {worst:.2e} (tol 1e-10)"),
    )
}

/// Traced runs for the proposition checks; shared by `verify` and the
/// acceptance suite.
pub fn proposition_traces() -> Vec<(&'static str, MomentTrace, f64, f64)> {
    let mut out = Vec::new();

    let quad = Problem::quadratic_conditioned(20, 1e3);
    let h = HyperParams {
        eta: 0.05,
        ..HyperParams::default()
    };
    let (_, trace) = run_adan_traced(&quad, quad.default_start(), &h, &NoiseModel::None, 1, 500);
    out.push(("quadratic", trace, h.beta3, h.eps));

    let rosen = Problem::rosenbrock(2);
    let h2 = HyperParams {
        eta: 0.002,
        eps: 1e-8,
        ..HyperParams::default()
    };
    let (_, trace2) = run_adan_traced(
        &rosen,
        rosen.default_start(),
        &h2,
        &NoiseModel::None,
        2,
        500,
    );
    out.push(("rosenbrock", trace2, h2.beta3, h2.eps));

    let logi = Problem::logistic(10, 200, 5, 0.05);
    let h3 = HyperParams {
        eta: 0.05,
        clip: Some(5.0),
        ..HyperParams::default()
    };
    let (_, trace3) = run_adan_traced(
        &logi,
        logi.default_start(),
        &h3,
        &NoiseModel::Gaussian { sigma: 0.2 },
        3,
        300,
    );
    out.push(("logistic-noisy", trace3, h3.beta3, h3.eps));

    out
}

fn check_moment_bound_runs() -> CheckOutcome {
    for (tag, trace, _, _) in proposition_traces() {
        if let Err(e) = check_moment_bounds(&trace) {
            return CheckOutcome::check("moment-bound", false, format!("{tag}: {e}"));
        }
    }
    CheckOutcome::pass(
        "moment-bound",
        "‖m‖∞ ≤ max‖g‖∞ and ‖n‖∞ ≤ max‖g'‖∞² on every traced run".into(),
    )
}

fn check_eta_ratio_runs() -> CheckOutcome {
    for (tag, trace, beta3, eps) in proposition_traces() {
        if let Err(e) = check_eta_ratio(&trace, beta3, eps) {
            return CheckOutcome::check("eta-ratio", false, format!("{tag}: {e}"));
        }
    }
    CheckOutcome::pass(
        "eta-ratio",
        "per-step step-size ratio within √2·β3·G/ε on every traced run".into(),
    )
}

/// Gap between the proximal `(1+λη)⁻¹` decay and the AdamW-style `(1-λη)`
/// decay for one fixed state, as a function of η.
pub fn decay_gap(
    theta: &ParamVector,
    m_bar: &ParamVector,
    n: &ParamVector,
    eta: f64,
    lambda: f64,
) -> f64 {
    let eps = 1e-8;
    let prox = prox_decay_update(theta, m_bar, n, eta, eps, lambda);
    let adamw_style = theta
        .scale(1.0 - lambda * eta)
        .sub(&m_bar.div_sqrt_guarded(n, eps).scale(eta));
    prox.sub(&adamw_style).norm_l2()
}

fn check_adamw_closeness() -> CheckOutcome {
    let mut rng = SplitMix64::new(1006);
    let theta = random_vec(&mut rng, 10, -2.0, 2.0);
    let m_bar = random_vec(&mut rng, 10, -1.0, 1.0);
    let n = random_vec(&mut rng, 10, 0.1, 2.0);
    let lambda = 0.1;
    let mut detail = String::new();
    let mut ok = true;
    for eta in [1e-1, 1e-2] {
        let ratio = decay_gap(&theta, &m_bar, &n, eta, lambda)
            / decay_gap(&theta, &m_bar, &n, eta / 2.0, lambda);
        detail.push_str(&format!("gap(η)/gap(η/2) = {ratio:.3} at η={eta}; "));
        ok &= (3.5..=4.5).contains(&ratio);
    }
    detail.push_str("expected in [3.5, 4.5]");
    CheckOutcome::check("adamw-closeness", ok, detail)
}

fn check_debias_first_step() -> CheckOutcome {
    // With de-bias on, the very first update direction is the raw gradient:
    // the bias factor cancels the β weight on the fresh moment.
    let h = HyperParams {
        beta1: 0.02,
        beta2: 0.08,
        beta3: 0.01,
        eta: 0.1,
        eps: 1e-10,
        debias: true,
        ..HyperParams::default()
    };
    let g = ParamVector::scalar(0.7);
    let mut s = adan_init(ParamVector::scalar(1.0), &g, &h);
    adan_step(&mut s, &g, &h).unwrap();
    let expected = 1.0 - 0.1 * 0.7 / (0.7 + h.eps);
    let dev = (s.theta[0] - expected).abs();

    let mut b = baseline_init(BaselineKind::Adam, ParamVector::scalar(1.0));
    crate::optim::adam_family_step(&mut b, &g, &h).unwrap();
    let dev_b = (b.theta[0] - expected).abs();
    CheckOutcome::check(
        "debias-first-step",
        dev <= 1e-14 && dev_b <= 1e-14,
        format!("first de-biased update equals η·g/(|g|+ε): dev adan {dev:.2e}, adam {dev_b:.2e}"),
    )
}

/// Smallest step index k with (k+1)·k·δ² > R², the analytic trigger point for
/// a run whose first extrapolation motion is zero and every later one has
/// weighted squared size δ².
pub fn predicted_restart_step(delta_sq: f64, r: f64) -> u64 {
    let mut k = 1u64;
    while (k + 1) as f64 * k as f64 * delta_sq <= r * r {
        k += 1;
    }
    k
}

fn check_restart_trigger() -> CheckOutcome {
    // Synthetic constant-motion accumulator: first motion zero, then δ per
    // step, weighted by √n≡0 and ε=1 so each contributes exactly δ².
    let h = HyperParams {
        eps: 1.0,
        restart_r: Some(1.0),
        ..HyperParams::default()
    };
    let r = 1.0;
    let delta = 0.25f64;
    let delta_sq = delta * delta;
    let predicted = predicted_restart_step(delta_sq, r);
    let mut s = adan_init(ParamVector::scalar(0.0), &ParamVector::scalar(0.0), &h);
    let mut fired_at = None;
    for step in 1..1000u64 {
        // After step `step`, the accumulator holds (step-1) motions of δ².
        s.k = step + 1;
        s.restart_acc = step as f64 * delta_sq;
        if restart_check(&s, r) {
            fired_at = Some(step + 1);
            break;
        }
    }
    // restart_check fires when s.k·acc > R², i.e. after the step whose index
    // k satisfies (k+1)·k·δ² > R²; s.k = k+1 at that point.
    let ok_synthetic = fired_at == Some(predicted + 1);

    // Real run: a restart-enabled configuration must log restart events, and
    // the run stays deterministic.
    let problem = Problem::quadratic_conditioned(5, 100.0);
    let hyper = HyperParams {
        eta: 0.1,
        shifted_n: true,
        restart_r: Some(0.5),
        ..HyperParams::default()
    };
    let mut cfg = RunConfig::new(problem, crate::harness::OptimizerKind::Adan, hyper);
    cfg.budget = 300;
    cfg.eval_interval = 50;
    let rec = crate::harness::run(&cfg);
    let rec2 = crate::harness::run(&cfg);
    let restarts = rec.events.iter().filter(|e| e.kind == "restart").count();
    let ok_real = restarts >= 1 && rec.events == rec2.events && !rec.diverged;

    CheckOutcome::check(
        "restart-trigger",
        ok_synthetic && ok_real,
        format!(
            "synthetic trigger at step {fired_at:?} (predicted {}), real run logged {restarts} restart(s)",
            predicted + 1
        ),
    )
}

pub fn all_checks(only: Option<&str>) -> Vec<CheckOutcome> {
    let checks: Vec<fn() -> CheckOutcome> = vec![
        check_agd_equivalence,
        check_moment_closed_form,
        check_decoupled_closed_form,
        check_composite_identity,
        check_coeff_normalization,
        check_prox_argmin,
        check_reformulation_quadratic,
        check_reformulation_scalar,
        check_moment_bound_runs,
        check_eta_ratio_runs,
        check_adamw_closeness,
        check_debias_first_step,
        check_restart_trigger,
    ];
    let names = [
        "agd-equivalence",
        "moment-closed-form",
        "decoupled-closed-form",
        "composite-identity",
        "coeff-norm",
        "prox-argmin",
        "reform-quadratic",
        "reform-scalar",
        "moment-bound",
        "eta-ratio",
        "adamw-closeness",
        "debias-first-step",
        "restart-trigger",
    ];
    checks
        .into_iter()
        .zip(names)
        .filter(|(_, name)| only.is_none_or(|f| name.contains(f)))
        .map(|(check, _)| check())
        .collect()
}
