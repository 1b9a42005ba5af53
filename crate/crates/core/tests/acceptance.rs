//! Acceptance suite: one test per headline property, each printing a
//! pass/fail line (run with `--nocapture` to see them). Tolerances and
//! budgets are frozen here; the helpers come from `cli::verify` so the same
//! computations back `adan verify`.

use adan::cli::verify::{
    agd_equivalence_deviation, closed_form_deviation, decay_gap, predicted_restart_step,
    prox_oracle_deviation, reformulation_max_deviation, vanilla_identity_deviation,
};
use adan::harness::{
    compare, iterations_to_stationarity, run, run_adan_traced, OptimizerKind, RunConfig,
};
use adan::optim::{adan_init, adan_restart, adan_step, restart_check, BaselineKind, HyperParams};
use adan::problems::{NoiseModel, Problem};
use adan::refcheck::invariants::{check_eta_ratio, check_moment_bounds};
use adan::rng::SplitMix64;
use adan::vecmath::{weighted_sq_norm, ParamVector};
use std::time::Instant;

fn report(name: &str, detail: &str) {
    println!("acceptance {name}: PASS — {detail}");
}

fn random_tape(seed: u64, dim: usize, len: usize) -> Vec<ParamVector> {
    let mut rng = SplitMix64::new(seed);
    (0..len)
        .map(|_| ParamVector::new((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()))
        .collect()
}

#[test]
fn criterion_1_agd_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for beta1 in [0.1, 0.5] {
        worst = worst.max(agd_equivalence_deviation(10, 200, beta1, 0.1));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        worst <= 1e-9,
        "AGD/AGD-II mapped deviation {worst:.2e} exceeds 1e-9"
    );
    assert!(elapsed < 1.0, "criterion 1 took {elapsed:.2}s, budget 1s");
    report(
        "1 (agd equivalence)",
        &format!("max ∞-dev {worst:.2e} ≤ 1e-9 over 200 steps, β1 ∈ {{0.1, 0.5}}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_2_closed_form_moments() {
    let grads = random_tape(42, 5, 100);
    let mut worst_m = 0.0f64;
    let mut worst_u = 0.0f64;
    for beta1 in [0.02, 0.08, 0.5] {
        for beta2 in [0.02, 0.08, 0.5] {
            let (dev_m, dev_u) = closed_form_deviation(&grads, beta1, beta2, false);
            worst_m = worst_m.max(dev_m);
            worst_u = worst_u.max(dev_u);
        }
    }
    assert!(
        worst_m <= 1e-12,
        "first-moment closed form deviates {worst_m:.2e}"
    );
    assert!(
        worst_u <= 1e-12,
        "decoupled closed form deviates {worst_u:.2e}"
    );
    report(
        "2 (closed-form moments)",
        &format!(
            "100-step tapes, β grid: m dev {worst_m:.2e}, composite dev {worst_u:.2e} ≤ 1e-12"
        ),
    );
}

#[test]
fn criterion_3_vanilla_decoupled_identity() {
    let grads = random_tape(43, 5, 100);
    let mut worst = 0.0f64;
    for beta in [0.02, 0.08, 0.5] {
        worst = worst.max(vanilla_identity_deviation(&grads, beta));
    }
    assert!(
        worst <= 1e-12,
        "vanilla composite identity deviates {worst:.2e}"
    );
    report(
        "3 (vanilla/decoupled identity)",
        &format!("m+(1-β2)v vs single-average sum over 100 steps, dev {worst:.2e} ≤ 1e-12"),
    );
}

#[test]
fn criterion_4_proximal_step() {
    let worst = prox_oracle_deviation(50, &[0.0, 0.02, 0.1], 4242);
    assert!(
        worst <= 1e-10,
        "prox closed form vs numeric argmin deviates {worst:.2e}"
    );
    report(
        "4 (proximal step)",
        &format!("50 random 10-d instances, λ ∈ {{0, 0.02, 0.1}}, dev {worst:.2e} ≤ 1e-10"),
    );
}

#[test]
fn criterion_5_adamw_closeness() {
    let mut rng = SplitMix64::new(55);
    let theta = ParamVector::new((0..10).map(|_| rng.uniform(-2.0, 2.0)).collect());
    let m_bar = ParamVector::new((0..10).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let n = ParamVector::new((0..10).map(|_| rng.uniform(0.1, 2.0)).collect());
    let mut ratios = Vec::new();
    for eta in [1e-1, 1e-2] {
        let ratio =
            decay_gap(&theta, &m_bar, &n, eta, 0.1) / decay_gap(&theta, &m_bar, &n, eta / 2.0, 0.1);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "gap(η)/gap(η/2) = {ratio} outside [3.5, 4.5] at η = {eta}"
        );
        ratios.push(format!("{ratio:.3} at η={eta}"));
    }
    report(
        "5 (adamw first-order closeness)",
        &format!(
            "halving η shrinks the decay gap by {} (expected ≈4)",
            ratios.join(", ")
        ),
    );
}

#[test]
fn criterion_6_reformulation_equivalence() {
    // 10-d deterministic quadratic, 200 steps.
    let problem = Problem::quadratic_conditioned(10, 50.0);
    let theta0 = ParamVector::filled(10, 1.5);
    let mut worst_quad = 0.0f64;
    for beta in [0.1, 0.5] {
        let dev = reformulation_max_deviation(
            |_, x| problem.raw_loss_grad(x).1,
            &theta0,
            beta,
            0.05,
            1e-8,
            200,
        );
        worst_quad = worst_quad.max(dev);
    }
    assert!(
        worst_quad <= 1e-9,
        "quadratic trajectory deviation {worst_quad:.2e}"
    );

    // 100 random-gradient scalar steps.
    let tape = random_tape(46, 1, 100);
    let mut worst_scalar = 0.0f64;
    for beta in [0.1, 0.5] {
        let dev = reformulation_max_deviation(
            |k, _| tape[k].clone(),
            &ParamVector::scalar(0.0),
            beta,
            0.1,
            0.5,
            100,
        );
        worst_scalar = worst_scalar.max(dev);
    }
    assert!(
        worst_scalar <= 1e-9,
        "scalar trajectory deviation {worst_scalar:.2e}"
    );
    report(
        "6 (shifted-n vs x/y reformulation)",
        &format!("10-d quadratic dev {worst_quad:.2e}, scalar tape dev {worst_scalar:.2e} ≤ 1e-9"),
    );
}

/// The traced runs behind criterion 7; the same configurations as the
/// convergence/comparison criteria, at trace-friendly lengths.
fn suite_traces() -> Vec<(
    &'static str,
    adan::refcheck::invariants::MomentTrace,
    f64,
    f64,
)> {
    let mut out = Vec::new();

    let quad = Problem::quadratic_conditioned(100, 1e3);
    let h = HyperParams {
        eta: 0.005,
        eps: 1.0,
        ..HyperParams::default()
    };
    let (_, t) = run_adan_traced(&quad, quad.default_start(), &h, &NoiseModel::None, 9, 3000);
    out.push(("quadratic-cond1e3", t, h.beta3, h.eps));

    let rosen = Problem::rosenbrock(2);
    let h2 = HyperParams {
        eta: 0.001,
        eps: 0.01,
        ..HyperParams::default()
    };
    let (_, t2) = run_adan_traced(
        &rosen,
        rosen.default_start(),
        &h2,
        &NoiseModel::None,
        10,
        5000,
    );
    out.push(("rosenbrock", t2, h2.beta3, h2.eps));

    let logi = Problem::logistic(20, 1000, 2024, 0.05);
    let h3 = HyperParams {
        eta: 0.02,
        ..HyperParams::default()
    };
    let (_, t3) = run_adan_traced(
        &logi,
        logi.default_start(),
        &h3,
        &NoiseModel::Gaussian { sigma: 0.3 },
        1,
        600,
    );
    out.push(("logistic-noisy", t3, h3.beta3, h3.eps));

    out
}

#[test]
fn criterion_7_proposition_invariants() {
    let mut checked = Vec::new();
    for (tag, trace, beta3, eps) in suite_traces() {
        check_moment_bounds(&trace).unwrap_or_else(|e| panic!("{tag}: moment bound: {e}"));
        check_eta_ratio(&trace, beta3, eps).unwrap_or_else(|e| panic!("{tag}: η ratio: {e}"));
        checked.push(format!("{tag} ({} steps)", trace.m.len()));
    }
    report(
        "7 (proposition invariants)",
        &format!(
            "moment and step-size-ratio bounds hold on {}",
            checked.join(", ")
        ),
    );
}

#[test]
fn criterion_8_restart() {
    // Analytic trigger: first extrapolation motion zero, then constant δ per
    // step with √n ≡ 0 and ε = 1, so the accumulator is k·δ² after step k and
    // the condition reads (k+1)·k·δ² > R².
    let r = 1.0f64;
    let delta_sq = 0.25f64 * 0.25;
    let predicted = predicted_restart_step(delta_sq, r);
    assert_eq!(predicted, 4); // 5·4·0.0625 = 1.25 > 1, 4·3·0.0625 = 0.75 ≤ 1
    let h = HyperParams {
        eps: 1.0,
        ..HyperParams::default()
    };
    let mut s = adan_init(ParamVector::scalar(0.0), &ParamVector::scalar(0.0), &h);
    let mut fired = None;
    for step in 1..100u64 {
        s.k = step + 1;
        s.restart_acc = step as f64 * delta_sq;
        if restart_check(&s, r) {
            fired = Some(step + 1);
            break;
        }
    }
    assert_eq!(
        fired,
        Some(predicted + 1),
        "trigger fired at the wrong step"
    );

    // Lines 8-10 semantics on a live state: moments reinitialize at the
    // current point, the accumulator restarts from the new motion, and the
    // state resumes at k = 1 after one immediate update.
    let problem = Problem::quadratic_conditioned(5, 100.0);
    let h = HyperParams {
        eta: 0.1,
        shifted_n: true,
        restart_r: Some(0.5),
        ..HyperParams::default()
    };
    let theta0 = problem.default_start();
    let g0 = problem.raw_loss_grad(&theta0).1;
    let mut state = adan_init(theta0, &g0, &h);
    let mut fired_at = None;
    for k in 0..200u64 {
        let g = problem.raw_loss_grad(&state.theta).1;
        if k == 0 {
            adan_step(&mut state, &g0, &h).unwrap();
        } else {
            adan_step(&mut state, &g, &h).unwrap();
        }
        if restart_check(&state, 0.5) {
            fired_at = Some(state.k);
            break;
        }
    }
    let fired_at = fired_at.expect("restart condition never fired on the live run");
    let theta_before = state.theta.clone();
    let g_new = problem.raw_loss_grad(&theta_before).1;
    adan_restart(&mut state, &h, &g_new).unwrap();
    assert_eq!(state.k, 1, "restart must resume at k = 1");
    assert_eq!(
        state.m, g_new,
        "first moment must reseed from the fresh gradient"
    );
    assert_eq!(state.v, ParamVector::zeros(5));
    assert_eq!(state.n, g_new.square());
    let eta_vec = ParamVector::filled(5, h.eta).div_sqrt_guarded(&state.n, h.eps);
    let expected_theta = theta_before.sub(&eta_vec.mul(&g_new));
    assert!(
        expected_theta.sub(&state.theta).norm_linf() < 1e-14,
        "line-6 update after restart"
    );
    let motion = state.y_prev.sub(&theta_before);
    let expected_acc = weighted_sq_norm(&motion, &state.n, h.eps).unwrap();
    assert!((state.restart_acc - expected_acc).abs() <= 1e-15 * (1.0 + expected_acc));

    // Event-log confirmation through the harness.
    let mut cfg = RunConfig::new(problem, OptimizerKind::Adan, h);
    cfg.budget = 300;
    cfg.eval_interval = 50;
    let rec = run(&cfg);
    let restarts: Vec<u64> = rec
        .events
        .iter()
        .filter(|e| e.kind == "restart")
        .map(|e| e.iter)
        .collect();
    assert!(
        !restarts.is_empty(),
        "restart-enabled run must log restart events"
    );
    assert!(
        restarts.windows(2).all(|w| w[0] < w[1]),
        "restart events must be ordered"
    );
    let rec2 = run(&cfg);
    assert_eq!(
        rec.events, rec2.events,
        "restart schedule must be deterministic"
    );
    report(
        "8 (restart)",
        &format!(
            "synthetic trigger at step {} as predicted; live state resumed at k=1 with reseeded moments; harness logged {} restarts (state.k at first live trigger: {fired_at})",
            predicted + 1,
            restarts.len()
        ),
    );
}

#[test]
fn criterion_9_convergence_smoke() {
    // Frozen from a calibration run: defaults β1=0.02, β2=0.08, β3=0.01 with
    // η=0.005, ε=1.0 reach ~1e-37 on the conditioned quadratic well inside
    // 10k iterations; η=0.001, ε=0.01 reach ~1e-7 loss on Rosenbrock inside
    // 100k iterations.
    let start = Instant::now();
    let quad = Problem::quadratic_conditioned(100, 1e3);
    let h = HyperParams {
        eta: 0.005,
        eps: 1.0,
        ..HyperParams::default()
    };
    assert_eq!((h.beta1, h.beta2, h.beta3), (0.02, 0.08, 0.01));
    let mut cfg = RunConfig::new(quad, OptimizerKind::Adan, h);
    cfg.budget = 10_000;
    cfg.eval_interval = 500;
    let rec = run(&cfg);
    let reached = iterations_to_stationarity(&rec, 1e-5);
    let quad_time = start.elapsed().as_secs_f64();
    assert!(!rec.diverged);
    assert!(
        reached.is_some(),
        "quadratic run never reached grad norm 1e-5 (final {:.2e})",
        rec.samples.last().unwrap().grad_l2
    );
    assert!(
        quad_time < 10.0,
        "quadratic run took {quad_time:.1}s, budget 10s"
    );

    let start = Instant::now();
    let rosen = Problem::rosenbrock(2);
    let h2 = HyperParams {
        eta: 0.001,
        eps: 0.01,
        ..HyperParams::default()
    };
    let mut cfg2 = RunConfig::new(rosen, OptimizerKind::Adan, h2);
    cfg2.budget = 100_000;
    cfg2.eval_interval = 1000;
    let rec2 = run(&cfg2);
    let best_f = rec2
        .samples
        .iter()
        .map(|s| s.loss)
        .fold(f64::INFINITY, f64::min);
    let rosen_time = start.elapsed().as_secs_f64();
    assert!(!rec2.diverged);
    assert!(
        best_f <= 1e-6,
        "rosenbrock best loss {best_f:.2e} above 1e-6"
    );
    assert!(
        rosen_time < 10.0,
        "rosenbrock run took {rosen_time:.1}s, budget 10s"
    );
    report(
        "9 (convergence smoke)",
        &format!(
            "quadratic grad ≤ 1e-5 at iter {:?} ({quad_time:.2}s); rosenbrock best f {best_f:.2e} ≤ 1e-6 ({rosen_time:.2}s)",
            reached.unwrap()
        ),
    );
}

#[test]
fn criterion_10_stochastic_comparison() {
    // Frozen setup: d=20 logistic over 1000 samples, σ=0.3 oracle noise,
    // budget 600, seeds 1..=10, shared η grid {0.005, 0.01, 0.02, 0.05}.
    let grid = [0.005, 0.01, 0.02, 0.05];
    let seeds: Vec<u64> = (1..=10).collect();
    let mut best = Vec::new();
    for opt in [
        OptimizerKind::Adan,
        OptimizerKind::Baseline(BaselineKind::Adam),
    ] {
        let mut best_mean = f64::INFINITY;
        let mut best_eta = 0.0;
        for &eta in &grid {
            let cfgs: Vec<RunConfig> = seeds
                .iter()
                .map(|&seed| {
                    let problem = Problem::logistic(20, 1000, 2024, 0.05);
                    let h = HyperParams {
                        eta,
                        ..HyperParams::default()
                    };
                    let mut cfg = RunConfig::new(problem, opt, h);
                    cfg.budget = 600;
                    cfg.eval_interval = 600;
                    cfg.seed = seed;
                    cfg.noise = NoiseModel::Gaussian { sigma: 0.3 };
                    cfg
                })
                .collect();
            let rows = compare(&cfgs, &[]).unwrap();
            let mean: f64 = rows.iter().map(|r| r.final_loss).sum::<f64>() / rows.len() as f64;
            if mean < best_mean {
                best_mean = mean;
                best_eta = eta;
            }
        }
        best.push((opt.name(), best_eta, best_mean));
    }
    let (adan_name, adan_eta, adan_loss) = best[0];
    let (adam_name, adam_eta, adam_loss) = best[1];
    assert_eq!(adan_name, "adan");
    assert_eq!(adam_name, "adam");
    let ratio = adan_loss / adam_loss;
    assert!(
        ratio <= 1.05,
        "adan mean final loss {adan_loss:.5} vs adam {adam_loss:.5}: ratio {ratio:.4} above 1.05"
    );
    report(
        "10 (stochastic comparison)",
        &format!(
            "10-seed mean final loss: adan {adan_loss:.5} (η={adan_eta}) vs adam {adam_loss:.5} (η={adam_eta}), ratio {ratio:.4} ≤ 1.05"
        ),
    );
}
