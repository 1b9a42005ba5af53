//! Deterministic experiment runner: drives one optimizer over one problem,
//! records loss and full-gradient norms at a fixed cadence, and aggregates
//! comparison tables over optimizer/seed grids.
//!
//! Metrics always come from the exact full gradient, never from the noisy
//! oracle. When the problem carries its ℓ2 weight outside the objective
//! (decoupled mode) and the optimizer maintains a second moment, the recorded
//! gradient is that of the dynamic objective `f(θ) + λ_k/2·‖θ‖²_{√n_k}`, i.e.
//! `∇f + λ_k(√n_k+ε)∘θ`; otherwise the static objective is measured. Which
//! one was in force is stored in the record.

use crate::optim::{
    adam_family_step, adan_init, adan_restart, adan_step, agd2_step, agd_step, baseline_init,
    hba_step, restart_check, AdanState, BaselineKind, BaselineState, HyperParams, OptimError,
};
use crate::problems::{NoiseModel, Problem};
use crate::refcheck::invariants::MomentTrace;
use crate::rng::SplitMix64;
use crate::vecmath::{global_norm_clip, ParamVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Loss magnitude beyond which a run is declared divergent and truncated.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("compare requires all configs to share one problem ({0} vs {1})")]
    MixedProblems(String, String),
    #[error("minibatch mode: {0}")]
    Minibatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adan,
    Baseline(BaselineKind),
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adan => "adan",
            OptimizerKind::Baseline(b) => b.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "adan" => OptimizerKind::Adan,
            "hba" => OptimizerKind::Baseline(BaselineKind::Hba),
            "agd" => OptimizerKind::Baseline(BaselineKind::Agd),
            "agd2" => OptimizerKind::Baseline(BaselineKind::Agd2),
            "rmsprop" => OptimizerKind::Baseline(BaselineKind::RmsProp),
            "adam" => OptimizerKind::Baseline(BaselineKind::Adam),
            "adamw" => OptimizerKind::Baseline(BaselineKind::AdamW),
            "nadam" => OptimizerKind::Baseline(BaselineKind::Nadam),
            _ => return None,
        })
    }

    fn has_second_moment(&self) -> bool {
        match self {
            OptimizerKind::Adan => true,
            OptimizerKind::Baseline(b) => matches!(
                b,
                BaselineKind::RmsProp
                    | BaselineKind::Adam
                    | BaselineKind::AdamW
                    | BaselineKind::Nadam
            ),
        }
    }
}

/// Everything needed to reproduce one run bit-for-bit.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub theta0: Option<ParamVector>,
    pub optimizer: OptimizerKind,
    pub hyper: HyperParams,
    pub budget: u64,
    pub eval_interval: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    /// Minibatch size for dataset-backed problems; `None` means the exact
    /// gradient plus oracle noise.
    pub batch_size: Option<usize>,
    /// Apply `lr = √(batch/base)·lr` before running. Never applied silently:
    /// the scaled value is reported in the record.
    pub sqrt_lr_base: Option<usize>,
}

impl RunConfig {
    pub fn new(problem: Problem, optimizer: OptimizerKind, hyper: HyperParams) -> Self {
        Self {
            problem,
            theta0: None,
            optimizer,
            hyper,
            budget: 100,
            eval_interval: 10,
            seed: 0,
            noise: NoiseModel::None,
            batch_size: None,
            sqrt_lr_base: None,
        }
    }

    fn effective_hyper(&self) -> HyperParams {
        let mut h = self.hyper.clone();
        if let (Some(base), Some(batch)) = (self.sqrt_lr_base, self.batch_size) {
            h.eta *= (batch as f64 / base as f64).sqrt();
        }
        // The restart analysis assumes the step size is independent of the
        // current draw, so restart-enabled runs always step with n_{k-1}.
        if h.restart_r.is_some() {
            h.shifted_n = true;
        }
        h
    }

    fn problem_label(&self) -> String {
        format!("{}-d{}", self.problem.kind_name(), self.problem.dim())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EvalSample {
    pub iter: u64,
    pub loss: f64,
    pub grad_l2: f64,
    pub grad_linf: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunEvent {
    pub iter: u64,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub optimizer: String,
    pub seed: u64,
    pub samples: Vec<EvalSample>,
    pub events: Vec<RunEvent>,
    /// Empirical `c∞ := 3·max_k ‖g_k‖∞` over the oracle draws of the run.
    pub c_inf: f64,
    pub final_theta: Vec<f64>,
    /// "static" (objective as evaluated) or "dynamic" (λ-term weighted by √n).
    pub metric: String,
    /// Base learning rate actually used (after any sqrt batch scaling).
    pub eta_used: f64,
    /// Whether the step size used the previous second moment; forced on for
    /// restart-enabled runs.
    pub shifted_n_used: bool,
    pub diverged: bool,
    #[serde(skip)]
    pub wall_time_s: f64,
}

enum RunnerState {
    Uninit,
    Adan(Box<AdanState>),
    Base(Box<BaselineState>),
}

/// Execute one configured run. Divergence truncates the record with an event
/// rather than failing; identical configs produce identical records.
pub fn run(cfg: &RunConfig) -> RunRecord {
    let start = std::time::Instant::now();
    let problem = &cfg.problem;
    let h = cfg.effective_hyper();
    let mut theta = cfg
        .theta0
        .clone()
        .unwrap_or_else(|| problem.default_start());
    let mut rng = SplitMix64::new(cfg.seed);
    let dynamic_metric =
        problem.lambda > 0.0 && !problem.l2_in_objective && cfg.optimizer.has_second_moment();

    let mut samples = Vec::new();
    let mut events: Vec<RunEvent> = Vec::new();
    let mut c_inf_max = 0.0f64;
    let mut diverged = false;

    let mut state = match cfg.optimizer {
        OptimizerKind::Adan => RunnerState::Uninit,
        OptimizerKind::Baseline(b) => RunnerState::Base(Box::new(baseline_init(b, theta.clone()))),
    };

    let metric_n = |state: &RunnerState| -> Option<ParamVector> {
        if !dynamic_metric {
            return None;
        }
        match state {
            RunnerState::Adan(s) => Some(s.n.clone()),
            RunnerState::Base(s) => Some(s.n.clone()),
            RunnerState::Uninit => None,
        }
    };

    // Initial point (iteration 0).
    match eval_metrics(problem, &theta, metric_n(&state).as_ref(), &h, 0) {
        Some(s) => samples.push(s),
        None => {
            events.push(RunEvent {
                iter: 0,
                kind: "divergence".into(),
            });
            diverged = true;
        }
    }

    let mut k: u64 = 0;
    while k < cfg.budget && !diverged {
        let step_result: Result<bool, OptimError> = match cfg.optimizer {
            OptimizerKind::Baseline(BaselineKind::Hba)
            | OptimizerKind::Baseline(BaselineKind::Agd) => {
                // These evaluate the oracle at a point of their choosing.
                let mut oracle_max = 0.0f64;
                let mut grad_at = |p: &ParamVector| {
                    let g = sample_gradient(cfg, problem, p, &mut rng)
                        .unwrap_or_else(|()| ParamVector::filled(p.dim(), f64::NAN));
                    let g = match h.clip {
                        Some(c) => global_norm_clip(&g, c),
                        None => g,
                    };
                    oracle_max = oracle_max.max(g.norm_linf());
                    g
                };
                let r = match &mut state {
                    RunnerState::Base(s) => {
                        if s.kind == BaselineKind::Hba {
                            hba_step(s, &mut grad_at, &h)
                        } else {
                            agd_step(s, &mut grad_at, &h)
                        }
                    }
                    _ => unreachable!(),
                };
                c_inf_max = c_inf_max.max(oracle_max);
                r.map(|_| false)
            }
            _ => {
                let g = match sample_gradient(cfg, problem, &theta, &mut rng) {
                    Ok(g) => g,
                    Err(_) => {
                        events.push(RunEvent {
                            iter: k,
                            kind: "divergence".into(),
                        });
                        diverged = true;
                        break;
                    }
                };
                c_inf_max = c_inf_max.max(match h.clip {
                    Some(c) => global_norm_clip(&g, c).norm_linf(),
                    None => g.norm_linf(),
                });
                match (&mut state, cfg.optimizer) {
                    (RunnerState::Uninit, OptimizerKind::Adan) => {
                        let mut s = Box::new(adan_init(theta.clone(), &g, &h));
                        let r = adan_step(&mut s, &g, &h).map(|rep| rep.clipped);
                        state = RunnerState::Adan(s);
                        r
                    }
                    (RunnerState::Adan(s), _) => adan_step(s, &g, &h).map(|rep| rep.clipped),
                    (RunnerState::Base(s), OptimizerKind::Baseline(BaselineKind::Agd2)) => {
                        agd2_step(s, &g, &h).map(|_| false)
                    }
                    (RunnerState::Base(s), _) => adam_family_step(s, &g, &h).map(|rep| rep.clipped),
                    _ => unreachable!(),
                }
            }
        };

        match step_result {
            Ok(clipped) => {
                if clipped {
                    events.push(RunEvent {
                        iter: k,
                        kind: "clip".into(),
                    });
                }
            }
            Err(_) => {
                events.push(RunEvent {
                    iter: k,
                    kind: "divergence".into(),
                });
                diverged = true;
                break;
            }
        }

        theta = match &state {
            RunnerState::Adan(s) => s.theta.clone(),
            RunnerState::Base(s) => s.theta.clone(),
            RunnerState::Uninit => unreachable!(),
        };
        k += 1;

        // Restart schedule (Adan only): one fresh draw at the new point, full
        // moment reset, and an immediate first update.
        if let (RunnerState::Adan(s), Some(r)) = (&mut state, h.restart_r) {
            if restart_check(s, r) {
                let g0 = match sample_gradient(cfg, problem, &theta, &mut rng) {
                    Ok(g) => g,
                    Err(_) => {
                        events.push(RunEvent {
                            iter: k,
                            kind: "divergence".into(),
                        });
                        diverged = true;
                        break;
                    }
                };
                c_inf_max = c_inf_max.max(match h.clip {
                    Some(c) => global_norm_clip(&g0, c).norm_linf(),
                    None => g0.norm_linf(),
                });
                events.push(RunEvent {
                    iter: k,
                    kind: "restart".into(),
                });
                if adan_restart(s, &h, &g0).is_err() {
                    events.push(RunEvent {
                        iter: k,
                        kind: "divergence".into(),
                    });
                    diverged = true;
                    break;
                }
                theta = s.theta.clone();
                k += 1;
            }
        }

        if k.is_multiple_of(cfg.eval_interval) || k >= cfg.budget {
            match eval_metrics(problem, &theta, metric_n(&state).as_ref(), &h, k) {
                Some(s) => {
                    let bad = !s.loss.is_finite() || s.loss.abs() > DIVERGENCE_GUARD;
                    if bad {
                        events.push(RunEvent {
                            iter: k,
                            kind: "divergence".into(),
                        });
                        diverged = true;
                    } else {
                        samples.push(s);
                    }
                }
                None => {
                    events.push(RunEvent {
                        iter: k,
                        kind: "divergence".into(),
                    });
                    diverged = true;
                }
            }
        }
    }

    RunRecord {
        optimizer: cfg.optimizer.name().to_string(),
        seed: cfg.seed,
        samples,
        events,
        c_inf: 3.0 * c_inf_max,
        final_theta: theta.into_vec(),
        metric: if dynamic_metric {
            "dynamic".into()
        } else {
            "static".into()
        },
        eta_used: h.eta,
        shifted_n_used: h.shifted_n,
        diverged,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn sample_gradient(
    cfg: &RunConfig,
    problem: &Problem,
    theta: &ParamVector,
    rng: &mut SplitMix64,
) -> Result<ParamVector, ()> {
    match cfg.batch_size {
        Some(b) => problem.minibatch_grad(theta, b, rng).map_err(|_| ()),
        None => problem
            .sample_stochastic_grad(theta, &cfg.noise, rng)
            .map_err(|_| ()),
    }
}

/// Full-gradient metrics at θ; `None` when the objective overflowed.
fn eval_metrics(
    problem: &Problem,
    theta: &ParamVector,
    n_hat: Option<&ParamVector>,
    h: &HyperParams,
    iter: u64,
) -> Option<EvalSample> {
    let (loss, grad) = match n_hat {
        Some(n) => {
            // Dynamic objective: f(θ) + λ_k/2·‖θ‖²_{√n} measured with the
            // optimizer's current second moment.
            let (base, grad) = problem.raw_loss_grad(theta);
            if !base.is_finite() || !grad.is_finite() {
                return None;
            }
            let lambda_k = h.lambda_at(iter);
            let weighted = crate::vecmath::weighted_sq_norm(theta, n, h.eps).ok()?;
            let reg_grad = theta.mul(&n.sqrt().map(|v| v + h.eps)).scale(lambda_k);
            (base + 0.5 * lambda_k * weighted, grad.add(&reg_grad))
        }
        None => problem.loss_grad(theta).ok()?,
    };
    Some(EvalSample {
        iter,
        loss,
        grad_l2: grad.norm_l2(),
        grad_linf: grad.norm_linf(),
    })
}

/// First recorded iteration whose full-gradient ℓ2 norm is at most the target.
pub fn iterations_to_stationarity(rec: &RunRecord, eps_target: f64) -> Option<u64> {
    rec.samples
        .iter()
        .find(|s| s.grad_l2 <= eps_target)
        .map(|s| s.iter)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CompareRow {
    pub optimizer: String,
    pub seed: u64,
    pub final_loss: f64,
    pub best_grad_l2: f64,
    /// One entry per requested ε, `None` when never reached.
    pub iters_to_eps: Vec<Option<u64>>,
}

/// Run every config (in parallel) and fold into a deterministic table keyed
/// and sorted by `(optimizer, seed)`. All configs must share one problem.
pub fn compare(cfgs: &[RunConfig], eps_targets: &[f64]) -> Result<Vec<CompareRow>, HarnessError> {
    if let Some(first) = cfgs.first() {
        for c in cfgs.iter().skip(1) {
            if c.problem != first.problem {
                return Err(HarnessError::MixedProblems(
                    first.problem_label(),
                    c.problem_label(),
                ));
            }
        }
    }
    let mut rows: Vec<CompareRow> = cfgs
        .par_iter()
        .map(|cfg| {
            let rec = run(cfg);
            let final_loss = rec.samples.last().map_or(f64::INFINITY, |s| s.loss);
            let best_grad_l2 = rec
                .samples
                .iter()
                .map(|s| s.grad_l2)
                .fold(f64::INFINITY, f64::min);
            let iters_to_eps = eps_targets
                .iter()
                .map(|&e| iterations_to_stationarity(&rec, e))
                .collect();
            CompareRow {
                optimizer: rec.optimizer,
                seed: rec.seed,
                final_loss,
                best_grad_l2,
                iters_to_eps,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.optimizer.cmp(&b.optimizer).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

/// Drive Adan directly over a problem and record the per-step histories the
/// invariant checks need. Gradients are recorded post-clip, matching what the
/// update consumed.
pub fn run_adan_traced(
    problem: &Problem,
    theta0: ParamVector,
    h: &HyperParams,
    noise: &NoiseModel,
    seed: u64,
    steps: u64,
) -> (AdanState, MomentTrace) {
    let mut rng = SplitMix64::new(seed);
    let mut trace = MomentTrace::default();
    let mut g_prev: Option<ParamVector> = None;
    let mut state: Option<AdanState> = None;
    for _ in 0..steps {
        let theta = state.as_ref().map_or(&theta0, |s| &s.theta).clone();
        let mut g = problem
            .sample_stochastic_grad(&theta, noise, &mut rng)
            .expect("objective overflow during traced run");
        if let Some(c) = h.clip {
            g = global_norm_clip(&g, c);
        }
        let composite = match &g_prev {
            Some(prev) => g.add_scaled(&g.sub(prev), 1.0 - h.beta2),
            None => g.clone(),
        };
        let s = state.get_or_insert_with(|| adan_init(theta.clone(), &g, h));
        adan_step(s, &g, h).expect("non-finite state during traced run");
        trace.grads.push(g.clone());
        trace.composites.push(composite);
        trace.m.push(s.m.clone());
        trace.n.push(s.n.clone());
        trace.eta.push(s.last_eta.clone());
        g_prev = Some(g);
    }
    (state.expect("traced run needs at least one step"), trace)
}
