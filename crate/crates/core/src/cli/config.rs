//! Plain-text `key = value` configuration files with `[problem]`,
//! `[optimizer]` (repeatable), `[run]`, and optional `[sweep]` sections.
//!
//! Unknown sections or keys are hard errors so typos cannot silently fall
//! back to defaults. All hyperparameters are validated while parsing.
//! Serialization writes every field back with floats at 17 significant
//! digits, so `parse(serialize(c)) == c` exactly.

use crate::harness::{OptimizerKind, RunConfig};
use crate::optim::HyperParams;
use crate::problems::{NoiseModel, Problem};
use crate::vecmath::ParamVector;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: &'static str, key: String },
    #[error("invalid value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("missing required key `{key}` in section [{section}]")]
    Missing {
        section: &'static str,
        key: &'static str,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Format a float with 17 significant digits; round-trips `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_f64_list(vs: &[f64]) -> String {
    vs.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub kind: String,
    pub dim: usize,
    pub cond: Option<f64>,
    pub diag: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    pub lambda: f64,
    pub decoupled: bool,
    pub n_samples: usize,
    pub data_seed: u64,
    pub flip_prob: f64,
    pub input_dim: usize,
    pub hidden: usize,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            kind: "quadratic".into(),
            dim: 2,
            cond: None,
            diag: None,
            theta0: None,
            lambda: 0.0,
            decoupled: true,
            n_samples: 256,
            data_seed: 7,
            flip_prob: 0.05,
            input_dim: 4,
            hidden: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSection {
    pub kind: String,
    pub hyper: HyperParams,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            kind: "adan".into(),
            hyper: HyperParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub budget: u64,
    pub eval_interval: u64,
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub noise: String,
    pub sigma: f64,
    pub bound: f64,
    pub batch_size: Option<usize>,
    pub base_batch: Option<usize>,
    pub sqrt_lr_rule: bool,
    pub eps_targets: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            budget: 100,
            eval_interval: 10,
            seed: 0,
            seeds: None,
            noise: "none".into(),
            sigma: 0.0,
            bound: 0.0,
            batch_size: None,
            base_batch: None,
            sqrt_lr_rule: false,
            eps_targets: vec![1e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSection {
    pub etas: Vec<f64>,
    /// β triples written `b1:b2:b3`, comma separated.
    pub betas: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileConfig {
    pub problem: ProblemSection,
    pub optimizers: Vec<OptimizerSection>,
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSection::default(),
            optimizers: vec![OptimizerSection::default()],
            run: RunSection::default(),
            sweep: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        }),
    }
}

fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_u64_list(key: &str, value: &str) -> Result<Vec<u64>, ConfigError> {
    value.split(',').map(|s| parse_num(key, s.trim())).collect()
}

pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
    let mut problem = ProblemSection::default();
    let mut optimizers: Vec<OptimizerSection> = Vec::new();
    let mut run = RunSection::default();
    let mut sweep: Option<SweepSection> = None;
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if !content.ends_with(']') {
                return Err(ConfigError::Syntax { line });
            }
            section = content[1..content.len() - 1].trim().to_string();
            match section.as_str() {
                "problem" | "run" => {}
                "optimizer" => optimizers.push(OptimizerSection::default()),
                "sweep" => sweep = Some(SweepSection::default()),
                _ => return Err(ConfigError::UnknownSection { line, section }),
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or(ConfigError::Syntax { line })?;
        let key = key.trim();
        let value = value.trim();
        match section.as_str() {
            "problem" => parse_problem_key(&mut problem, key, value)?,
            "optimizer" => {
                let opt = optimizers.last_mut().ok_or(ConfigError::Syntax { line })?;
                parse_optimizer_key(opt, key, value)?;
            }
            "run" => parse_run_key(&mut run, key, value)?,
            "sweep" => parse_sweep_key(sweep.as_mut().unwrap(), key, value)?,
            _ => return Err(ConfigError::Syntax { line }),
        }
    }

    let cfg = FileConfig {
        problem,
        optimizers,
        run,
        sweep,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_problem_key(p: &mut ProblemSection, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "kind" => p.kind = value.to_string(),
        "dim" => p.dim = parse_num(key, value)?,
        "cond" => p.cond = Some(parse_num(key, value)?),
        "diag" => p.diag = Some(parse_f64_list(key, value)?),
        "theta0" => p.theta0 = Some(parse_f64_list(key, value)?),
        "lambda" => p.lambda = parse_num(key, value)?,
        "decoupled" => p.decoupled = parse_bool(key, value)?,
        "n_samples" => p.n_samples = parse_num(key, value)?,
        "data_seed" => p.data_seed = parse_num(key, value)?,
        "flip_prob" => p.flip_prob = parse_num(key, value)?,
        "input_dim" => p.input_dim = parse_num(key, value)?,
        "hidden" => p.hidden = parse_num(key, value)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                section: "problem",
                key: key.into(),
            })
        }
    }
    Ok(())
}

fn parse_optimizer_key(
    o: &mut OptimizerSection,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    let h = &mut o.hyper;
    match key {
        "kind" => o.kind = value.to_string(),
        "beta1" => h.beta1 = parse_num(key, value)?,
        "beta2" => h.beta2 = parse_num(key, value)?,
        "beta3" => h.beta3 = parse_num(key, value)?,
        "eta" => h.eta = parse_num(key, value)?,
        "eps" => h.eps = parse_num(key, value)?,
        "lambda" => h.lambda = parse_num(key, value)?,
        "debias" => h.debias = parse_bool(key, value)?,
        "shifted_n" => h.shifted_n = parse_bool(key, value)?,
        "clip" => h.clip = Some(parse_num(key, value)?),
        "restart_r" => h.restart_r = Some(parse_num(key, value)?),
        "lambda_decay_mu" => h.lambda_decay_mu = Some(parse_num(key, value)?),
        _ => {
            return Err(ConfigError::UnknownKey {
                section: "optimizer",
                key: key.into(),
            })
        }
    }
    Ok(())
}

fn parse_run_key(r: &mut RunSection, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "budget" => r.budget = parse_num(key, value)?,
        "eval_interval" => r.eval_interval = parse_num(key, value)?,
        "seed" => r.seed = parse_num(key, value)?,
        "seeds" => r.seeds = Some(parse_u64_list(key, value)?),
        "noise" => r.noise = value.to_string(),
        "sigma" => r.sigma = parse_num(key, value)?,
        "bound" => r.bound = parse_num(key, value)?,
        "batch_size" => r.batch_size = Some(parse_num(key, value)?),
        "base_batch" => r.base_batch = Some(parse_num(key, value)?),
        "sqrt_lr_rule" => r.sqrt_lr_rule = parse_bool(key, value)?,
        "eps_targets" => r.eps_targets = parse_f64_list(key, value)?,
        _ => {
            return Err(ConfigError::UnknownKey {
                section: "run",
                key: key.into(),
            })
        }
    }
    Ok(())
}

fn parse_sweep_key(s: &mut SweepSection, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "etas" => s.etas = parse_f64_list(key, value)?,
        "betas" => {
            s.betas = value
                .split(',')
                .map(|triple| {
                    let parts: Vec<&str> = triple.trim().split(':').collect();
                    if parts.len() != 3 {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: triple.into(),
                        });
                    }
                    Ok((
                        parse_num::<f64>(key, parts[0])?,
                        parse_num::<f64>(key, parts[1])?,
                        parse_num::<f64>(key, parts[2])?,
                    ))
                })
                .collect::<Result<_, _>>()?;
        }
        _ => {
            return Err(ConfigError::UnknownKey {
                section: "sweep",
                key: key.into(),
            })
        }
    }
    Ok(())
}

fn validate(cfg: &FileConfig) -> Result<(), ConfigError> {
    match cfg.problem.kind.as_str() {
        "quadratic" | "rosenbrock" | "logistic" | "mlp" => {}
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown problem kind `{other}`"
            )))
        }
    }
    if cfg.problem.kind == "rosenbrock" && cfg.problem.dim < 2 {
        return Err(ConfigError::Invalid("rosenbrock needs dim >= 2".into()));
    }
    if cfg.problem.lambda < 0.0 {
        return Err(ConfigError::Invalid(
            "problem lambda must be non-negative".into(),
        ));
    }
    for o in &cfg.optimizers {
        if OptimizerKind::parse(&o.kind).is_none() {
            return Err(ConfigError::Invalid(format!(
                "unknown optimizer kind `{}`",
                o.kind
            )));
        }
        o.hyper
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    if cfg.run.budget < 1 {
        return Err(ConfigError::Invalid("budget must be >= 1".into()));
    }
    if cfg.run.eval_interval < 1 {
        return Err(ConfigError::Invalid("eval_interval must be >= 1".into()));
    }
    match cfg.run.noise.as_str() {
        "none" | "gaussian" | "bounded" => {}
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown noise kind `{other}`"
            )))
        }
    }
    if cfg.run.noise == "gaussian" && cfg.run.sigma < 0.0 {
        return Err(ConfigError::Invalid("sigma must be non-negative".into()));
    }
    if cfg.run.noise == "bounded" && cfg.run.bound < 0.0 {
        return Err(ConfigError::Invalid("bound must be non-negative".into()));
    }
    if cfg.run.sqrt_lr_rule && (cfg.run.batch_size.is_none() || cfg.run.base_batch.is_none()) {
        return Err(ConfigError::Invalid(
            "sqrt_lr_rule needs both batch_size and base_batch".into(),
        ));
    }
    if cfg.run.batch_size.is_some() && !matches!(cfg.problem.kind.as_str(), "logistic" | "mlp") {
        return Err(ConfigError::Invalid(
            "batch_size requires a dataset-backed problem (logistic or mlp)".into(),
        ));
    }
    if let Some(s) = &cfg.sweep {
        if s.etas.is_empty() || s.betas.is_empty() {
            return Err(ConfigError::Invalid(
                "sweep needs both etas and betas".into(),
            ));
        }
    }
    Ok(())
}

pub fn serialize(cfg: &FileConfig) -> String {
    let mut out = String::new();
    let p = &cfg.problem;
    out.push_str("[problem]\n");
    out.push_str(&format!("kind = {}\n", p.kind));
    out.push_str(&format!("dim = {}\n", p.dim));
    if let Some(c) = p.cond {
        out.push_str(&format!("cond = {}\n", fmt_f64(c)));
    }
    if let Some(d) = &p.diag {
        out.push_str(&format!("diag = {}\n", fmt_f64_list(d)));
    }
    if let Some(t) = &p.theta0 {
        out.push_str(&format!("theta0 = {}\n", fmt_f64_list(t)));
    }
    out.push_str(&format!("lambda = {}\n", fmt_f64(p.lambda)));
    out.push_str(&format!("decoupled = {}\n", p.decoupled));
    out.push_str(&format!("n_samples = {}\n", p.n_samples));
    out.push_str(&format!("data_seed = {}\n", p.data_seed));
    out.push_str(&format!("flip_prob = {}\n", fmt_f64(p.flip_prob)));
    out.push_str(&format!("input_dim = {}\n", p.input_dim));
    out.push_str(&format!("hidden = {}\n", p.hidden));

    for o in &cfg.optimizers {
        out.push_str("\n[optimizer]\n");
        out.push_str(&format!("kind = {}\n", o.kind));
        let h = &o.hyper;
        out.push_str(&format!("beta1 = {}\n", fmt_f64(h.beta1)));
        out.push_str(&format!("beta2 = {}\n", fmt_f64(h.beta2)));
        out.push_str(&format!("beta3 = {}\n", fmt_f64(h.beta3)));
        out.push_str(&format!("eta = {}\n", fmt_f64(h.eta)));
        out.push_str(&format!("eps = {}\n", fmt_f64(h.eps)));
        out.push_str(&format!("lambda = {}\n", fmt_f64(h.lambda)));
        out.push_str(&format!("debias = {}\n", h.debias));
        out.push_str(&format!("shifted_n = {}\n", h.shifted_n));
        if let Some(c) = h.clip {
            out.push_str(&format!("clip = {}\n", fmt_f64(c)));
        }
        if let Some(r) = h.restart_r {
            out.push_str(&format!("restart_r = {}\n", fmt_f64(r)));
        }
        if let Some(mu) = h.lambda_decay_mu {
            out.push_str(&format!("lambda_decay_mu = {}\n", fmt_f64(mu)));
        }
    }

    let r = &cfg.run;
    out.push_str("\n[run]\n");
    out.push_str(&format!("budget = {}\n", r.budget));
    out.push_str(&format!("eval_interval = {}\n", r.eval_interval));
    out.push_str(&format!("seed = {}\n", r.seed));
    if let Some(seeds) = &r.seeds {
        let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        out.push_str(&format!("seeds = {}\n", list.join(",")));
    }
    out.push_str(&format!("noise = {}\n", r.noise));
    out.push_str(&format!("sigma = {}\n", fmt_f64(r.sigma)));
    out.push_str(&format!("bound = {}\n", fmt_f64(r.bound)));
    if let Some(b) = r.batch_size {
        out.push_str(&format!("batch_size = {b}\n"));
    }
    if let Some(b) = r.base_batch {
        out.push_str(&format!("base_batch = {b}\n"));
    }
    out.push_str(&format!("sqrt_lr_rule = {}\n", r.sqrt_lr_rule));
    out.push_str(&format!("eps_targets = {}\n", fmt_f64_list(&r.eps_targets)));

    if let Some(s) = &cfg.sweep {
        out.push_str("\n[sweep]\n");
        out.push_str(&format!("etas = {}\n", fmt_f64_list(&s.etas)));
        let triples: Vec<String> = s
            .betas
            .iter()
            .map(|(a, b, c)| format!("{}:{}:{}", fmt_f64(*a), fmt_f64(*b), fmt_f64(*c)))
            .collect();
        out.push_str(&format!("betas = {}\n", triples.join(",")));
    }
    out
}

pub fn build_problem(p: &ProblemSection) -> Result<Problem, ConfigError> {
    let problem = match p.kind.as_str() {
        "quadratic" => match (&p.diag, p.cond) {
            (Some(diag), _) => Problem::quadratic(diag.clone(), None),
            (None, Some(c)) => Problem::quadratic_conditioned(p.dim, c),
            (None, None) => Problem::quadratic(vec![1.0; p.dim], None),
        },
        "rosenbrock" => Problem::rosenbrock(p.dim),
        "logistic" => Problem::logistic(p.dim, p.n_samples, p.data_seed, p.flip_prob),
        "mlp" => Problem::mlp(p.input_dim, p.hidden, p.n_samples, p.data_seed),
        _ => unreachable!("validated"),
    };
    Ok(problem.with_lambda(p.lambda, !p.decoupled))
}

fn build_noise(r: &RunSection) -> NoiseModel {
    match r.noise.as_str() {
        "gaussian" => NoiseModel::Gaussian { sigma: r.sigma },
        "bounded" => NoiseModel::BoundedUniform { bound: r.bound },
        _ => NoiseModel::None,
    }
}

/// Expand a file config into concrete run configs, one per optimizer × seed.
pub fn build_run_configs(
    cfg: &FileConfig,
    seed_override: Option<u64>,
) -> Result<Vec<RunConfig>, ConfigError> {
    let problem = build_problem(&cfg.problem)?;
    if let Some(t0) = &cfg.problem.theta0 {
        if t0.len() != problem.dim() {
            return Err(ConfigError::Invalid(format!(
                "theta0 has {} entries, problem dimension is {}",
                t0.len(),
                problem.dim()
            )));
        }
    }
    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => cfg.run.seeds.clone().unwrap_or_else(|| vec![cfg.run.seed]),
    };
    let mut out = Vec::new();
    for opt in &cfg.optimizers {
        for &seed in &seeds {
            let mut rc = RunConfig::new(
                problem.clone(),
                OptimizerKind::parse(&opt.kind).expect("validated"),
                opt.hyper.clone(),
            );
            rc.theta0 = cfg.problem.theta0.clone().map(ParamVector::new);
            rc.budget = cfg.run.budget;
            rc.eval_interval = cfg.run.eval_interval;
            rc.seed = seed;
            rc.noise = build_noise(&cfg.run);
            rc.batch_size = cfg.run.batch_size;
            rc.sqrt_lr_base = if cfg.run.sqrt_lr_rule {
                cfg.run.base_batch
            } else {
                None
            };
            out.push(rc);
        }
    }
    Ok(out)
}
