//! Command-line front end: `run`, `compare`, `sweep`, and `verify`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 divergence. Output files are CSV (fixed column sets, floats at 17
//! significant digits, line-feed terminated) or JSON mirroring the record
//! structs. Reruns of the same config produce byte-identical files.

pub mod config;
pub mod verify;

use crate::harness::{self, CompareRow, RunConfig, RunRecord};
use clap::{Parser, Subcommand, ValueEnum};
use config::{fmt_f64, FileConfig};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "adan",
    about = "Adan optimizer benchmark and verification tool"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute one configured run and write its record.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run every optimizer × seed in the config and write a comparison table.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Grid over step sizes and β-triples from the `[sweep]` section.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the equivalence and invariant checks and report pass/fail.
    Verify {
        /// Only run checks whose name contains this substring.
        #[arg(long)]
        only: Option<String>,
    },
}

pub fn main() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            seed,
            workers,
        } => with_workers(workers, || cmd_run(&config, &out, format, seed)),
        Command::Compare {
            config,
            out,
            seed,
            workers,
        } => with_workers(workers, || cmd_compare(&config, &out, seed)),
        Command::Sweep {
            config,
            out,
            workers,
        } => with_workers(workers, || cmd_sweep(&config, &out)),
        Command::Verify { only } => cmd_verify(only.as_deref()),
    }
}

fn with_workers(workers: Option<usize>, f: impl FnOnce() -> i32 + Send) -> i32 {
    match workers {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .unwrap_or_else(|e| {
                eprintln!("error: failed to build worker pool: {e}");
                2
            }),
        _ => f(),
    }
}

fn load_config(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    config::parse(&text).map_err(|e| e.to_string())
}

fn cmd_run(config: &Path, out: &Path, format: OutputFormat, seed: Option<u64>) -> i32 {
    let file_cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if file_cfg.optimizers.len() != 1 {
        eprintln!("config error: `run` needs exactly one [optimizer] section");
        return 2;
    }
    if file_cfg.run.seeds.is_some() && seed.is_none() {
        eprintln!("config error: `run` takes a single seed; use `compare` for seed lists");
        return 2;
    }
    let cfgs = match config::build_run_configs(&file_cfg, seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let rec = harness::run(&cfgs[0]);
    let payload = match format {
        OutputFormat::Csv => run_record_csv(&rec),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rec).expect("record serializes");
            s.push('\n');
            s
        }
    };
    if let Err(e) = std::fs::write(out, payload) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return 2;
    }
    if rec.diverged {
        eprintln!(
            "run diverged at iteration {}",
            rec.events.last().map_or(0, |e| e.iter)
        );
        3
    } else {
        0
    }
}

fn cmd_compare(config: &Path, out: &Path, seed: Option<u64>) -> i32 {
    let file_cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    if file_cfg.optimizers.is_empty() {
        eprintln!("config error: `compare` needs at least one [optimizer] section");
        return 2;
    }
    let cfgs = match config::build_run_configs(&file_cfg, seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    run_compare_to_csv(&cfgs, &file_cfg.run.eps_targets, out)
}

fn cmd_sweep(config: &Path, out: &Path) -> i32 {
    let file_cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let Some(sweep) = file_cfg.sweep.clone() else {
        eprintln!("config error: sweep requires a [sweep] section");
        return 2;
    };
    if file_cfg.optimizers.is_empty() {
        eprintln!("config error: `sweep` needs at least one [optimizer] section");
        return 2;
    }
    let base_cfgs = match config::build_run_configs(&file_cfg, None) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let mut grid: Vec<RunConfig> = Vec::new();
    for base in &base_cfgs {
        for &eta in &sweep.etas {
            for &(b1, b2, b3) in &sweep.betas {
                let mut cfg = base.clone();
                cfg.hyper.eta = eta;
                cfg.hyper.beta1 = b1;
                cfg.hyper.beta2 = b2;
                cfg.hyper.beta3 = b3;
                if cfg.hyper.validate().is_err() {
                    eprintln!("config error: invalid sweep point eta={eta} betas={b1}:{b2}:{b3}");
                    return 2;
                }
                grid.push(cfg);
            }
        }
    }
    use rayon::prelude::*;
    // (optimizer, eta, beta1, beta2, beta3, seed, final_loss, best_grad_l2)
    type SweepRow = (String, f64, f64, f64, f64, u64, f64, f64);
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|cfg| {
            let rec = harness::run(cfg);
            let final_loss = rec.samples.last().map_or(f64::INFINITY, |s| s.loss);
            let best = rec
                .samples
                .iter()
                .map(|s| s.grad_l2)
                .fold(f64::INFINITY, f64::min);
            (
                rec.optimizer,
                cfg.hyper.eta,
                cfg.hyper.beta1,
                cfg.hyper.beta2,
                cfg.hyper.beta3,
                rec.seed,
                final_loss,
                best,
            )
        })
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
            .then(a.4.total_cmp(&b.4))
            .then(a.5.cmp(&b.5))
    });
    let mut csv = String::from("optimizer,eta,beta1,beta2,beta3,seed,final_loss,best_grad_l2\n");
    for (opt, eta, b1, b2, b3, seed, loss, best) in rows {
        csv.push_str(&format!(
            "{opt},{},{},{},{},{seed},{},{}\n",
            fmt_f64(eta),
            fmt_f64(b1),
            fmt_f64(b2),
            fmt_f64(b3),
            fmt_f64(loss),
            fmt_f64(best)
        ));
    }
    if let Err(e) = std::fs::write(out, csv) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return 2;
    }
    0
}

fn run_compare_to_csv(cfgs: &[RunConfig], eps_targets: &[f64], out: &Path) -> i32 {
    let rows = match harness::compare(cfgs, eps_targets) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let csv = compare_csv(&rows);
    if let Err(e) = std::fs::write(out, csv) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return 2;
    }
    0
}

fn cmd_verify(only: Option<&str>) -> i32 {
    let outcomes = verify::all_checks(only);
    if outcomes.is_empty() {
        eprintln!("no check matches filter {only:?}");
        return 1;
    }
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("check {:<20} {status}  {}", o.name, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed > 0 {
        1
    } else {
        0
    }
}

/// Run-record CSV: `iter,loss,grad_l2,grad_linf,event`. The event column
/// lists the event kinds recorded since the previous sample (deduplicated,
/// `;`-joined); the JSON format keeps the exact per-iteration event list.
pub fn run_record_csv(rec: &RunRecord) -> String {
    let mut out = String::from("iter,loss,grad_l2,grad_linf,event\n");
    let mut prev_iter: Option<u64> = None;
    for s in &rec.samples {
        let mut kinds: Vec<&str> = rec
            .events
            .iter()
            .filter(|e| e.iter <= s.iter && prev_iter.is_none_or(|p| e.iter > p))
            .map(|e| e.kind.as_str())
            .collect();
        kinds.dedup();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.iter,
            fmt_f64(s.loss),
            fmt_f64(s.grad_l2),
            fmt_f64(s.grad_linf),
            kinds.join(";")
        ));
        prev_iter = Some(s.iter);
    }
    // Events after the last sample (e.g. the divergence that truncated the
    // run) still need a row; metrics are unavailable there.
    let tail: Vec<&crate::harness::RunEvent> = rec
        .events
        .iter()
        .filter(|e| prev_iter.is_none_or(|p| e.iter > p))
        .collect();
    if !tail.is_empty() {
        let mut kinds: Vec<&str> = tail.iter().map(|e| e.kind.as_str()).collect();
        kinds.dedup();
        out.push_str(&format!("{},,,,{}\n", tail[0].iter, kinds.join(";")));
    }
    out
}

/// Comparison CSV: `optimizer,seed,final_loss,best_grad_l2,iters_to_eps`,
/// with the per-ε iteration counts `;`-joined inside the last column
/// (empty slot when the target was never reached).
pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("optimizer,seed,final_loss,best_grad_l2,iters_to_eps\n");
    for r in rows {
        let iters: Vec<String> = r
            .iters_to_eps
            .iter()
            .map(|v| v.map_or(String::new(), |i| i.to_string()))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.optimizer,
            r.seed,
            fmt_f64(r.final_loss),
            fmt_f64(r.best_grad_l2),
            iters.join(";")
        ));
    }
    out
}
