//! `mimocap`: capacity experiments for multi-antenna fading channels from
//! declarative TOML scenarios.
//!
//! ```text
//! mimocap run <config.toml> [--set key=value]... [--out report.csv]
//! mimocap sweep <config.toml> --param gamma --values 0.5,1,2,4 [...]
//! ```
//!
//! Results go to a versioned CSV (deterministic: a rerun with the same seed
//! is byte-identical) and a human summary on stdout; timings are printed
//! separately from the summary. `MIMOCAP_THREADS` caps the worker threads
//! used to evaluate sweep points in parallel.
//!
//! Exit codes: 0 success, 2 parse error, 3 validation error, 4 solver
//! non-convergence, 5 internal numerical error; failures print one
//! machine-parsable line `error kind=<kind> msg="..."` on stderr.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use mimo_capacity_cli::config::RawConfig;
use mimo_capacity_cli::error::{CliError, ErrKind};
use mimo_capacity_cli::report::{summarize, to_csv, ReportRow};
use mimo_capacity_cli::tasks::{execute_point, sweep_target};

#[derive(Parser)]
#[command(name = "mimocap", about = "MIMO channel capacity experiments", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the task described by a scenario config.
    Run {
        config: PathBuf,
        /// Override config keys, e.g. --set task.n_samples=50000
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// CSV output path (default: <config stem>.report.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the task once per value of a swept numeric parameter.
    Sweep {
        config: PathBuf,
        /// One of: gamma, sigma2, eta, k_factor, est_var, n_samples,
        /// mc_samples, iters, grid_levels, grid_phases, grid_max_amp.
        #[arg(long)]
        param: String,
        /// Comma-separated numeric values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("MIMOCAP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.kind.exit_code()
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run { config, set, out } => {
            let (value, stem) = load(&config, &set)?;
            let raw = RawConfig::from_value(value)?;
            let scenario = raw.expand(&stem)?;
            let started = Instant::now();
            let row = execute_point(&scenario, "", None, 0)?;
            let timing = vec![started.elapsed().as_secs_f64() * 1e3];
            emit(&[row], &timing, out.as_deref(), &config)
        }
        Cmd::Sweep { config, param, values, set, out } => {
            let (base, stem) = load(&config, &set)?;
            if values.is_empty() {
                return Err(CliError::new(ErrKind::Parse, "sweep needs at least one value"));
            }
            let (path, integral) = sweep_target(&param).ok_or_else(|| {
                CliError::new(
                    ErrKind::Validation,
                    format!("parameter {param:?} is not sweepable"),
                )
            })?;
            // Each point expands its own config so validation sees the
            // swept value; rows stay ordered by sweep index regardless of
            // which worker finishes first.
            let results: Vec<Result<(ReportRow, f64), CliError>> = values
                .par_iter()
                .enumerate()
                .map(|(i, &v)| {
                    let mut value = base.clone();
                    let literal = if integral {
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(CliError::new(
                                ErrKind::Validation,
                                format!("{param} must be a nonnegative integer, got {v}"),
                            ));
                        }
                        format!("{path}={}", v as u64)
                    } else {
                        format!("{path}={v}")
                    };
                    RawConfig::apply_override(&mut value, &literal)?;
                    let raw = RawConfig::from_value(value)?;
                    let scenario = raw.expand(&stem)?;
                    let started = Instant::now();
                    let row = execute_point(&scenario, &param, Some(v), i as u64)?;
                    Ok((row, started.elapsed().as_secs_f64() * 1e3))
                })
                .collect();
            let mut rows = Vec::with_capacity(results.len());
            let mut timing = Vec::with_capacity(results.len());
            for r in results {
                let (row, ms) = r?;
                rows.push(row);
                timing.push(ms);
            }
            emit(&rows, &timing, out.as_deref(), &config)
        }
    }
}

fn load(path: &Path, overrides: &[String]) -> Result<(toml::Value, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(ErrKind::Parse, format!("cannot read {}: {e}", path.display()))
    })?;
    let mut value = RawConfig::parse_toml(&text)?;
    for spec in overrides {
        RawConfig::apply_override(&mut value, spec)?;
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    Ok((value, stem))
}

fn emit(
    rows: &[ReportRow],
    timing_ms: &[f64],
    out: Option<&Path>,
    config: &Path,
) -> Result<(), CliError> {
    let csv = to_csv(rows)?;
    let out_path = match out {
        Some(p) => p.to_path_buf(),
        None => config.with_extension("report.csv"),
    };
    std::fs::write(&out_path, &csv).map_err(|e| {
        CliError::new(ErrKind::Numerical, format!("cannot write {}: {e}", out_path.display()))
    })?;
    print!("{}", summarize(rows));
    println!("report: {}", out_path.display());
    for (i, ms) in timing_ms.iter().enumerate() {
        println!("timing: row {i}: {ms:.1} ms");
    }
    Ok(())
}
