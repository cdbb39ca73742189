//! `ctap`: run, validate and compare three-well CTAP simulations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ctap_core::runner::{
    compare_runs, dt_halving_check, emit_outputs, parse_config, read_table, run, CompareOptions,
};
use ctap_core::{Error, RunConfig};

const PROVENANCE: &str = concat!("ctap ", env!("CARGO_PKG_VERSION"), " (", env!("CTAP_GIT_DESCRIBE"), ")");

const EXIT_USAGE: u8 = 1;
const EXIT_DISAGREE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "ctap", version, about = "Phase-space CTAP simulations in a three-well Bose-Hubbard model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write the table, report and plot script.
    ///
    /// Exit status: 0 converged, 2 converged with warnings,
    /// 3 invalidated by positive-P divergence, 1 configuration error.
    Run {
        /// TOML configuration file.
        config: PathBuf,
        /// Override [run] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override [run] trajectories.
        #[arg(long)]
        trajectories: Option<u64>,
        /// Override [output] dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override [run] workers (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also rerun at dt and dt/2 on a shared noise path and record the
        /// change of every observable in the report (three times the cost).
        #[arg(long)]
        dt_check: bool,
    },
    /// Compare two result tables sample by sample.
    ///
    /// Exit status: 0 all observables agree, 2 some disagree, 1 error.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Threshold in combined standard errors.
        #[arg(long, default_value_t = 5.0)]
        sigma: f64,
        /// Moving-average half-width in samples applied to both curves.
        #[arg(long, default_value_t = 0)]
        smoothing: usize,
    },
    /// Parse and validate a configuration without running it.
    ///
    /// Exit status: 0 valid, 2 valid with warnings, 1 invalid.
    Validate { config: PathBuf },
}

fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid configuration {}", path.display()))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    trajectories: Option<u64>,
    out_dir: Option<PathBuf>,
    workers: Option<usize>,
    dt_check: bool,
) -> anyhow::Result<u8> {
    let mut cfg = load(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(n) = trajectories {
        cfg.n_trajectories = n;
    }
    if let Some(d) = out_dir {
        cfg.output.dir = d;
    }
    if let Some(w) = workers {
        cfg.workers = (w > 0).then_some(w);
    }
    cfg.revalidate().context("invalid overrides")?;
    print_warnings(&cfg.warnings);

    let (ts, mut report) = run(&cfg)?;
    if dt_check {
        let (_, _, halving) = dt_halving_check(&cfg)?;
        report.dt_halving = Some(halving);
    }
    let written = emit_outputs(&ts, &report, &cfg.output, PROVENANCE)?;

    let last = ts.len() - 1;
    println!(
        "{}: {} of {} trajectories completed in {:.2} s",
        cfg.representation, report.trajectories_completed, report.trajectories_started, report.wall_time_s
    );
    for (j, pops) in ts.populations.iter().enumerate() {
        println!("N{}(t_p) = {:.6} ± {:.6}", j + 1, pops[last].value, pops[last].stderr);
    }
    if let Some(h) = &report.dt_halving {
        println!(
            "dt halving: max |delta| N1 {:.3e}, N2 {:.3e}, N3 {:.3e}, xi13 {:.3e}",
            h.max_abs_delta[0], h.max_abs_delta[1], h.max_abs_delta[2], h.max_abs_delta[3]
        );
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    print_warnings(&report.warnings[cfg.warnings.len()..]);
    println!("status: {:?}", report.status);
    Ok(report.status.exit_code() as u8)
}

fn cmd_compare(a: &Path, b: &Path, sigma: f64, smoothing: usize) -> anyhow::Result<u8> {
    if !(sigma > 0.0) {
        anyhow::bail!("--sigma must be positive");
    }
    let ta = read_table(a)?;
    let tb = read_table(b)?;
    let agreement = compare_runs(&ta, &tb, &CompareOptions { sigma, smoothing })?;
    for o in &agreement.observables {
        println!(
            "{:<5} max {:8.3} sigma at t = {:<8.3} max |diff| {:.4e}  {}",
            o.name,
            o.max_sigma,
            o.time_of_max,
            o.max_abs_diff,
            if o.passed { "agree" } else { "DISAGREE" }
        );
    }
    Ok(if agreement.passed { 0 } else { EXIT_DISAGREE })
}

fn cmd_validate(path: &Path) -> anyhow::Result<u8> {
    let cfg = load(path)?;
    println!(
        "{} run: {} trajectories, {} batches, {} steps of dt = {:.6e}, {} samples",
        cfg.representation,
        cfg.n_trajectories,
        cfg.n_batches,
        cfg.integration.steps,
        cfg.integration.dt,
        cfg.integration.sample_count()
    );
    print_warnings(&cfg.warnings);
    Ok(if cfg.warnings.is_empty() { 0 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            trajectories,
            out_dir,
            workers,
            dt_check,
        } => cmd_run(&config, seed, trajectories, out_dir, workers, dt_check),
        Command::Compare { a, b, sigma, smoothing } => cmd_compare(&a, &b, sigma, smoothing),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::AllDiverged(_)) => ExitCode::from(EXIT_DIVERGED),
                _ => ExitCode::from(EXIT_USAGE),
            }
        }
    }
}
