//! Command-line driver: `solve`, `evolve` and `bench`, each configured by a
//! JSON document. `--out` and `--seed` override the document's top-level
//! `out` and `seed` keys.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure.

pub mod config;
pub mod output;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::Error;
use crate::experiments::{
    make_instance, run_benchmark, run_sparsify, support_size, BenchOutput, Preset, SparsifyOutcome,
    DEFAULT_SEED,
};
use crate::solvers::{solve, Termination};

pub use config::{BenchConfig, ConfigError, EvolveConfig, SolveConfig};

#[derive(Debug, Parser)]
#[command(
    name = "motion-deconv",
    version,
    about = "Sparse deconvolution with a motion-PDE accelerated FPC Bregman solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct a spike field from blurred observations.
    Solve(CommonArgs),
    /// Run the standalone motion PDE and dump snapshots.
    Evolve(CommonArgs),
    /// Run benchmark presets and write one CSV table per preset.
    Bench(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration. `evolve` and `bench` fall back to defaults without one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Blowup { .. } => CliError::Numerical(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn load<T: for<'de> serde::Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        Some(p) => load_required(p),
        None => Ok(T::default()),
    }
}

fn load_required<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(config::parse(&text)?)
}

fn out_dir(flag: &Option<PathBuf>, cfg: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .clone()
        .or_else(|| cfg.clone())
        .ok_or_else(|| CliError::Config("`out`: no output directory given".into()))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Tolerance => "tolerance",
        Termination::Residual => "residual",
        Termination::IterationLimit => "iteration_limit",
        Termination::OuterLimit => "outer_limit",
    }
}

#[derive(Serialize)]
struct SolveSummary {
    variant: &'static str,
    seed: u64,
    rows: usize,
    cols: usize,
    noise_std: f64,
    snr_db: Option<f64>,
    total_inner_iterations: usize,
    outer_iterations: usize,
    termination: &'static str,
    final_residual: f64,
    final_l1: f64,
    final_rel_error: Option<f64>,
    best_error: Option<f64>,
    best_iterate_index: usize,
    wall_seconds: f64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn cmd_solve(args: &CommonArgs) -> Result<(), CliError> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("solve needs --config".into()))?;
    let cfg: SolveConfig = load_required(path)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let spec = cfg.instance.to_spec(seed)?;
    let inst = make_instance(&spec)?;
    let truth = inst.truth_field();
    let params = cfg.solver.to_params(&truth)?;
    let dir = out_dir(&args.out, &cfg.out)?;

    let (u, rec) = solve(&inst.operator, &inst.f_observed, &params)?;

    output::write_image(&dir, "reconstruction", &u)?;
    output::write_image(&dir, "truth", &truth)?;
    output::write_image(&dir, "observed", &inst.f_observed)?;
    output::write_field_csv(&dir.join("reconstruction.field.csv"), &u)?;

    let mut w = csv::Writer::from_path(dir.join("iterations.csv")).map_err(io::Error::from)?;
    w.write_record(["iter", "residual", "l1", "rel_error"])
        .map_err(io::Error::from)?;
    for i in 0..rec.residual_history.len() {
        let err = rec.error_history.get(i).copied().unwrap_or(f64::NAN);
        w.write_record([
            (i + 1).to_string(),
            output::fmt_real(rec.residual_history[i]),
            output::fmt_real(rec.l1_history[i]),
            output::fmt_real(err),
        ])
        .map_err(io::Error::from)?;
    }
    w.flush()?;

    let final_rel_error = if truth.l2_norm() > 0.0 {
        Some(crate::experiments::rel_error(&u, &truth)?)
    } else {
        None
    };
    let summary = SolveSummary {
        variant: if params.pde.is_some() {
            "pde_fpc_bregman"
        } else {
            "fpc_bregman"
        },
        seed,
        rows: u.grid().rows(),
        cols: u.grid().cols(),
        noise_std: inst.noise_std,
        snr_db: finite(inst.snr_db),
        total_inner_iterations: rec.total_inner_iterations,
        outer_iterations: rec.outer_iterations,
        termination: termination_name(rec.termination),
        final_residual: inst.operator.forward(&u)?.sub(&inst.f_observed)?.l2_norm(),
        final_l1: u.l1_norm(),
        final_rel_error,
        best_error: finite(rec.best_error),
        best_iterate_index: rec.best_iterate_index,
        wall_seconds: rec.wall_seconds,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{} iterations ({}), residual {:.3e}, rel error {}",
        rec.total_inner_iterations,
        summary.termination,
        summary.final_residual,
        final_rel_error.map_or("n/a".into(), |e| format!("{e:.3e}"))
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::from)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn cmd_evolve(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: EvolveConfig = load(args.config.as_deref())?;
    let spec = cfg.to_spec()?;
    let dir = out_dir(&args.out, &cfg.out)?;
    let outcome = run_sparsify(&spec)?;
    write_evolution(&dir, &outcome)?;
    let last = &outcome.final_field;
    println!(
        "{} steps, t = {:.6e}, support {} -> {}, H {:.3e} -> {:.3e}",
        outcome.record.len(),
        outcome.record.times.last().copied().unwrap_or(0.0),
        support_size(&outcome.initial),
        support_size(last),
        outcome.initial_energy,
        outcome
            .record
            .residual_history
            .last()
            .copied()
            .unwrap_or(f64::NAN),
    );
    Ok(())
}

/// Snapshots (`snapshot_NNNNN.{pgm,scale,field.csv}`) and `evolve.csv`.
pub fn write_evolution(dir: &Path, outcome: &SparsifyOutcome) -> Result<(), CliError> {
    for (n, u) in &outcome.snapshots {
        let stem = format!("snapshot_{n:05}");
        output::write_image(dir, &stem, u)?;
        output::write_field_csv(&dir.join(format!("{stem}.field.csv")), u)?;
    }
    output::write_image(dir, "truth", &outcome.truth)?;

    let rec = &outcome.record;
    let mut w = csv::Writer::from_path(dir.join("evolve.csv")).map_err(io::Error::from)?;
    w.write_record(["step", "time", "dt", "l1", "residual"])
        .map_err(io::Error::from)?;
    w.write_record([
        "0".to_string(),
        output::fmt_real(0.0),
        output::fmt_real(0.0),
        output::fmt_real(outcome.initial.l1_norm()),
        output::fmt_real(outcome.initial_energy),
    ])
    .map_err(io::Error::from)?;
    for i in 0..rec.len() {
        w.write_record([
            (i + 1).to_string(),
            output::fmt_real(rec.times[i]),
            output::fmt_real(rec.dts[i]),
            output::fmt_real(rec.l1_history[i]),
            output::fmt_real(rec.residual_history[i]),
        ])
        .map_err(io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_bench(args: &CommonArgs) -> Result<(), CliError> {
    let cfg: BenchConfig = load(args.config.as_deref())?;
    let presets = cfg.presets()?;
    let overrides = cfg.overrides(args.seed)?;
    let dir = out_dir(&args.out, &cfg.out)?;
    for preset in presets {
        match run_benchmark(preset, &overrides)? {
            BenchOutput::Table(t) => {
                output::write_bench_csv(&dir.join(format!("{}.csv", preset.name())), &t.rows)?;
                let title = match preset {
                    Preset::AccuracyNoisy => format!(
                        "{} (seed {}, SNR {:.2} dB)",
                        preset, t.instance.seed, t.instance.snr_db
                    ),
                    _ => format!("{} (seed {})", preset, t.instance.seed),
                };
                print!("{}", output::format_bench_table(&title, &t.rows));
                println!();
            }
            BenchOutput::Evolution(outcome) => {
                let sub = dir.join(preset.name());
                fs::create_dir_all(&sub)?;
                write_evolution(&sub, &outcome)?;
                println!(
                    "{preset}: {} steps, support {} -> {}\n",
                    outcome.record.len(),
                    support_size(&outcome.initial),
                    support_size(&outcome.final_field)
                );
            }
        }
    }
    Ok(())
}
