//! Subcommands behind the `thinstrip` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    check_location, default_delta, sweep_convergence, FitOutcome, LocationOptions, SweepOptions,
};
use crate::config::RunConfig;
use crate::eigen::{solve_smallest_with, SolverOptions};
use crate::error::Error;
use crate::geometry::{solve_jacobi, validate};
use crate::operator::assemble_eps;

#[derive(Debug, Parser)]
#[command(
    name = "thinstrip",
    about = "Neumann eigenpairs on thin curved strips",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory (overrides `output_dir` in the config)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// random seed (overrides `seed` in the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bound constant, validity radius and positivity of the Jacobian
    Validate,
    /// Lowest eigenvalues as CSV
    Spectrum,
    /// Extremum localization report per mode
    Hotspots,
    /// Convergence rates over a list of half-widths
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectrum => "spectrum",
            Command::Hotspots => "hotspots",
            Command::Sweep => "sweep",
        }
    }
}

/// An error tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: Into<Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// every verdict in scope held
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &str,
    files: &mut Vec<PathBuf>,
) -> Result<(), StageError> {
    let path = dir.join(name);
    fs::write(&path, contents).stage("output")?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, StageError> {
    let mut s = serde_json::to_string_pretty(value).stage("output")?;
    s.push('\n');
    Ok(s)
}

/// Execute `command` for an already-loaded configuration.
pub fn run(command: Command, config: &RunConfig) -> Result<Outcome, StageError> {
    config
        .validate(command != Command::Validate)
        .stage("config")?;
    let out_dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).stage("output")?;
    let eps_list = config.epsilon_list().stage("config")?;
    let grid = config.grid;
    let solver = SolverOptions {
        tol: config.tolerances.solver,
        seed: config.seed,
        ..SolverOptions::default()
    };
    let mut files = Vec::new();
    let mut passed = true;

    match command {
        Command::Validate => {
            let mut reports = Vec::new();
            for &e in &eps_list {
                let geom = config.geometry.build(e).stage("config")?;
                let report = validate(&geom, grid.n_s, grid.n_t).stage("geometry")?;
                passed &= report.valid;
                reports.push(report);
            }
            write_file(&out_dir, "validity.json", &to_json(&reports)?, &mut files)?;
            let geom = config.geometry.build(eps_list[0]).stage("config")?;
            if let Ok(metric) = solve_jacobi(&geom, grid.n_s, grid.n_t) {
                write_file(&out_dir, "metric.txt", &metric.dump(), &mut files)?;
            }
        }
        Command::Spectrum => {
            let mut csv =
                String::from("run_id,geometry,epsilon,n,lambda,residual,degenerate_flag\n");
            for (k, &e) in eps_list.iter().enumerate() {
                let geom = config.geometry.build(e).stage("config")?;
                let metric = solve_jacobi(&geom, grid.n_s, grid.n_t).stage("geometry")?;
                let forms = assemble_eps(&metric).stage("operator")?;
                let pairs = solve_smallest_with(&forms, config.max_mode, &solver).stage("eigen")?;
                for (idx, pair) in pairs.iter().enumerate() {
                    csv.push_str(&format!(
                        "{},{},{:.17e},{},{:.17e},{:.6e},{}\n",
                        config.run_id,
                        config.geometry.name(),
                        e,
                        idx + 1,
                        pair.value,
                        pair.residual,
                        u8::from(pair.degenerate)
                    ));
                }
                if k == 0 {
                    write_file(&out_dir, "metric.txt", &metric.dump(), &mut files)?;
                }
            }
            write_file(&out_dir, "spectrum.csv", &csv, &mut files)?;
        }
        Command::Hotspots => {
            if eps_list.len() != 1 {
                return Err(Error::config(
                    "epsilon",
                    "hotspots takes a single half-width",
                ))
                .stage("config");
            }
            let geom = config.geometry.build(eps_list[0]).stage("config")?;
            let metric = solve_jacobi(&geom, grid.n_s, grid.n_t).stage("geometry")?;
            let forms = assemble_eps(&metric).stage("operator")?;
            let pairs = solve_smallest_with(&forms, config.max_mode, &solver).stage("eigen")?;
            let opts = LocationOptions {
                flat_top_tol: config.tolerances.flat_top,
                grad_tol: config.tolerances.grad,
            };
            for n in 2..=config.max_mode {
                let pair = &pairs[n - 1];
                if pair.degenerate {
                    passed = false;
                }
                let delta = config
                    .delta
                    .unwrap_or_else(|| default_delta(n, geom.length()));
                let report = check_location(pair, n, delta, &forms, &opts).stage("analysis")?;
                passed &= report.passed();
                write_file(
                    &out_dir,
                    &format!("hotspots_n{n}.json"),
                    &to_json(&report)?,
                    &mut files,
                )?;
                write_file(
                    &out_dir,
                    &format!("psi_n{n}.txt"),
                    &forms.grid().dump(&pair.vector),
                    &mut files,
                )?;
            }
            write_file(&out_dir, "metric.txt", &metric.dump(), &mut files)?;
        }
        Command::Sweep => {
            let geom = config.geometry.build(eps_list[0]).stage("config")?;
            let opts = SweepOptions {
                base_n_s: grid.n_s,
                n_t: grid.n_t,
                max_n_s: grid.max_n_s,
                refine: grid.refine,
                max_mode: config.max_mode,
                solver,
                power_tol: config.tolerances.power,
            };
            for observable in &config.observables {
                let report = sweep_convergence(&geom, &eps_list, config.mode, *observable, &opts)
                    .stage("analysis")?;
                passed &= match &report.fit {
                    FitOutcome::Fitted(fit) => fit.slope >= config.min_slope,
                    FitOutcome::ExactSkipped => true,
                    FitOutcome::Skipped { .. } => false,
                };
                let stem = format!("sweep_{}", observable.name());
                write_file(
                    &out_dir,
                    &format!("{stem}.json"),
                    &to_json(&report)?,
                    &mut files,
                )?;
                write_file(
                    &out_dir,
                    &format!("{stem}.csv"),
                    &report.to_csv(),
                    &mut files,
                )?;
            }
        }
    }
    Ok(Outcome { passed, files })
}

/// Parse arguments, run, and map the outcome onto an exit code:
/// 0 when every verdict held, 1 when a verdict failed, 2 on errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return 2;
    };
    let mut config = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [config] {}: {e}", path.display());
            return 2;
        }
    };
    if let Some(out) = cli.out {
        config.output_dir = Some(out);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match run(cli.command, &config) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                println!("{}: all verdicts hold", cli.command.name());
                0
            } else {
                println!("{}: a verdict failed", cli.command.name());
                1
            }
        }
        Err(e) => {
            eprintln!("error {e}");
            2
        }
    }
}
