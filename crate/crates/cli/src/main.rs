//! `womkf` — command-line front end for the cascaded Kalman filter chains.
//!
//! Subcommands: `simulate` (one trajectory), `fixpoints` (stationary
//! variances), `mse` (Monte Carlo errors), `trace` (variance recursion
//! histories), `coverage` (interval calibration), `compare` (paired
//! private-prior vs word-of-mouth errors), and `verify` (re-read an output
//! directory and revalidate it).
//!
//! Exit codes: 0 on success, 1 when a computation or residual check fails,
//! 2 on bad input (flags, config file, or parameter validation).

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod output;
mod settings;
mod verify;

use settings::{CommonArgs, Settings};
use womkf::chain::Setup;
use womkf::riccati::{self, FixedPointReport, WomMethod};

/// A failed run, split by whose fault it was.
#[derive(Debug)]
pub enum Failure {
    /// The invocation was wrong: bad flag value, unreadable config,
    /// inconsistent parameters. Exit code 2.
    Input(String),
    /// The computation refused to stand behind its numbers: no convergence,
    /// bracket without a sign change, residual check failed, unwritable
    /// output. Exit code 1.
    Internal(String),
}

impl Failure {
    /// Classify a library error: validation problems are the caller's,
    /// numerical problems are ours.
    pub fn from_error(err: womkf::Error) -> Self {
        match err {
            womkf::Error::InvalidParameter(_)
            | womkf::Error::AgentIndex { .. }
            | womkf::Error::PolynomialDegree { .. } => Failure::Input(err.to_string()),
            womkf::Error::NoConvergence { .. }
            | womkf::Error::BracketSign { .. }
            | womkf::Error::ZeroGain { .. }
            | womkf::Error::ResidualCheck { .. } => Failure::Internal(err.to_string()),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(msg) | Failure::Internal(msg) => msg,
        }
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(2),
            Failure::Internal(_) => ExitCode::from(1),
        }
    }
}

impl From<womkf::Error> for Failure {
    fn from(err: womkf::Error) -> Self {
        Failure::from_error(err)
    }
}

#[derive(Parser)]
#[command(
    name = "womkf",
    version,
    about = "Cascaded Kalman filter chains: private-prior vs word-of-mouth",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory and its injected measurement noises
    Simulate(CommonArgs),
    /// Solve and report the stationary variances of each chain
    Fixpoints(CommonArgs),
    /// Estimate Monte Carlo squared errors against the stationary theory
    Mse(CommonArgs),
    /// Trace the variance recursions from chosen initial conditions
    Trace(CommonArgs),
    /// Measure one-step-ahead interval coverage for one agent
    Coverage(CommonArgs),
    /// Run both setups on identical noise and compare agent by agent
    Compare(CommonArgs),
    /// Re-read an output directory and revalidate its numbers
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Output directory written by a previous run
    #[arg(long, value_name = "DIR")]
    out: std::path::PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => settings::resolve("simulate", &args).and_then(run_simulate),
        Command::Fixpoints(args) => settings::resolve("fixpoints", &args).and_then(run_fixpoints),
        Command::Mse(args) => settings::resolve("mse", &args).and_then(run_mse),
        Command::Trace(args) => settings::resolve("trace", &args).and_then(run_trace),
        Command::Coverage(args) => settings::resolve("coverage", &args).and_then(run_coverage),
        Command::Compare(args) => settings::resolve("compare", &args).and_then(run_compare),
        Command::Verify(args) => verify::run(&args.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.exit_code()
        }
    }
}

/// Stationary reports for every requested setup, in request order. The
/// word-of-mouth point is solved twice (bisection and direct iteration)
/// and the two must agree to 1e-9 relative; bisection is authoritative.
fn solve_fixed_points(settings: &Settings) -> Result<Vec<FixedPointReport>, Failure> {
    let mut reports = Vec::with_capacity(settings.setups.len());
    for &setup in &settings.setups {
        let report = match setup {
            Setup::Pp => riccati::pp_cascade_fixed_points(&settings.params)?,
            Setup::Wom => {
                let bis =
                    riccati::wom_fixed_point(&settings.params, WomMethod::BisectionOnFg, settings.tol)?;
                let iter = riccati::wom_fixed_point(
                    &settings.params,
                    WomMethod::ContractionIteration,
                    settings.tol,
                )?;
                let p_bis = bis.agents[0].pred_var;
                let p_iter = iter.agents[0].pred_var;
                let diff = (p_bis - p_iter).abs() / p_bis;
                if diff > 1e-9 {
                    return Err(Failure::Internal(format!(
                        "word-of-mouth solvers disagree: bisection {p_bis}, iteration {p_iter} \
                         (relative difference {diff:.3e} > 1e-9)"
                    )));
                }
                println!(
                    "WoM cross-check: iteration ({} steps) matches bisection ({} steps) \
                     within {:.3e}",
                    iter.iterations, bis.iterations, diff
                );
                bis
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

fn run_simulate(settings: Settings) -> Result<(), Failure> {
    let traj = womkf::model::simulate(&settings.params, settings.horizon, settings.sim_seed)?;
    let n = traj.horizon() as f64;
    let mean = traj.states.iter().sum::<f64>() / n;
    let min = traj.states.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = traj.states.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "simulated {} steps with seed {} ({})",
        traj.horizon(),
        traj.seed,
        settings.seed_source.label()
    );
    println!(
        "  initial state {:.6}, state mean {:.6}, min {:.6}, max {:.6}",
        traj.initial_state, mean, min, max
    );
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let path = output::write_trajectory_csv(&dir, &traj)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}

fn run_fixpoints(settings: Settings) -> Result<(), Failure> {
    let reports = solve_fixed_points(&settings)?;
    for report in &reports {
        output::print_fixpoint_table(report);
    }
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let refs: Vec<&FixedPointReport> = reports.iter().collect();
        let path = output::write_fixpoints_csv(&dir, &refs)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}

fn run_mse(settings: Settings) -> Result<(), Failure> {
    let report = womkf::experiments::run_mse(&settings.experiment_config())?;
    output::print_mse_table(&report);
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let path = output::write_mse_csv(&dir, &report)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}

fn run_trace(settings: Settings) -> Result<(), Failure> {
    let traces = womkf::experiments::run_convergence_trace(&settings.experiment_config())?;
    let targets = solve_fixed_points(&settings)?;
    let refs: Vec<&FixedPointReport> = targets.iter().collect();
    output::print_trace_summary(&traces, &refs);
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let path = output::write_trace_csv(&dir, &traces)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}

fn run_coverage(settings: Settings) -> Result<(), Failure> {
    let reports =
        womkf::experiments::run_coverage(&settings.experiment_config(), settings.agent)?;
    output::print_coverage_summary(&reports);
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let path = output::write_coverage_csv(&dir, &reports)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}

fn run_compare(settings: Settings) -> Result<(), Failure> {
    let cmps = womkf::experiments::paired_comparison(&settings.experiment_config())?;
    println!(
        "paired errors over {} seeds, K={} (burn-in {}):",
        settings.seeds.len(),
        settings.horizon,
        settings.burn_in
    );
    output::print_compare_summary(&cmps);
    if let Some(dir) = output::prepare_out_dir(&settings)? {
        let path = output::write_compare_csv(&dir, &cmps)?;
        println!("wrote {}", path.display());
        println!("wrote {}", dir.join("manifest.txt").display());
    }
    Ok(())
}
