//! Command-line front end for the planning toolkit: loads scenario files,
//! runs the planners, audits energy feasibility, and sweeps parameters into
//! comparison tables.
//!
//! Exit codes are a stable contract: 0 success, 1 input error, 2 infeasible
//! scenario, 3 solver failure. Set `BEAMPLAN_LOG=1` for progress lines on
//! stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "beamplan",
    version,
    about = "Trajectory and transmit-power planning for a laser-powered relay aircraft"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the two-circle tour with constant transmit power.
    PlanDoubleCircle {
        /// Scenario file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving plan.txt and double_circle.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Jointly optimize the trajectory and the transmit power.
    Optimize {
        /// Scenario file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Starting point: the two-circle tour, the single-circle
        /// baseline, or a trajectory file.
        #[arg(long, value_enum, default_value_t = InitKind::Double)]
        init: InitKind,
        /// Trajectory CSV used when --init=file.
        #[arg(long)]
        init_file: Option<PathBuf>,
        /// Directory receiving trajectory.csv, trace.csv, and summary.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Re-check the energy balance of a trajectory file.
    Audit {
        /// Trajectory CSV to audit.
        trajectory: PathBuf,
        /// Scenario file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Also write the trajectory with rate, harvest_J, and
        /// propulsion_J columns appended.
        #[arg(long)]
        annotate: Option<PathBuf>,
    },
    /// Compare the three methods across a parameter sweep.
    Sweep {
        /// Scenario file (flat `key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Swept parameter.
        #[arg(long, value_enum)]
        var: SweepVar,
        /// Comma-separated positive values of the swept parameter.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Cells computed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Seed for any randomized features; recorded in the table.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// How `optimize` picks its starting trajectory.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitKind {
    /// Two-circle tour (harvest circle, transition, communication circle).
    Double,
    /// Single circle above the ground station.
    Single,
    /// Trajectory CSV given via --init-file.
    File,
}

/// Which scenario parameter a sweep varies.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepVar {
    /// Mission horizon in seconds.
    #[value(name = "T")]
    T,
    /// Laser transmit power in watts.
    #[value(name = "phi")]
    Phi,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests arrive here too; only genuine
            // argument problems count as input errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), commands::Failure> {
    match cli.command {
        Command::PlanDoubleCircle { config, out_dir } => {
            commands::plan_double_circle(&config, &out_dir)
        }
        Command::Optimize {
            config,
            init,
            init_file,
            out_dir,
        } => commands::optimize(&config, init, init_file.as_deref(), &out_dir),
        Command::Audit {
            trajectory,
            config,
            annotate,
        } => commands::audit(&trajectory, &config, annotate.as_deref()),
        Command::Sweep {
            config,
            var,
            values,
            jobs,
            seed,
            out,
        } => commands::sweep(&config, var, &values, jobs, seed, out.as_deref()),
    }
}
