//! `zeta-stepup`: batch front end for analysis, simulation, gain sweeps,
//! sizing and the topology comparison table.

mod commands;
mod error;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "zeta-stepup",
    version,
    about = "High step-up converter toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args)]
pub struct Output {
    /// Output directory; results go to stdout when omitted (analyze, compare, design)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
pub struct SimFlags {
    /// Integration steps per switching period
    #[arg(long)]
    steps: Option<usize>,
    /// Convergence tolerance on the period-boundary state
    #[arg(long)]
    tol: Option<f64>,
    /// Period limit, or the exact period count with --no-converge
    #[arg(long)]
    periods: Option<usize>,
    /// Start from the closed-form operating point
    #[arg(long)]
    warm: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form steady-state report
    Analyze {
        params: PathBuf,
        /// Capacitor ripple target in volts; adds the minimum capacitances
        #[arg(long)]
        ripple: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Switched simulation to periodic steady state
    Simulate {
        params: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Run exactly --periods periods and skip the convergence test
        #[arg(long)]
        no_converge: bool,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Gain-versus-duty table for the compared topologies
    SweepGain {
        #[arg(long, default_value_t = 2.0)]
        n: f64,
        /// Inclusive duty grid as start:stop:step
        #[arg(long, default_value = "0.05:0.95:0.05")]
        duty_range: String,
        /// Comma-separated topology ids (default: all)
        #[arg(long, value_delimiter = ',')]
        topologies: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Size the converter for a requirement file
    Design {
        spec: PathBuf,
        /// Simulate every feasible candidate
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Component counts and gains of all topologies at the file's (D, n)
    Compare {
        params: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            params,
            ripple,
            output,
        } => commands::analyze(&params, ripple, &output),
        Command::Simulate {
            params,
            sim,
            no_converge,
            out,
        } => commands::simulate(&params, &sim, no_converge, &out),
        Command::SweepGain {
            n,
            duty_range,
            topologies,
            out,
            format,
        } => commands::sweep_gain(n, &duty_range, &topologies, &out, format),
        Command::Design {
            spec,
            verify,
            sim,
            out,
        } => commands::design(&spec, verify, &sim, out.as_deref()),
        Command::Compare { params, output } => commands::compare(&params, &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
