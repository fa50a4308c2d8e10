//! `maglev`: simulation runs, calibration fits, LQR design reports and
//! stiffness analysis from JSON scenario files.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 simulation
//! diverged, 3 solver failure or non-convergence.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "maglev", version, about = "Magnetic levitation modeling, control and simulation")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the closed loop; writes a CSV log, a summary JSON and a plotting script.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "sim_out")]
        out: PathBuf,
        /// Independent runs with seeds seed, seed+1, ..., in parallel.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// Fit the coil model to field measurements.
    Calibrate {
        /// CSV with columns px,py,pz,i1..i8,bx,by,bz.
        #[arg(long)]
        data: PathBuf,
        /// Initial model JSON; the built-in layout when omitted.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Fitted model JSON; the fit report goes next to it as *.report.json.
        #[arg(long)]
        out: PathBuf,
        /// Hold out every n-th sample for validation (0 keeps all for fitting).
        #[arg(long, default_value_t = 5)]
        holdout_every: usize,
        /// Levenberg–Marquardt iteration cap.
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
    },
    /// Per-axis translation LQR: gains, closed-loop poles, Riccati residual.
    DesignLqr {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Open-loop stiffness at a hover pose.
    AnalyzeStiffness {
        #[arg(long)]
        scenario: PathBuf,
        /// x,y,z [m] optionally followed by roll,pitch,yaw [deg]; defaults to
        /// the scenario's starting pose.
        #[arg(long, allow_hyphen_values = true)]
        pose: Option<String>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(commands::EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    let verbose = !cli.quiet;
    let result = match cli.command {
        Command::Simulate { scenario, out, seeds } => commands::simulate(&scenario, &out, seeds, verbose),
        Command::Calibrate { data, init, out, holdout_every, max_iterations } => {
            commands::calibrate(&data, init.as_deref(), &out, holdout_every, max_iterations, verbose)
        }
        Command::DesignLqr { scenario, out } => commands::design_lqr(&scenario, out.as_deref(), verbose),
        Command::AnalyzeStiffness { scenario, pose, out } => commands::analyze_stiffness(&scenario, pose.as_deref(), out.as_deref(), verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
