use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use unicycle_motion_cli::error::CliError;
use unicycle_motion_cli::runner::{
    apply_overrides, output_dir, run_compare, run_fit, run_follow, run_predict, run_simulate,
    Overrides,
};
use unicycle_motion_cli::scenario::load_scenario;

/// Unicycle motion control with feedback motion prediction and
/// time-governed safe path following.
#[derive(Parser)]
#[command(name = "unicycle-motion", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive the closed loop to a fixed goal; emit the trajectory and
    /// prediction-set snapshots
    Simulate(RunArgs),
    /// Emit prediction-set geometry for the initial state
    Predict(RunArgs),
    /// Time-governed safe path following with one prediction method
    Follow(RunArgs),
    /// Fit sums of sinusoids to the sine integral and report the table
    FitSi(RunArgs),
    /// Path following under all four prediction methods, with a
    /// travel-time table
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Prediction method override: ball|cone|diamond|reachable
    #[arg(long)]
    method: Option<String>,
    /// Steering mode override: bi|fwd|bwd
    #[arg(long)]
    mode: Option<String>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the multi-start fit
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated-time budget override, seconds
    #[arg(long)]
    max_time: Option<f64>,
}

fn run(command: &Command) -> Result<(), CliError> {
    let (args, name) = match command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Predict(a) => (a, "predict"),
        Command::Follow(a) => (a, "follow"),
        Command::FitSi(a) => (a, "fit-si"),
        Command::Compare(a) => (a, "compare"),
    };
    let overrides = Overrides {
        method: args.method.clone(),
        mode: args.mode.clone(),
        out: args.out.clone(),
        seed: args.seed,
        max_time: args.max_time,
    };
    let mut scenario = load_scenario(&args.scenario)?;
    apply_overrides(&mut scenario, &overrides)?;
    let out = output_dir(&scenario)?;

    match name {
        "simulate" => {
            let report = run_simulate(&scenario, &out)?;
            println!(
                "simulate: reached goal in {:.3} s, turning {:+.4} rad, data in {}",
                report.travel_time,
                report.turning_signed,
                out.display()
            );
        }
        "predict" => {
            let report = run_predict(&scenario, &out)?;
            for p in &report.predictions {
                println!(
                    "predict: {} radius-about-goal {:.4} m",
                    p.method, p.radius_about_goal
                );
            }
        }
        "follow" => {
            let report = run_follow(&scenario, &out)?;
            println!(
                "follow[{}]: path done in {:.3} s, min clearance {:.4} m, data in {}",
                report.method,
                report.travel_time,
                report.min_clearance,
                out.display()
            );
        }
        "fit-si" => {
            let report = run_fit(&scenario, &out, args.seed)?;
            for row in &report.fits {
                println!("fit-si: n={} rmse={:.3e}", row.order, row.rmse);
            }
        }
        "compare" => {
            let reports = run_compare(&scenario, &out)?;
            for r in &reports {
                println!(
                    "compare[{}]: travel time {:.3} s, average speed {:.4} m/s",
                    r.method, r.travel_time, r.average_speed
                );
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
