use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Simulate CARMA(p,q)-Hawkes processes by thinning and check the output.
#[derive(Debug, Parser)]
#[command(name = "carma-hawkes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate replications and write `events_<k>.csv` plus `events_<k>.json`.
    Simulate {
        /// Model spec JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        horizon: f64,
        /// Replication k uses seed + k.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Simulate even if the model fails validation.
        #[arg(long)]
        force: bool,
        /// Also write `trace_<k>.csv` with λ_t and λ̄_t sampled every DT.
        #[arg(long, value_name = "DT")]
        trace_intensity: Option<f64>,
    },
    /// Print the validation report as JSON; exit 3 if the model is not admissible.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Residual KS diagnostics of an event file against a model.
    Diagnose {
        #[arg(long)]
        model: PathBuf,
        /// Event CSV; metadata is read from the JSON file with the same stem.
        #[arg(long)]
        events: PathBuf,
        /// Horizon, when there is no metadata file.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Throughput and acceptance ratio; runs the built-in parameter sets
    /// when no model is given.
    Bench {
        #[arg(long)]
        model: Vec<PathBuf>,
        #[arg(long, default_value_t = 1000.0)]
        horizon: f64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            model,
            horizon,
            seed,
            reps,
            out,
            force,
            trace_intensity,
        } => commands::simulate(&commands::RunConfig {
            model,
            horizon,
            seed,
            replications: reps,
            output_dir: out,
            override_validation: force,
            trace_step: trace_intensity,
        }),
        Command::Validate { model } => commands::validate(&model),
        Command::Diagnose {
            model,
            events,
            horizon,
            out,
        } => commands::diagnose(&model, &events, horizon, &out),
        Command::Bench {
            model,
            horizon,
            reps,
            seed,
            force,
        } => commands::bench(&model, horizon, reps, seed, force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
