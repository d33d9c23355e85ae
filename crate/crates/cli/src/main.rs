use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use rtvlab_core::{Error, ErrorClass};

mod commands;
mod config;

use commands::{BarrierArgs, FrontierArgs, GenArgs, RtvArgs, SliceArgs, SweepArgs, TrainArgs, TreeArgs};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid configuration or input (the offending field is named)
  3  file or directory could not be read or written
  4  training diverged (the failing width/seed cell is named)
  5  a numerical estimate did not converge

Settings come from flags, then the --config JSON file, then defaults.
The seed falls back to the RTVLAB_SEED environment variable, then 0.";

#[derive(Parser, Debug)]
#[command(
    name = "rtvlab",
    version,
    about = "Barrier scores, Radon total variation diagnostics and width sweeps for axis-aligned box targets",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct GlobalArgs {
    /// JSON config file; flags given on the command line override its fields
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed (fallback: RTVLAB_SEED, then 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Progress on stderr; repeat for more
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a labelled box dataset into train/val/test CSVs
    #[command(after_help = EXIT_CODES)]
    Gen(GenArgs),
    /// Fit a Gini tree on a dataset and export its positive boxes
    #[command(after_help = EXIT_CODES)]
    Tree(TreeArgs),
    /// Train one shallow ReLU network on a dataset
    #[command(after_help = EXIT_CODES)]
    Train(TrainArgs),
    /// Train every (width, seed) cell and write a run directory
    #[command(after_help = EXIT_CODES)]
    Sweep(SweepArgs),
    /// First MSE-target crossings and the proxy there, from a sweep run
    #[command(after_help = EXIT_CODES)]
    Frontier(FrontierArgs),
    /// Barrier calibration error and RTV bound along a lambda ladder
    #[command(after_help = EXIT_CODES)]
    Barrier(BarrierArgs),
    /// Radon total variation studies
    #[command(after_help = EXIT_CODES)]
    Rtv(RtvArgs),
    /// Evaluate a model, tree or barrier score on a 2-D slice grid
    #[command(after_help = EXIT_CODES)]
    Slice(SliceArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Schema => 2,
        ErrorClass::Io => 3,
        ErrorClass::Training => 4,
        ErrorClass::Numerics => 5,
    }
}

fn run(cli: Cli) -> rtvlab_core::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => commands::gen(g, a),
        Command::Tree(a) => commands::tree(g, a),
        Command::Train(a) => commands::train(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Frontier(a) => commands::frontier(g, a),
        Command::Barrier(a) => commands::barrier(g, a),
        Command::Rtv(a) => commands::rtv(g, a),
        Command::Slice(a) => commands::slice(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::NonConvergence("x".into())), 5);
        assert_eq!(exit_code(&Error::TrainingDiverged { epoch: 3, detail: "nan".into() }), 4);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 3);
        assert_eq!(exit_code(&Error::Empty("x")), 2);
    }
}
