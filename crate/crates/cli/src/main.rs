//! `trackpilot` command-line entry point.
//!
//! Exit codes: 0 success or pass, 1 failure or fail, 2 usage error.

mod bench;
mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "trackpilot", version, about = "Desk-scale driving RL: train, test, serve and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StoreArg {
    /// Store directory (created if missing).
    #[arg(long, value_name = "DIR")]
    store: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the training server.
    Serve {
        #[command(flatten)]
        store: StoreArg,
        /// Address to bind.
        #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
    /// Train a model on a track, printing per-episode rewards and writing a CSV.
    Train(TrainArgs),
    /// Run one greedy (or programmed) episode and store it.
    Test(TestArgs),
    /// Grade a stored episode against an objective file.
    EvalObjective(EvalArgs),
    /// Learning-curve benchmark: a fresh model per seed.
    Bench(BenchArgs),
    /// List or export tracks.
    Tracks(TracksArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Model id; created (named after the id) if it does not exist.
    #[arg(long)]
    model: String,
    #[arg(long)]
    track: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=100_000))]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path [default: <store>/models/<model>/train-<track>-seed<seed>.csv].
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Do not print a line per episode.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
pub struct TestArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    model: String,
    #[arg(long)]
    track: String,
    #[arg(long)]
    seed: u64,
    /// Callback program (.wps) to attach.
    #[arg(long, value_name = "FILE")]
    program: Option<PathBuf>,
    /// Objective file to grade the run against; exit code 1 when it fails.
    #[arg(long, value_name = "FILE")]
    objective: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    episode: u64,
    #[arg(long, value_name = "FILE")]
    objective: PathBuf,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Builtin track id, or a track in --store.
    #[arg(long, default_value = "oval")]
    track: String,
    /// Store to read the track from instead of the builtins.
    #[arg(long, value_name = "DIR")]
    store: Option<PathBuf>,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// First seed; seeds run from here upward.
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    /// Episodes the untrained network samples for the baseline mean.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    baseline_episodes: u64,
    /// Trailing training episodes averaged for the final reward.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
    /// Seeds that must pass [default: 70% of --seeds, rounded up].
    #[arg(long)]
    required: Option<u64>,
    /// Output directory for per-seed CSVs and summary.csv.
    #[arg(long, value_name = "DIR", default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
pub struct TracksArgs {
    /// The seven rapid training tracks.
    #[arg(long, conflicts_with = "store")]
    builtin: bool,
    /// List the tracks of a store.
    #[arg(long, value_name = "DIR", required_unless_present = "builtin")]
    store: Option<PathBuf>,
    /// Also write each listed track as <id>.json into this directory.
    #[arg(long, value_name = "DIR")]
    export: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) {
        "info"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    let result = match cli.command {
        Command::Serve { store, listen } => commands::serve(&store.store, listen),
        Command::Train(a) => commands::train(&a),
        Command::Test(a) => commands::test(&a),
        Command::EvalObjective(a) => commands::eval_objective(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Tracks(a) => commands::tracks(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
