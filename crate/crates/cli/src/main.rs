//! `candleforge` command-line driver.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use candleforge::market_data::Interval;
use candleforge::nn::ModelKind;
use config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "candleforge", version, about = "Hourly candle forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download candles (or import --from-csv), repair gaps and save a CSV.
    Fetch,
    /// Compute indicators, enforce stationarity and save the feature matrix.
    Featurize,
    /// Train one model and save its best-validation checkpoint and history.
    Train,
    /// Score a checkpoint against the naive baseline on every split.
    Eval {
        /// Checkpoint written by `train` or `grid`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and evaluate every model × lookback cell and render the tables.
    Grid,
    /// Run the self-check suites; exits nonzero if any fails.
    Verify,
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Args)]
struct Flags {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Trading pair, e.g. BTCUSDT.
    #[arg(long, global = true)]
    symbol: Option<String>,
    /// Candle interval (1m, 5m, 15m, 1h, 4h, 1d).
    #[arg(long, global = true)]
    interval: Option<Interval>,
    /// Days of history to fetch.
    #[arg(long, global = true)]
    days: Option<u32>,
    /// Single lookback window length; replaces the configured list.
    #[arg(long, global = true)]
    lookback: Option<usize>,
    /// Forecast horizon in candles.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Single model kind; replaces the configured list.
    #[arg(long, global = true, value_parser = ["mlp", "cnn", "rnn", "lstm"])]
    model: Option<String>,
    /// Seed for initialization, shuffling and Monte Carlo suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Read candles from this CSV instead of the exchange.
    #[arg(long = "from-csv", global = true)]
    from_csv: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            symbol: self.symbol.clone(),
            interval: self.interval,
            days: self.days,
            lookback: self.lookback,
            horizon: self.horizon,
            model: self.model.as_deref().map(|m| m.parse::<ModelKind>().expect("validated by clap")),
            seed: self.seed,
            epochs: self.epochs,
            lr: self.lr,
            out: self.out.clone(),
            from_csv: self.from_csv.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli.command, cli.flags.config.as_deref(), &cli.flags.overrides()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
