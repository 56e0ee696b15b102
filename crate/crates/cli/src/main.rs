//! `shapecx`: preprocess shape masks, train the VAE pair, score, rank and
//! evaluate.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or data error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "shapecx", version, about = "Shape complexity toolkit", args_override_self = true)]
struct Cli {
    /// key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Crop, square and resize every image in a directory to 64×64 PGM masks.
    Preprocess(commands::PreprocessArgs),
    /// Train one VAE and write its checkpoint and loss curve.
    Train(commands::TrainArgs),
    /// Score every mask in a directory and write the scores CSV.
    Score(commands::ScoreArgs),
    /// Rank a scores CSV by one measure, optionally rendering a montage.
    Rank(commands::RankArgs),
    /// Correlate measures against a reference ranking or across random subsets.
    Eval(commands::EvalArgs),
    /// Write a synthetic mixed-shape corpus as PGM masks.
    Generate(commands::GenerateArgs),
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<shapecx::Error> for CliError {
    fn from(e: shapecx::Error) -> Self {
        use shapecx::Error as E;
        let code = match e {
            E::Dimension(_) | E::Contract(_) | E::PngEncode(_) => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return ExitCode::from(e.code);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Rank(a) => commands::rank(a),
        Command::Eval(a) => commands::eval(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
