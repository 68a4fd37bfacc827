mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hatestack::error::ErrorKind;

/// Cross-platform hate speech detection: platform models, stacking and
/// evaluation.
#[derive(Debug, Parser)]
#[command(name = "hatestack", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean messages and write one token record per message.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate seeded synthetic platform datasets.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Messages per platform.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Profiles to generate; defaults to the four main platforms.
        #[arg(long = "platform")]
        platforms: Vec<String>,
        /// Also write stratified train and test files using `train_frac`.
        #[arg(long)]
        split: bool,
    },
    /// Train one platform model and write its archive.
    TrainPlatform {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Required when the dataset holds several platforms.
        #[arg(long)]
        platform: Option<String>,
    },
    /// Train the meta-learner over two or more platform archives.
    TrainStack {
        #[arg(long = "archive", required = true)]
        archives: Vec<PathBuf>,
        /// Training sets the platform models were fitted on.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score messages with a superlearner archive.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against labels, or build a cross-platform grid.
    Eval {
        /// Predictions file; not used with `--grid`.
        #[arg(long, required_unless_present = "grid")]
        predictions: Option<PathBuf>,
        #[arg(long = "truth", required = true)]
        truth: Vec<PathBuf>,
        #[arg(long, default_value = "as_error")]
        abstain: String,
        /// Evaluate every platform archive on every platform's messages.
        #[arg(long)]
        grid: bool,
        #[arg(long = "archive", requires = "grid")]
        archives: Vec<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Register a new platform archive and refit the meta-learner.
    AddPlatform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        archive: PathBuf,
        /// Meta-training corpus covering the old and new platforms.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Agreement between two annotators' labels, joined by id.
    Agreement {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let name = cli.command.name();
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
