use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simon_learn::BitString;
use simon_learn_cli::{
    cmd_enumerate, cmd_landscape, cmd_train, cmd_verify, CliError, Overrides, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "simon-learn",
    version,
    about = "Train circuits that rediscover Simon's algorithm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suite and print a pass/fail table.
    Verify(Common),
    /// Write every canonical oracle as JSON lines and check the counts.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Restrict to one secret, e.g. 11.
        #[arg(long)]
        s: Option<BitString>,
    },
    /// Scan the cost of a two-parameter layout on a grid.
    Landscape(Common),
    /// Optimize the circuit parameters.
    Train(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(
        c.config.as_deref(),
        &Overrides {
            seed: c.seed,
            out: c.out.clone(),
            n: c.n,
        },
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Verify(c) => cmd_verify(&load(&c)?, &mut out),
        Command::Enumerate { common, s } => cmd_enumerate(&load(&common)?, s, &mut out),
        Command::Landscape(c) => cmd_landscape(&load(&c)?, &mut out).map(|_| ()),
        Command::Train(c) => cmd_train(&load(&c)?, &mut out).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
