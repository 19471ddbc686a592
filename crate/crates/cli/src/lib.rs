//! Command implementations behind the `simon-learn` binary.
//!
//! Each command takes a resolved [`RunConfig`], writes its artifacts under
//! `output_dir`, prints a human-readable summary to the given writer and
//! returns an error whose [`CliError::exit_code`] the binary exits with.

pub mod config;
mod enumerate;
mod landscape;
mod output;
mod train;
mod verify;

pub use config::{LayoutChoice, Overrides, PostChoice, RunConfig, SecretChoice, TableInit};
pub use enumerate::cmd_enumerate;
pub use landscape::{cmd_landscape, LandscapeSummary};
pub use output::Meta;
pub use train::{cmd_train, TrainSummary};
pub use verify::{cmd_verify, run_checks, CheckResult};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// One or more checks failed; the message names them.
    #[error("check failed: {0}")]
    Check(String),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<simon_learn::Error> for CliError {
    fn from(e: simon_learn::Error) -> Self {
        use simon_learn::Error as E;
        match e {
            E::Usage(_) | E::Capacity(_) | E::Parse(_) => CliError::Usage(e.to_string()),
            E::Numerical(msg) => CliError::Numerical(msg),
            E::Invariant(_) => CliError::Check(e.to_string()),
        }
    }
}
