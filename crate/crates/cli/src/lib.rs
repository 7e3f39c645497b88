//! Subcommands behind the `blocklength` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use std::fmt;

pub use commands::run;
pub use config::{Cli, Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INVALID, message: message.into() }
    }

    pub fn internal(e: impl fmt::Display) -> Self {
        CliError { code: EXIT_USAGE, message: e.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<blocklength::Error> for CliError {
    fn from(e: blocklength::Error) -> Self {
        use blocklength::Error as E;
        let code = match e {
            E::Parse(_) | E::Schema(_) | E::InvalidModel(_) | E::NonErgodic(_) => EXIT_INVALID,
            _ => EXIT_USAGE,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Text produced by a command and the exit code to report.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}
