use std::fmt::Display;
use std::path::Path;

use linksage::gnn::{CheckpointError, GnnError};
use linksage::graph::GraphError;
use linksage::nearline::NearlineError;
use linksage::ranking::RankingError;
use linksage::synth::SynthError;
use linksage::train::TrainError;

pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const DIVERGED: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: USAGE, message: message.into() }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Maps a library error to a process exit code.
pub trait ExitCode: Display {
    fn exit_code(&self) -> i32 {
        DATA
    }
}

impl ExitCode for std::io::Error {}
impl ExitCode for GraphError {}
impl ExitCode for NearlineError {}
impl ExitCode for CheckpointError {}
impl ExitCode for GnnError {}

impl ExitCode for SynthError {
    fn exit_code(&self) -> i32 {
        USAGE
    }
}

impl ExitCode for TrainError {
    fn exit_code(&self) -> i32 {
        match self {
            TrainError::DivergenceDetected { .. } => DIVERGED,
            TrainError::InvalidConfig(_) => USAGE,
            _ => DATA,
        }
    }
}

impl ExitCode for RankingError {
    fn exit_code(&self) -> i32 {
        match self {
            RankingError::DivergenceDetected(_) => DIVERGED,
            RankingError::InvalidConfig(_) => USAGE,
            _ => DATA,
        }
    }
}

pub trait Context<T> {
    /// Prefixes the error with the file it concerns.
    fn at(self, path: &Path) -> Result<T, CliError>;
    fn plain(self) -> Result<T, CliError>;
}

impl<T, E: ExitCode> Context<T> for Result<T, E> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: e.exit_code(),
            message: format!("{}: {e}", path.display()),
        })
    }

    fn plain(self) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            code: e.exit_code(),
            message: e.to_string(),
        })
    }
}
