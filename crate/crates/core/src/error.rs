use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("state {0} lies outside the grid")]
    StateOutOfBounds(String),

    #[error("time step {z} cannot advance past horizon {horizon}")]
    HorizonExceeded { z: usize, horizon: usize },

    #[error("consecutive fixes are {cells} cells apart (limit {limit}); cell size too small for the sampling rate")]
    NonAdjacentJump { cells: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("theta became non-finite or lost its sign at epoch {epoch}; learning rate too large")]
    NonFinite { epoch: usize },

    #[error("no attempt reached the gap end after {attempts} attempts")]
    GapUnreachable { attempts: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("enumeration too large: {paths} candidate action sequences (limit {limit})")]
    TooLarge { paths: u64, limit: u64 },

    #[error("demonstration is not a feasible path of the enumeration problem")]
    DemoInfeasible,

    #[error("trajectory too short: {0}")]
    TooShort(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trajectory {traj_id}: {source}")]
    Trajectory {
        traj_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_trajectory(self, traj_id: impl Into<String>) -> Self {
        Error::Trajectory { traj_id: traj_id.into(), source: Box::new(self) }
    }

    /// True when the failure came from the filesystem rather than from the input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Trajectory { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
