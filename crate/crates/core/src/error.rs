use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training fault at iteration {iteration}: {detail}")]
    TrainingFault { iteration: usize, detail: String },

    #[error("degenerate spectrum: no eigenvalue above floor {floor:e}")]
    DegenerateSpectrum { floor: f64 },

    #[error("degenerate kernel: scalarized diagonal entry {index} is {value:e}")]
    DegenerateKernel { index: usize, value: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing checkpoint: {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("bad checkpoint {}: {detail}", .path.display())]
    BadCheckpoint { path: PathBuf, detail: String },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Usage/config errors map to exit code 2, everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
