//! Error type for the experiment driver and its process exit-code contract.

use rbdsde_core::Error as CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

/// Process exit codes: 0 = study ran and passed, 1 = study ran but a check
/// failed, 2 = the configuration could not be understood or describes an
/// unusable problem, 3 = the computation itself broke down (non-finite
/// values, singular regression, exhausted budget, or an output write error).
#[derive(Debug, Error)]
pub enum LabError {
    /// Unreadable, unparsable, or semantically invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A failure surfaced by the numerical core.
    #[error(transparent)]
    Core(#[from] CoreError),

    /// Filesystem failure while writing reports or data files.
    #[error("output error for {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },

    /// A loaded binary artifact is malformed.
    #[error("malformed data file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl LabError {
    /// Maps the error to the process exit code described above.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Format { .. } => 2,
            LabError::Output { .. } => 3,
            LabError::Core(core) => match core {
                // The configuration asked for something the library rejects
                // up front: these are usage errors, not numerical failures.
                CoreError::InvalidCoefficient { .. }
                | CoreError::BarrierTerminalConflict { .. }
                | CoreError::InvalidGrid { .. }
                | CoreError::ShapeError { .. }
                | CoreError::InvalidLevel { .. }
                | CoreError::MissingH4 { .. }
                | CoreError::EnsembleMismatch
                | CoreError::OracleUnsupported { .. }
                | CoreError::UnknownCase { .. } => 2,
                // The run itself fell over.
                CoreError::SingularRegression
                | CoreError::BudgetExceeded { .. }
                | CoreError::NumericalBlowup { .. } => 3,
            },
        }
    }
}
