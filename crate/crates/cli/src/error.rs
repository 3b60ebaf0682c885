use std::path::{Path, PathBuf};

use battdispatch_core::Error;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{} of {} runs failed; first: {first}", .failed, .total)]
    Batch {
        failed: usize,
        total: usize,
        first: Box<CliError>,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::Domain { .. } => "domain",
                Error::Singularity { .. } => "singularity",
                Error::NoRealRoot { .. } => "no_real_root",
                Error::InfeasiblePower { .. } => "infeasible_power",
                Error::Validation(_) => "validation",
                Error::Model(_) => "model",
                Error::Sampling { .. } => "sampling",
                Error::Solver { .. } => "solver",
                Error::Verification(_) => "verification",
                Error::Io { .. } => "io",
                Error::Parse { .. } => "parse",
            },
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Batch { first, .. } => first.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Solver { .. } | Error::Verification(_)) => EXIT_SOLVER,
            CliError::Core(Error::Io { .. }) | CliError::Io { .. } => EXIT_IO,
            CliError::Batch { first, .. } => first.exit_code(),
            _ => EXIT_VALIDATION,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            status: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            issues: Option<&'a [String]>,
        }
        let inner = match self {
            CliError::Batch { first, .. } => first.as_ref(),
            other => other,
        };
        let (status, issues) = match inner {
            CliError::Core(Error::Solver { status }) => (Some(status.as_str()), None),
            CliError::Core(Error::Validation(issues)) => (None, Some(issues.as_slice())),
            _ => (None, None),
        };
        serde_json::to_string(&Report {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            status,
            issues,
        })
        .expect("error report serializes")
    }
}
