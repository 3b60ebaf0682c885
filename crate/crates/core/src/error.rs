use std::path::PathBuf;

/// Errors raised anywhere in the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside its domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("singular evaluation in {what}: {detail}")]
    Singularity { what: &'static str, detail: String },

    #[error("no nonnegative real root for the {mode} current limit at soc={soc}: discriminant {discriminant:e} (a={a:e}, b={b:e}, c={c:e})")]
    NoRealRoot {
        mode: &'static str,
        soc: f64,
        a: f64,
        b: f64,
        c: f64,
        discriminant: f64,
    },

    #[error("requested {mode} power {requested} W exceeds the limit {limit} W at soc={soc}")]
    InfeasiblePower {
        mode: &'static str,
        soc: f64,
        requested: f64,
        limit: f64,
    },

    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("{0}")]
    Model(String),

    #[error("sampling failed at grid point (soc={soc}, fraction={fraction}): {source}")]
    Sampling {
        soc: f64,
        fraction: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("solver finished with status {status}")]
    Solver { status: String },

    #[error("post-solve verification failed: {0}")]
    Verification(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn domain(quantity: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            quantity,
            value,
            domain,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
