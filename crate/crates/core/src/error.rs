use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    /// A VM type is too small to host a single request.
    #[error("capacity error: VM memory {vm_memory_mb} MB cannot host a {request_mb} MB request")]
    Capacity { vm_memory_mb: f64, request_mb: f64 },

    /// The per-request FaaS cost is zero, so FaaS and IaaS costs never meet.
    #[error("no finite cost-indifference point: per-request FaaS cost is zero")]
    NoFiniteCip,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: line {line}: {message}")]
    TraceParse { path: String, line: usize, message: String },

    #[error("trace is empty")]
    EmptyTrace,

    #[error("experiments must share one trace and simulator config: {0}")]
    MixedExperiments(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
