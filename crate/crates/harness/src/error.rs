use std::path::PathBuf;

/// Harness failures. Every variant maps to a short `kind` used in the
/// machine-readable error line printed by the CLI.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] smc_genealogy::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("per-path invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(e) => e.kind(),
            HarnessError::Config(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv { .. } => "csv",
            HarnessError::Parse { .. } => "parse",
            HarnessError::ThreadPool(_) => "thread_pool",
            HarnessError::Invariant(_) => "invariant",
        }
    }

    /// One-line JSON object: `{"error":"<kind>","message":"..."}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        HarnessError::Csv { path: path.into(), source }
    }
}
