//! Batch experiments over the `rnls-core` toolkit: TOML configs, seeded
//! per-sample runs, an append-only record log with resume, and JSON/CSV
//! summaries.

pub mod config;
pub mod data;
pub mod io;
pub mod records;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentKind};
pub use records::{ResultRecord, Summary};
pub use run::{run, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource refusal: {0}")]
    Resource(String),
    #[error("numeric abort: {0}")]
    Blowup(String),
    #[error(transparent)]
    Core(rnls_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<rnls_core::Error> for HarnessError {
    fn from(e: rnls_core::Error) -> Self {
        match e {
            rnls_core::Error::Config(msg) => HarnessError::Config(msg),
            rnls_core::Error::Blowup { .. } => HarnessError::Blowup(e.to_string()),
            other => HarnessError::Core(other),
        }
    }
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Blowup(_) => 3,
            HarnessError::Resource(_) => 4,
            _ => 1,
        }
    }
}
