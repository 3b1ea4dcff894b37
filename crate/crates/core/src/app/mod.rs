//! Command-line application: config loading, subcommands and artifacts.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dossier;
pub mod report;
pub mod review;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use cli::run_cli;
pub use commands::{execute, Command, StepReport};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid input at {path}: {message}")]
    Config { path: String, message: String },
    #[error("missing input artifact: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for invalid config or decisions, 3 for a missing input artifact,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config { .. } => 2,
            AppError::MissingInput(_) => 3,
            _ => 1,
        }
    }
}

/// JSON schemas published under `docs/`, as (file name, schema).
pub fn schemas() -> Vec<(&'static str, schemars::schema::RootSchema)> {
    vec![
        ("run_config.schema.json", schemars::schema_for!(config::RunConfig)),
        ("pair_dossier.schema.json", schemars::schema_for!(dossier::PairDossier)),
        ("review_decisions.schema.json", schemars::schema_for!(Vec<review::ReviewDecision>)),
    ]
}

/// Pretty JSON with a trailing newline, the on-disk form of every schema.
pub fn schema_text(schema: &schemars::schema::RootSchema) -> String {
    let mut s = serde_json::to_string_pretty(schema).expect("schema serializes");
    s.push('\n');
    s
}
