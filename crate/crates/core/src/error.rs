use std::path::PathBuf;

use thiserror::Error;

use crate::state::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("receiver count {k} outside supported range [{min}, {max}]")]
    SizeLimit { k: usize, min: usize, max: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("joint table failed validation: {}", format_diagnostics(.0))]
    Validation(Vec<Diagnostic>),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("degenerate joint: every receiver is always erased")]
    DegenerateJoint,

    #[error("operation requires a two-receiver joint, got K = {0}")]
    NotTwoReceivers(usize),

    #[error("target rate {target} unreachable: rate at density {lambda_hi} is only {rate_hi}")]
    UnreachableTarget { target: f64, lambda_hi: f64, rate_hi: f64 },

    #[error("rate is not monotone in density near lambda = {0}")]
    NonMonotone(f64),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}
