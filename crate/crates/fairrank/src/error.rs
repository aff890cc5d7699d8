use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Problems reading one input file or the configuration.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: rank {rank} appears twice for request {request}")]
    DuplicateRank {
        line: u64,
        request: String,
        rank: u32,
    },
    #[error("line {line}: document {doc} appears twice in one ranking of request {request}")]
    DuplicateDocument {
        line: u64,
        request: String,
        doc: String,
    },
    #[error("line {line}: negative relevance grade {grade}")]
    NegativeGrade { line: u64, grade: f64 },
    #[error("row {row}: negative group weight for document {doc}")]
    NegativeWeight { row: u64, doc: String },
    #[error("row {row}: group weights for document {doc} sum to {sum}")]
    RowSumOutOfTolerance { row: u64, doc: String, sum: f64 },
    #[error("line {line}: request {request} is not in the run")]
    UnknownRequest { line: u64, request: String },
    #[error("line {line}: request {request} has no ranking for sequence number {seq_no}")]
    MissingDraw {
        line: u64,
        request: String,
        seq_no: u64,
    },
    #[error("{path}: unknown metric {name:?}")]
    UnknownMetric { path: String, name: String },
    #[error("{path}: {msg}")]
    ParameterOutOfDomain { path: String, msg: String },
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        IngestError::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn domain(path: impl Into<String>, msg: impl Into<String>) -> Self {
        IngestError::ParameterOutOfDomain {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            other => IngestError::parse(line, format!("{other:?}")),
        }
    }
}

/// Errors surfaced by the command line, each mapped to an exit status.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: IngestError },
    #[error("config {}: {source}", path.display())]
    Config { path: PathBuf, source: IngestError },
    #[error("{0}")]
    Usage(String),
    #[error("evaluation of {system}: {source}")]
    Eval {
        system: String,
        source: fairrank_core::Error,
    },
    #[error("required metric {metric} is undefined for system {system}")]
    RequiredMetric { metric: String, system: String },
    #[error("comparison needs at least two systems, found {0}")]
    TooFewSystems(usize),
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Input { .. } | AppError::Config { .. } | AppError::Usage(_) => 2,
            AppError::RequiredMetric { .. } => 3,
            AppError::TooFewSystems(_) => 4,
            AppError::Eval { .. } | AppError::Output { .. } => 1,
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>) -> impl FnOnce(IngestError) -> AppError {
        let path = path.into();
        move |source| AppError::Input { path, source }
    }

    pub(crate) fn output(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Output { path, source }
    }
}
