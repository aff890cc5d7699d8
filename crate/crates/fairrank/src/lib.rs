//! File formats, evaluation pipeline and command line for the
//! `fairrank-core` metrics.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod output;
pub mod synth;

pub use config::{load_config, parse_config, EvalConfig, MetricSpec, TargetMode, WeightSpec};
pub use error::{AppError, IngestError};
pub use eval::{evaluate_system, Corpus, SystemInput, SystemReport};
