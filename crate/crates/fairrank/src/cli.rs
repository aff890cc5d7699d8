//! Command-line front end: `evaluate`, `compare` and `synth`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fairrank_core::{correlation_matrix, DocumentId, MetricResult, UnlabeledPolicy};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{load_config, EvalConfig};
use crate::error::{AppError, IngestError};
use crate::eval::{evaluate_system, Corpus, Detail, SystemInput, SystemReport};
use crate::ingest::{self, SequenceRow};
use crate::output::{self, CORRELATION_FILE, CORRELATION_LONG_FILE, DETAILS_FILE, METRICS_FILE};
use crate::synth::{self, SynthParams};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "FAIRRANK_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fairrank",
    version,
    about = "Provider-side group fairness metrics for rankings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute fairness metrics for one or more runs.
    Evaluate(EvaluateArgs),
    /// Correlate the system orderings induced by each metric.
    Compare(CompareArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// TREC run files; each run tag is one system.
    #[arg(long = "run", required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub alignment: PathBuf,
    /// `seq_no,qid` rows; without it every ranking is one draw.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Score files, one per run file in the same order.
    #[arg(long = "scores", num_args = 1..)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Output directories of earlier `evaluate` runs.
    #[arg(long = "results", required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    /// Where to write the matrix; defaults to the first results directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the matrix in long format.
    #[arg(long)]
    pub long: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub docs: usize,
    #[arg(long, default_value_t = 50)]
    pub requests: usize,
    #[arg(long, default_value_t = 2)]
    pub groups: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub systems: usize,
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 40)]
    pub pool: usize,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
    #[arg(long, default_value_t = 1.0)]
    pub protected_skew: f64,
    #[arg(long, default_value_t = 0.0)]
    pub relevance_skew: f64,
    #[arg(long, default_value_t = 0.5)]
    pub protected_fraction: f64,
    #[arg(long, default_value_t = 0.02)]
    pub unlabeled_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub soft_fraction: f64,
    #[arg(long)]
    pub edge_cases: bool,
    #[arg(long)]
    pub out: PathBuf,
}

impl From<&SynthArgs> for SynthParams {
    fn from(a: &SynthArgs) -> Self {
        SynthParams {
            docs: a.docs,
            requests: a.requests,
            groups: a.groups,
            seed: a.seed,
            systems: a.systems,
            depth: a.depth,
            pool: a.pool,
            draws: a.draws,
            protected_skew: a.protected_skew,
            relevance_skew: a.relevance_skew,
            protected_fraction: a.protected_fraction,
            unlabeled_fraction: a.unlabeled_fraction,
            soft_fraction: a.soft_fraction,
            edge_cases: a.edge_cases,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Evaluate(args) => evaluate(&args),
        Command::Compare(args) => compare(&args),
        Command::Synth(args) => {
            synth::generate(&SynthParams::from(&args), &args.out)
                .map_err(|e| AppError::Usage(e.to_string()))?;
            Ok(())
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, AppError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            AppError::Usage(format!("{THREADS_VAR}={v:?} is not a positive integer"))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start worker threads: {e}")))
}

fn open(path: &Path) -> Result<BufReader<File>, AppError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::input(path)(e.into()))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), AppError> {
    File::create(path)
        .and_then(|file| f(BufWriter::new(file)))
        .map_err(AppError::output(path))
}

/// Systems of one run file, keyed by run tag.
fn load_run(
    path: &Path,
    rows: Option<&[SequenceRow]>,
) -> Result<Vec<(String, fairrank_core::RankingSequence)>, AppError> {
    let run = ingest::parse_run(open(path)?).map_err(AppError::input(path))?;
    if run.records.is_empty() {
        return Err(AppError::Usage(format!(
            "{}: run file has no rankings",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (tag, part) in run.split_by_tag() {
        let rankings = part.rankings().map_err(AppError::input(path))?;
        drop(part);
        let seq = ingest::build_sequence(rows, &rankings).map_err(AppError::input(path))?;
        out.push((tag, seq));
    }
    Ok(out)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), AppError> {
    let config = match &args.config {
        Some(path) => load_config(path).map_err(|source| AppError::Config {
            path: path.clone(),
            source,
        })?,
        None => EvalConfig::default(),
    };
    if !args.scores.is_empty() && args.scores.len() != args.runs.len() {
        return Err(AppError::Usage(format!(
            "{} score files for {} run files; pass one per run, in order",
            args.scores.len(),
            args.runs.len()
        )));
    }
    let pool = thread_pool()?;
    pool.install(|| evaluate_in_pool(args, &config))
}

fn evaluate_in_pool(args: &EvaluateArgs, config: &EvalConfig) -> Result<(), AppError> {
    let ((relevance, alignment), rows) = rayon::join(
        || {
            rayon::join(
                || ingest::parse_qrels(open(&args.qrels)?).map_err(AppError::input(&args.qrels)),
                || {
                    ingest::parse_alignment(open(&args.alignment)?)
                        .map_err(AppError::input(&args.alignment))
                },
            )
        },
        || {
            args.sequence
                .as_ref()
                .map(|p| ingest::parse_sequence(open(p)?).map_err(AppError::input(p)))
                .transpose()
        },
    );
    let (relevance, alignment, rows) = (relevance?, alignment?, rows?);

    if args.scores.is_empty() {
        warn!("no score files: pairwise accuracy and IAA are skipped");
    }

    let mut docs: BTreeSet<DocumentId> = BTreeSet::new();
    if config.unlabeled != UnlabeledPolicy::Exclude {
        for path in &args.runs {
            ingest::scan_run_documents(open(path)?, &mut docs).map_err(AppError::input(path))?;
        }
        docs.extend(relevance.iter().map(|(_, d, _)| d.clone()));
    }
    let corpus =
        Corpus::new(relevance, alignment, config, &docs).map_err(|e| AppError::Input {
            path: args.alignment.clone(),
            source: IngestError::domain("alignment", e.to_string()),
        })?;
    drop(docs);
    info!(
        "evaluating {} run files over {} groups",
        args.runs.len(),
        corpus.groups.len()
    );

    // Each run file is loaded, evaluated and dropped by one worker, so only
    // as many systems are in memory as there are threads.
    let per_file: Vec<Vec<(String, SystemReport)>> = args
        .runs
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> Result<_, AppError> {
            let systems = load_run(path, rows.as_deref())?;
            let scores = match args.scores.get(i) {
                Some(p) => Some(Arc::new(
                    ingest::parse_scores(open(p)?).map_err(AppError::input(p))?,
                )),
                None => None,
            };
            systems
                .into_iter()
                .map(|(name, sequence)| {
                    let system = SystemInput {
                        name,
                        sequence,
                        scores: scores.clone(),
                    };
                    let report = evaluate_system(&corpus, config, &system).map_err(|source| {
                        AppError::Eval {
                            system: system.name.clone(),
                            source,
                        }
                    })?;
                    Ok((system.name, report))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut names = BTreeSet::new();
    let mut results: Vec<MetricResult> = Vec::new();
    let mut details: Vec<Detail> = Vec::new();
    for (system, report) in per_file.into_iter().flatten() {
        if !names.insert(system.clone()) {
            return Err(AppError::Usage(format!(
                "run tag {system} appears in more than one run file"
            )));
        }
        results.extend(report.results);
        details.extend(report.details);
        for (metric, _) in report.skipped {
            let kind = config
                .metrics
                .iter()
                .find(|m| m.name == metric)
                .map(|m| m.kind);
            results.push(MetricResult {
                metric: metric.clone(),
                system: system.clone(),
                value: None,
                n_requests: 0,
                n_degenerate: 0,
                direction: kind.map_or(fairrank_core::Direction::ZeroIsFair, |k| k.direction()),
            });
            details.push(Detail {
                system: system.clone(),
                metric,
                statistic: "skipped.no_scores".into(),
                value: 1.0,
            });
        }
    }

    fs::create_dir_all(&args.out).map_err(AppError::output(&args.out))?;
    write_file(&args.out.join(METRICS_FILE), |w| {
        output::write_metrics(w, &results)
    })?;
    write_file(&args.out.join(DETAILS_FILE), |w| {
        output::write_details(w, &details)
    })?;

    let required: BTreeMap<&str, bool> = config
        .metrics
        .iter()
        .map(|m| (m.name.as_str(), m.required))
        .collect();
    let mut sorted: Vec<&MetricResult> = results.iter().collect();
    sorted.sort_by(|a, b| (&a.system, &a.metric).cmp(&(&b.system, &b.metric)));
    for r in sorted {
        if r.value.is_none() && required.get(r.metric.as_str()).copied().unwrap_or(false) {
            return Err(AppError::RequiredMetric {
                metric: r.metric.clone(),
                system: r.system.clone(),
            });
        }
    }
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<(), AppError> {
    let mut merged: BTreeMap<(String, String), MetricResult> = BTreeMap::new();
    for dir in &args.results {
        let path = dir.join(METRICS_FILE);
        let rows = output::read_metrics(open(&path)?).map_err(AppError::input(&path))?;
        for r in rows {
            let key = (r.system.clone(), r.metric.clone());
            if merged.insert(key, r).is_some() {
                warn!(
                    "{}: duplicate system and metric, the later row wins",
                    path.display()
                );
            }
        }
    }
    let results: Vec<MetricResult> = merged.into_values().collect();
    let n_systems = results
        .iter()
        .map(|r| r.system.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    if n_systems < 2 {
        return Err(AppError::TooFewSystems(n_systems));
    }
    let columns = output::metric_columns(&results);
    let matrix = correlation_matrix(&columns)
        .map_err(|e| AppError::Usage(format!("cannot correlate metrics: {e}")))?;
    let out = args.out.clone().unwrap_or_else(|| args.results[0].clone());
    fs::create_dir_all(&out).map_err(AppError::output(&out))?;
    write_file(&out.join(CORRELATION_FILE), |w| {
        output::write_correlation(w, &matrix)
    })?;
    if args.long {
        write_file(&out.join(CORRELATION_LONG_FILE), |w| {
            output::write_correlation_long(w, &matrix)
        })?;
    }
    info!(
        "correlated {} metrics over {n_systems} systems",
        matrix.metrics.len()
    );
    Ok(())
}

/// Parse arguments, run, and report errors on stderr. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "fairrank: {e}");
            e.exit_code()
        }
    }
}
