//! Synthetic corpora with controlled exposure and relevance skews.
//!
//! Each document belongs to one of `g` groups (`g0` is protected). Systems
//! score documents as `α·grade + β·[protected] + ζ`, where `α` varies the
//! relevance sensitivity, `β` the protected-group boost (spread over
//! `[−skew, skew]` across systems) and `ζ` is per-document noise. Rankings
//! are Plackett-Luce draws over these scores.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal};

use crate::error::IngestError;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub docs: usize,
    pub requests: usize,
    pub groups: usize,
    pub seed: u64,
    pub systems: usize,
    pub depth: usize,
    pub pool: usize,
    pub draws: usize,
    /// Largest protected-group score boost; systems spread over `[−skew, skew]`.
    pub protected_skew: f64,
    /// Relative reduction of the protected group's chance of being relevant.
    pub relevance_skew: f64,
    pub protected_fraction: f64,
    pub unlabeled_fraction: f64,
    pub soft_fraction: f64,
    /// Add requests for the empty-protected-group, zero-utility,
    /// all-unlabeled and short-list cases.
    pub edge_cases: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            docs: 2000,
            requests: 50,
            groups: 2,
            seed: 42,
            systems: 10,
            depth: 20,
            pool: 40,
            draws: 1,
            protected_skew: 1.0,
            relevance_skew: 0.0,
            protected_fraction: 0.5,
            unlabeled_fraction: 0.02,
            soft_fraction: 0.1,
            edge_cases: false,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        let check = |ok: bool, path: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(IngestError::domain(path, msg))
            }
        };
        check(
            self.groups >= 2,
            "groups",
            "at least two groups are required",
        )?;
        check(self.docs >= 1, "docs", "must be positive")?;
        check(self.requests >= 1, "requests", "must be positive")?;
        check(self.systems >= 1, "systems", "must be positive")?;
        check(self.draws >= 1, "draws", "must be positive")?;
        check(
            self.pool >= 1 && self.pool <= self.docs,
            "pool",
            "must lie in [1, docs]",
        )?;
        check(
            self.depth >= 1 && self.depth <= self.pool,
            "depth",
            "must lie in [1, pool]",
        )?;
        check(
            self.protected_skew.is_finite() && self.protected_skew >= 0.0,
            "protected-skew",
            "must be non-negative",
        )?;
        for (v, path) in [
            (self.relevance_skew, "relevance-skew"),
            (self.protected_fraction, "protected-fraction"),
            (self.unlabeled_fraction, "unlabeled-fraction"),
            (self.soft_fraction, "soft-fraction"),
        ] {
            check((0.0..=1.0).contains(&v), path, "must lie in [0, 1]")?;
        }
        Ok(())
    }
}

/// Paths written by [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub qrels: PathBuf,
    pub alignment: PathBuf,
    pub sequence: PathBuf,
    pub runs: Vec<PathBuf>,
    pub scores: Vec<PathBuf>,
}

struct Doc {
    id: String,
    group: usize,
    /// `None` for unlabeled documents.
    row: Option<Vec<f64>>,
}

impl Doc {
    fn protected(&self) -> f64 {
        if self.group == 0 {
            1.0
        } else {
            0.0
        }
    }
}

struct Request {
    id: String,
    /// (document index, grade)
    pool: Vec<(usize, f64)>,
    depth: usize,
}

struct Corpus {
    docs: Vec<Doc>,
    requests: Vec<Request>,
}

fn hard_row(g: usize, group: usize) -> Vec<f64> {
    let mut row = vec![0.0; g];
    row[group] = 1.0;
    row
}

fn build_corpus(p: &SynthParams, rng: &mut ChaCha8Rng) -> Corpus {
    let g = p.groups;
    let mut docs = Vec::with_capacity(p.docs);
    let width = (p.docs.max(2) - 1).to_string().len();
    for i in 0..p.docs {
        let group = if rng.gen_bool(p.protected_fraction) {
            0
        } else {
            rng.gen_range(1..g)
        };
        let row = if rng.gen_bool(p.unlabeled_fraction) {
            None
        } else if rng.gen_bool(p.soft_fraction) {
            let other = (group + rng.gen_range(1..g)) % g;
            let mut row = hard_row(g, group);
            row[group] = 0.7;
            row[other] = 0.3;
            Some(row)
        } else {
            Some(hard_row(g, group))
        };
        docs.push(Doc {
            id: format!("d{i:0width$}"),
            group,
            row,
        });
    }

    let width = (p.requests.max(2) - 1).to_string().len();
    let mut requests = Vec::with_capacity(p.requests + 4);
    for i in 0..p.requests {
        let pool = sample(rng, p.docs, p.pool)
            .into_iter()
            .map(|d| {
                let propensity = 0.3 * (1.0 - p.relevance_skew * docs[d].protected());
                let grade = if rng.gen_bool(propensity) {
                    if rng.gen_bool(1.0 / 3.0) {
                        2.0
                    } else {
                        1.0
                    }
                } else {
                    0.0
                };
                (d, grade)
            })
            .collect();
        requests.push(Request {
            id: format!("q{i:0width$}"),
            pool,
            depth: p.depth,
        });
    }
    if p.edge_cases {
        add_edge_cases(p, &mut docs, &mut requests);
    }
    Corpus { docs, requests }
}

/// Requests whose documents are dedicated to one degenerate situation.
fn add_edge_cases(p: &SynthParams, docs: &mut Vec<Doc>, requests: &mut Vec<Request>) {
    let g = p.groups;
    let mut add = |docs: &mut Vec<Doc>, name: &str, members: &[(usize, bool, f64)]| {
        let pool = members
            .iter()
            .enumerate()
            .map(|(k, &(group, labeled, grade))| {
                docs.push(Doc {
                    id: format!("x_{name}_{k:02}"),
                    group,
                    row: labeled.then(|| hard_row(g, group)),
                });
                (docs.len() - 1, grade)
            })
            .collect::<Vec<_>>();
        let depth = pool.len();
        requests.push(Request {
            id: format!("z_{name}"),
            pool,
            depth,
        });
    };
    let grade = |k: usize| (k % 3) as f64;
    let no_protected: Vec<_> = (0..12).map(|k| (1 + k % (g - 1), true, grade(k))).collect();
    add(docs, "empty_protected", &no_protected);
    let zero_utility: Vec<_> = (0..12)
        .map(|k| {
            if k % 2 == 0 {
                (0, true, 0.0)
            } else {
                (1, true, grade(k) + 1.0)
            }
        })
        .collect();
    add(docs, "zero_utility", &zero_utility);
    let unlabeled: Vec<_> = (0..12).map(|k| (k % g, false, grade(k))).collect();
    add(docs, "unlabeled", &unlabeled);
    let short: Vec<_> = (0..5).map(|k| (k % g, true, grade(k))).collect();
    add(docs, "short", &short);
}

/// Per-system score parameters `(α, β)`.
fn system_params(p: &SynthParams, s: usize) -> (f64, f64) {
    let t = if p.systems > 1 {
        s as f64 / (p.systems - 1) as f64
    } else {
        0.5
    };
    let golden = 0.618_033_988_749_894_9;
    let alpha = 0.5 + 1.5 * ((s as f64 + 1.0) * golden).fract();
    (alpha, p.protected_skew * (2.0 * t - 1.0))
}

pub fn system_name(p: &SynthParams, s: usize) -> String {
    let width = (p.systems.max(2) - 1).to_string().len();
    format!("sys{s:0width$}")
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write a synthetic corpus under `out`. Equal parameters give
/// byte-identical files.
pub fn generate(p: &SynthParams, out: &Path) -> Result<SynthFiles, IngestError> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let corpus = build_corpus(p, &mut rng);
    fs::create_dir_all(out.join("runs"))?;
    fs::create_dir_all(out.join("scores"))?;

    let files = SynthFiles {
        qrels: out.join("qrels.txt"),
        alignment: out.join("alignment.csv"),
        sequence: out.join("sequence.csv"),
        runs: (0..p.systems)
            .map(|s| out.join("runs").join(format!("{}.run", system_name(p, s))))
            .collect(),
        scores: (0..p.systems)
            .map(|s| {
                out.join("scores")
                    .join(format!("{}.csv", system_name(p, s)))
            })
            .collect(),
    };

    let mut w = create(&files.qrels)?;
    for r in &corpus.requests {
        for &(d, grade) in &r.pool {
            writeln!(w, "{} 0 {} {}", r.id, corpus.docs[d].id, grade)?;
        }
    }
    w.flush()?;

    let mut w = create(&files.alignment)?;
    let names: Vec<String> = (0..p.groups).map(|i| format!("g{i}")).collect();
    writeln!(w, "docid,{}", names.join(","))?;
    for d in &corpus.docs {
        let cells: Vec<String> = match &d.row {
            Some(row) => row.iter().map(f64::to_string).collect(),
            None => vec![String::new(); p.groups],
        };
        writeln!(w, "{},{}", d.id, cells.join(","))?;
    }
    w.flush()?;

    let mut w = create(&files.sequence)?;
    writeln!(w, "seq_no,qid")?;
    let mut seq_no = 0;
    for r in &corpus.requests {
        for _ in 0..p.draws {
            seq_no += 1;
            writeln!(w, "{seq_no},{}", r.id)?;
        }
    }
    w.flush()?;

    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid gumbel");
    for s in 0..p.systems {
        let name = system_name(p, s);
        let (alpha, beta) = system_params(p, s);
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(1 + s as u64);
        let mut run = create(&files.runs[s])?;
        let mut scores = create(&files.scores[s])?;
        writeln!(scores, "qid,docid,score")?;
        let mut seq_no = 0;
        for r in &corpus.requests {
            let base: Vec<(usize, f64)> = r
                .pool
                .iter()
                .map(|&(d, grade)| {
                    (
                        d,
                        alpha * grade + beta * corpus.docs[d].protected() + noise.sample(&mut rng),
                    )
                })
                .collect();
            for &(d, score) in &base {
                writeln!(scores, "{},{},{}", r.id, corpus.docs[d].id, score)?;
            }
            for _ in 0..p.draws {
                seq_no += 1;
                let mut drawn: Vec<(usize, f64)> = base
                    .iter()
                    .map(|&(d, v)| (d, v + gumbel.sample(&mut rng)))
                    .collect();
                drawn.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                for (rank, (d, v)) in drawn.iter().take(r.depth).enumerate() {
                    writeln!(
                        run,
                        "{} {} {} {} {} {}",
                        r.id,
                        seq_no,
                        corpus.docs[*d].id,
                        rank + 1,
                        v,
                        name
                    )?;
                }
            }
        }
        run.flush()?;
        scores.flush()?;
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_group_rejected() {
        let p = SynthParams {
            groups: 1,
            ..SynthParams::default()
        };
        assert!(
            matches!(p.validate(), Err(IngestError::ParameterOutOfDomain { ref path, .. }) if path == "groups")
        );
    }

    #[test]
    fn betas_span_the_skew() {
        let p = SynthParams {
            systems: 5,
            protected_skew: 2.0,
            ..SynthParams::default()
        };
        let betas: Vec<f64> = (0..5).map(|s| system_params(&p, s).1).collect();
        assert_eq!(betas, [-2.0, -1.0, 0.0, 1.0, 2.0]);
    }
}
