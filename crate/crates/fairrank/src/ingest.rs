//! Readers and writers for run files, qrels, group alignments, ranking
//! sequences and score tables.
//!
//! Parsers stream their input line by line and report the 1-based line of
//! the first problem. Later duplicates override earlier ones where noted,
//! with a warning.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use fairrank_core::{
    AlignmentMatrix, DocumentId, GroupSpace, Ranking, RankingSequence, RelevanceTable, RequestId,
    ScoreTable,
};
use log::warn;

use crate::error::IngestError;

/// Row sums within this distance of 1 are renormalized; others are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 0.01;

/// Name of the alignment column treated as the unknown pseudo-group.
pub const UNKNOWN_COLUMN: &str = "unknown";

/// Second column of a run line: `Q0` or a sequence number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Iteration {
    Seq(u64),
    Label(String),
}

impl Iteration {
    pub fn parse(s: &str) -> Self {
        match s.parse() {
            Ok(n) => Iteration::Seq(n),
            Err(_) => Iteration::Label(s.to_owned()),
        }
    }
}

impl fmt::Display for Iteration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Iteration::Seq(n) => write!(f, "{n}"),
            Iteration::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub request: RequestId,
    pub iteration: Iteration,
    pub doc: DocumentId,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Identifies one ranking in a run: the request and the iteration column.
pub type RankingKey = (RequestId, Iteration);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunFile {
    pub records: Vec<RunRecord>,
}

impl RunFile {
    /// Distinct run tags in sorted order.
    pub fn tags(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.tag.as_str()).collect()
    }

    /// One run per tag.
    pub fn split_by_tag(self) -> BTreeMap<String, RunFile> {
        let mut out: BTreeMap<String, RunFile> = BTreeMap::new();
        for r in self.records {
            out.entry(r.tag.clone()).or_default().records.push(r);
        }
        out
    }

    /// Rankings keyed by request and iteration, documents in ascending rank.
    /// Runs holding several tags should be split first; a request and
    /// iteration shared by two tags is reported as a duplicate.
    pub fn rankings(&self) -> Result<BTreeMap<RankingKey, Ranking>, IngestError> {
        let mut grouped: BTreeMap<RankingKey, Vec<&RunRecord>> = BTreeMap::new();
        for r in &self.records {
            grouped
                .entry((r.request.clone(), r.iteration.clone()))
                .or_default()
                .push(r);
        }
        grouped
            .into_iter()
            .map(|(key, mut recs)| {
                recs.sort_by_key(|r| r.rank);
                let docs = recs.iter().map(|r| r.doc.clone()).collect();
                let scores = recs.iter().map(|r| r.score).collect();
                let ranking = Ranking::new(key.0.clone(), docs)
                    .and_then(|r| r.with_scores(scores))
                    .map_err(|e| {
                        IngestError::parse(0, format!("ranking of {} {}: {e}", key.0, key.1))
                    })?;
                Ok((key, ranking))
            })
            .collect()
    }
}

fn for_each_line<R: BufRead>(
    mut reader: R,
    mut f: impl FnMut(u64, &str) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    let mut buf = String::new();
    let mut line = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            return Ok(());
        }
        line += 1;
        let text = buf.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        f(line, text)?;
    }
}

fn request_id(line: u64, s: &str) -> Result<RequestId, IngestError> {
    RequestId::new(s).map_err(|e| IngestError::parse(line, e.to_string()))
}

fn document_id(line: u64, s: &str) -> Result<DocumentId, IngestError> {
    DocumentId::new(s).map_err(|e| IngestError::parse(line, e.to_string()))
}

fn number<T: std::str::FromStr>(line: u64, what: &str, s: &str) -> Result<T, IngestError> {
    s.parse()
        .map_err(|_| IngestError::parse(line, format!("{what} {s:?} is not a number")))
}

fn finite(line: u64, what: &str, s: &str) -> Result<f64, IngestError> {
    let v: f64 = number(line, what, s)?;
    if !v.is_finite() {
        return Err(IngestError::parse(
            line,
            format!("{what} {s:?} is not finite"),
        ));
    }
    Ok(v)
}

/// Parse a TREC run: `qid Q0 docid rank score tag` per line.
pub fn parse_run<R: BufRead>(reader: R) -> Result<RunFile, IngestError> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for_each_line(reader, |line, text| {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [qid, iter, doc, rank, score, tag] = fields[..] else {
            return Err(IngestError::parse(
                line,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        };
        records.push(RunRecord {
            request: request_id(line, qid)?,
            iteration: Iteration::parse(iter),
            doc: document_id(line, doc)?,
            rank: number(line, "rank", rank)?,
            score: finite(line, "score", score)?,
            tag: tag.to_owned(),
        });
        lines.push(line);
        Ok(())
    })?;
    if let Some(e) = first_duplicate(&records, &lines) {
        return Err(e);
    }
    Ok(RunFile { records })
}

/// The earliest line repeating a rank or a document within one ranking of
/// one run tag.
fn first_duplicate(records: &[RunRecord], lines: &[u64]) -> Option<IngestError> {
    let mut groups: HashMap<(&str, &RequestId, &Iteration), Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry((&r.tag, &r.request, &r.iteration)).or_default().push(i);
    }
    let mut worst: Option<(u64, IngestError)> = None;
    let mut note = |line: u64, e: IngestError| {
        if worst.as_ref().is_none_or(|(l, _)| line < *l) {
            worst = Some((line, e));
        }
    };
    for idx in groups.values() {
        let mut ranks = HashSet::with_capacity(idx.len());
        let mut docs = HashSet::with_capacity(idx.len());
        for &i in idx {
            let r = &records[i];
            if !ranks.insert(r.rank) {
                note(
                    lines[i],
                    IngestError::DuplicateRank {
                        line: lines[i],
                        request: r.request.to_string(),
                        rank: r.rank,
                    },
                );
            }
            if !docs.insert(&r.doc) {
                note(
                    lines[i],
                    IngestError::DuplicateDocument {
                        line: lines[i],
                        request: r.request.to_string(),
                        doc: r.doc.to_string(),
                    },
                );
            }
        }
    }
    worst.map(|(_, e)| e)
}

/// Collect the document column of a run without keeping the records.
pub fn scan_run_documents<R: BufRead>(
    reader: R,
    docs: &mut BTreeSet<DocumentId>,
) -> Result<(), IngestError> {
    for_each_line(reader, |line, text| {
        let doc = text
            .split_whitespace()
            .nth(2)
            .ok_or_else(|| IngestError::parse(line, "missing document column"))?;
        if !docs.contains(doc) {
            docs.insert(document_id(line, doc)?);
        }
        Ok(())
    })
}

pub fn write_run<W: Write>(mut w: W, run: &RunFile) -> io::Result<()> {
    for r in &run.records {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            r.request, r.iteration, r.doc, r.rank, r.score, r.tag
        )?;
    }
    w.flush()
}

/// Parse qrels: `qid iter docid grade` per line.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<RelevanceTable, IngestError> {
    let mut table = RelevanceTable::new();
    for_each_line(reader, |line, text| {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [qid, _iter, doc, grade] = fields[..] else {
            return Err(IngestError::parse(
                line,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        };
        let grade = finite(line, "grade", grade)?;
        if grade < 0.0 {
            return Err(IngestError::NegativeGrade { line, grade });
        }
        let prev = table
            .insert(request_id(line, qid)?, document_id(line, doc)?, grade)
            .map_err(|e| IngestError::parse(line, e.to_string()))?;
        if prev.is_some() {
            warn!("qrels line {line}: duplicate judgment for ({qid}, {doc}) overrides the earlier one");
        }
        Ok(())
    })?;
    Ok(table)
}

pub fn write_qrels<W: Write>(mut w: W, qrels: &RelevanceTable) -> io::Result<()> {
    for (q, d, y) in qrels.iter() {
        writeln!(w, "{q} 0 {d} {y}")?;
    }
    w.flush()
}

/// A parsed alignment table.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentFile {
    pub groups: GroupSpace,
    pub matrix: AlignmentMatrix,
    /// Documents listed with every group cell empty.
    pub unlabeled: BTreeSet<DocumentId>,
}

fn csv_reader<R: io::Read>(reader: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Parse `docid,<group1>,…,<groupG>`. A column named `unknown` becomes the
/// unknown pseudo-group. Empty cells count as 0 unless all are empty, which
/// marks the document unlabeled.
pub fn parse_alignment<R: io::Read>(reader: R) -> Result<AlignmentFile, IngestError> {
    let mut rdr = csv_reader(reader, true);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(IngestError::parse(
            1,
            "header needs a document column and at least one group",
        ));
    }
    let names: Vec<&str> = header.iter().skip(1).collect();
    let mut groups =
        GroupSpace::new(names.iter().copied()).map_err(|e| IngestError::parse(1, e.to_string()))?;
    if names.contains(&UNKNOWN_COLUMN) {
        groups = groups
            .with_unknown(UNKNOWN_COLUMN)
            .map_err(|e| IngestError::parse(1, e.to_string()))?;
    }
    let g = names.len();
    let mut matrix = AlignmentMatrix::new(g);
    let mut unlabeled = BTreeSet::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec)? {
        let row = record_line(&rec);
        if rec.len() != g + 1 {
            return Err(IngestError::parse(
                row,
                format!("expected {} fields, found {}", g + 1, rec.len()),
            ));
        }
        let doc = document_id(row, &rec[0])?;
        let replaced = matrix.remove(&doc).is_some() | unlabeled.remove(&doc);
        if replaced {
            warn!("alignment row {row}: duplicate document {doc} overrides the earlier row");
        }
        if rec.iter().skip(1).all(str::is_empty) {
            unlabeled.insert(doc);
            continue;
        }
        let mut weights = Vec::with_capacity(g);
        for cell in rec.iter().skip(1) {
            let w = if cell.is_empty() {
                0.0
            } else {
                finite(row, "weight", cell)?
            };
            if w < 0.0 {
                return Err(IngestError::NegativeWeight {
                    row,
                    doc: doc.to_string(),
                });
            }
            weights.push(w);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(IngestError::RowSumOutOfTolerance {
                row,
                doc: doc.to_string(),
                sum,
            });
        }
        if (sum - 1.0).abs() > fairrank_core::math::SUM_TOLERANCE {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        matrix
            .insert(doc, weights)
            .map_err(|e| IngestError::parse(row, e.to_string()))?;
    }
    Ok(AlignmentFile {
        groups,
        matrix,
        unlabeled,
    })
}

pub fn write_alignment<W: Write>(w: W, alignment: &AlignmentFile) -> io::Result<()> {
    let mut out = csv_writer(w);
    let g = alignment.groups.len();
    let mut header = vec!["docid"];
    header.extend(alignment.groups.names().iter().map(String::as_str));
    out.write_record(&header)?;
    let labeled = alignment.matrix.iter().map(|(d, r)| (d, Some(r)));
    let unlabeled = alignment.unlabeled.iter().map(|d| (d, None));
    let mut rows: Vec<(&DocumentId, Option<&[f64]>)> = labeled.chain(unlabeled).collect();
    rows.sort_by(|a, b| a.0.cmp(b.0));
    for (doc, row) in rows {
        let mut fields = vec![doc.to_string()];
        match row {
            Some(r) => fields.extend(r.iter().map(f64::to_string)),
            None => fields.extend(std::iter::repeat_n(String::new(), g)),
        }
        out.write_record(&fields)?;
    }
    out.flush()
}

/// One row of a sequence file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceRow {
    pub line: u64,
    pub seq_no: u64,
    pub request: RequestId,
}

/// Parse `seq_no,qid` rows; an optional header row is skipped.
pub fn parse_sequence<R: io::Read>(reader: R) -> Result<Vec<SequenceRow>, IngestError> {
    let mut rdr = csv_reader(reader, false);
    let mut rows = Vec::new();
    let mut rec = csv::StringRecord::new();
    let mut first = true;
    while rdr.read_record(&mut rec)? {
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(IngestError::parse(
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        if std::mem::take(&mut first) && rec[0].parse::<u64>().is_err() && &rec[0] == "seq_no" {
            continue;
        }
        rows.push(SequenceRow {
            line,
            seq_no: number(line, "sequence number", &rec[0])?,
            request: request_id(line, &rec[1])?,
        });
    }
    Ok(rows)
}

pub fn write_sequence<W: Write>(w: W, rows: &[SequenceRow]) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["seq_no", "qid"])?;
    for r in rows {
        out.write_record([r.seq_no.to_string(), r.request.to_string()])?;
    }
    out.flush()
}

/// Resolve sequence rows against a run's rankings.
///
/// Row `(n, q)` takes the ranking of `q` whose iteration column is `n`, or
/// the only ranking of `q` when there is exactly one. Without rows, every
/// ranking of the run is one draw.
pub fn build_sequence(
    rows: Option<&[SequenceRow]>,
    rankings: &BTreeMap<RankingKey, Ranking>,
) -> Result<RankingSequence, IngestError> {
    let draws = match rows {
        None => rankings.values().cloned().collect(),
        Some(rows) => {
            let mut per_request: BTreeMap<&RequestId, Vec<&Ranking>> = BTreeMap::new();
            for ((q, _), r) in rankings {
                per_request.entry(q).or_default().push(r);
            }
            let mut draws = Vec::with_capacity(rows.len());
            for row in rows {
                let key = (row.request.clone(), Iteration::Seq(row.seq_no));
                let ranking = match (rankings.get(&key), per_request.get(&row.request)) {
                    (Some(r), _) => r,
                    (None, Some(rs)) if rs.len() == 1 => rs[0],
                    (None, Some(_)) => {
                        return Err(IngestError::MissingDraw {
                            line: row.line,
                            request: row.request.to_string(),
                            seq_no: row.seq_no,
                        })
                    }
                    (None, None) => {
                        return Err(IngestError::UnknownRequest {
                            line: row.line,
                            request: row.request.to_string(),
                        })
                    }
                };
                draws.push(ranking.clone());
            }
            draws
        }
    };
    RankingSequence::new(draws).map_err(|e| IngestError::parse(0, e.to_string()))
}

/// Parse `qid,docid,score` rows; an optional header row is skipped.
pub fn parse_scores<R: io::Read>(reader: R) -> Result<ScoreTable, IngestError> {
    let mut rdr = csv_reader(reader, false);
    let mut table = ScoreTable::new();
    let mut rec = csv::StringRecord::new();
    let mut first = true;
    while rdr.read_record(&mut rec)? {
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(IngestError::parse(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        if std::mem::take(&mut first) && &rec[2] == "score" {
            continue;
        }
        let score = finite(line, "score", &rec[2])?;
        let prev = table
            .insert(
                request_id(line, &rec[0])?,
                document_id(line, &rec[1])?,
                score,
            )
            .map_err(|e| IngestError::parse(line, e.to_string()))?;
        if prev.is_some() {
            warn!(
                "scores line {line}: duplicate score for ({}, {}) overrides the earlier one",
                &rec[0], &rec[1]
            );
        }
    }
    Ok(table)
}

pub fn write_scores<W: Write>(w: W, scores: &ScoreTable) -> io::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["qid", "docid", "score"])?;
    for (q, d, s) in scores.iter() {
        out.write_record([q.as_str(), d.as_str(), &s.to_string()])?;
    }
    out.flush()
}
