//! Delimited output tables: per-system metric values, supporting details,
//! and τ-c correlation matrices.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use fairrank_core::report::MetricColumn;
use fairrank_core::{CorrelationMatrix, Direction, MetricResult};

use crate::error::IngestError;
use crate::eval::Detail;

pub const METRICS_FILE: &str = "metrics.csv";
pub const DETAILS_FILE: &str = "details.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const CORRELATION_LONG_FILE: &str = "correlation_long.csv";

/// Marker for undefined values.
pub const MISSING: &str = "NA";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

pub fn parse_direction(s: &str) -> Option<Direction> {
    [
        Direction::ZeroIsFair,
        Direction::OneIsFair,
        Direction::HigherIsBetter,
    ]
    .into_iter()
    .find(|d| d.as_str() == s)
}

/// `system,metric,value,n_requests,n_degenerate,direction`, sorted by
/// system then metric.
pub fn write_metrics<W: Write>(w: W, results: &[MetricResult]) -> io::Result<()> {
    let mut rows: Vec<&MetricResult> = results.iter().collect();
    rows.sort_by(|a, b| (&a.system, &a.metric).cmp(&(&b.system, &b.metric)));
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "system",
        "metric",
        "value",
        "n_requests",
        "n_degenerate",
        "direction",
    ])?;
    for r in rows {
        out.write_record([
            r.system.as_str(),
            &r.metric,
            &cell(r.value),
            &r.n_requests.to_string(),
            &r.n_degenerate.to_string(),
            r.direction.as_str(),
        ])?;
    }
    out.flush()
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricResult>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 {
            return Err(IngestError::parse(
                line,
                format!("expected 6 fields, found {}", rec.len()),
            ));
        }
        let value =
            match &rec[2] {
                MISSING => None,
                v => Some(v.parse::<f64>().map_err(|_| {
                    IngestError::parse(line, format!("value {v:?} is not a number"))
                })?),
            };
        let count = |i: usize| {
            rec[i].parse::<usize>().map_err(|_| {
                IngestError::parse(line, format!("count {:?} is not an integer", &rec[i]))
            })
        };
        out.push(MetricResult {
            system: rec[0].to_string(),
            metric: rec[1].to_string(),
            value,
            n_requests: count(3)?,
            n_degenerate: count(4)?,
            direction: parse_direction(&rec[5]).ok_or_else(|| {
                IngestError::parse(line, format!("unknown direction {:?}", &rec[5]))
            })?,
        });
    }
    Ok(out)
}

/// `system,metric,statistic,value`, sorted.
pub fn write_details<W: Write>(w: W, details: &[Detail]) -> io::Result<()> {
    let mut rows: Vec<&Detail> = details.iter().collect();
    rows.sort_by(|a, b| {
        (&a.system, &a.metric, &a.statistic).cmp(&(&b.system, &b.metric, &b.statistic))
    });
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["system", "metric", "statistic", "value"])?;
    for d in rows {
        out.write_record([
            d.system.as_str(),
            &d.metric,
            &d.statistic,
            &d.value.to_string(),
        ])?;
    }
    out.flush()
}

/// Metric columns for correlation; undefined values are left out.
pub fn metric_columns(results: &[MetricResult]) -> BTreeMap<String, MetricColumn> {
    let mut columns: BTreeMap<String, MetricColumn> = BTreeMap::new();
    for r in results {
        let col = columns
            .entry(r.metric.clone())
            .or_insert_with(|| MetricColumn {
                direction: r.direction,
                values: BTreeMap::new(),
            });
        if let Some(v) = r.value {
            col.values.insert(r.system.clone(), v);
        }
    }
    columns
}

/// Square matrix with a `metric` header row and column.
pub fn write_correlation<W: Write>(w: W, m: &CorrelationMatrix) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["metric"];
    header.extend(m.metrics.iter().map(String::as_str));
    out.write_record(&header)?;
    for (name, row) in m.metrics.iter().zip(&m.taus) {
        let mut fields = vec![name.clone()];
        fields.extend(row.iter().map(|t| cell(*t)));
        out.write_record(&fields)?;
    }
    out.flush()
}

/// Long format `metric_a,metric_b,tau_c`, one row per ordered pair.
pub fn write_correlation_long<W: Write>(w: W, m: &CorrelationMatrix) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric_a", "metric_b", "tau_c"])?;
    for (a, row) in m.metrics.iter().zip(&m.taus) {
        for (b, t) in m.metrics.iter().zip(row) {
            out.write_record([a.as_str(), b, &cell(*t)])?;
        }
    }
    out.flush()
}
