//! System-level aggregation, the metric directionality registry and
//! Kendall's τ-c over system orderings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::domain::RequestId;
use crate::error::{Error, Result};
use crate::math::pairwise_sum;

/// Which end of a metric's range is fair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    ZeroIsFair,
    OneIsFair,
    HigherIsBetter,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ZeroIsFair => "zero_is_fair",
            Direction::OneIsFair => "one_is_fair",
            Direction::HigherIsBetter => "higher_is_better",
        }
    }

    /// Map a value so that larger means fairer.
    pub fn orient(self, value: f64) -> f64 {
        match self {
            Direction::ZeroIsFair => -value,
            Direction::OneIsFair | Direction::HigherIsBetter => value,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_is_fair" => Ok(Direction::ZeroIsFair),
            "one_is_fair" => Ok(Direction::OneIsFair),
            "higher_is_better" => Ok(Direction::HigherIsBetter),
            other => Err(Error::invalid(alloc::format!("unknown direction {other}"))),
        }
    }
}

/// Every metric the toolkit computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    PrefD,
    Awrf,
    Fair,
    Dp,
    Eed,
    Eur,
    Rur,
    Iaa,
    Eel,
    Eer,
    IntraAcc,
    InterAcc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 12] = [
        MetricKind::PrefD,
        MetricKind::Awrf,
        MetricKind::Fair,
        MetricKind::Dp,
        MetricKind::Eed,
        MetricKind::Eur,
        MetricKind::Rur,
        MetricKind::Iaa,
        MetricKind::Eel,
        MetricKind::Eer,
        MetricKind::IntraAcc,
        MetricKind::InterAcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::PrefD => "pref",
            MetricKind::Awrf => "awrf",
            MetricKind::Fair => "fair",
            MetricKind::Dp => "dp",
            MetricKind::Eed => "eed",
            MetricKind::Eur => "eur",
            MetricKind::Rur => "rur",
            MetricKind::Iaa => "iaa",
            MetricKind::Eel => "eel",
            MetricKind::Eer => "eer",
            MetricKind::IntraAcc => "intra_acc",
            MetricKind::InterAcc => "inter_acc",
        }
    }

    /// Orientation of the reported value. Ratio metrics are reported as
    /// `|log₂ ratio|` and signed differences as magnitudes, so both are
    /// zero-is-fair.
    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Fair => Direction::OneIsFair,
            MetricKind::Eer => Direction::HigherIsBetter,
            _ => Direction::ZeroIsFair,
        }
    }

    /// Whether the metric needs binomial (protected / unprotected) groups.
    pub fn is_binomial(self) -> bool {
        matches!(
            self,
            MetricKind::Fair
                | MetricKind::Dp
                | MetricKind::Eur
                | MetricKind::Rur
                | MetricKind::IntraAcc
                | MetricKind::InterAcc
        )
    }

    /// Whether the metric needs system scores.
    pub fn needs_scores(self) -> bool {
        matches!(
            self,
            MetricKind::Iaa | MetricKind::IntraAcc | MetricKind::InterAcc
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown metric {s}")))
    }
}

/// One metric value for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub metric: String,
    pub system: String,
    /// `None` when every request was degenerate.
    pub value: Option<f64>,
    pub n_requests: usize,
    pub n_degenerate: usize,
    pub direction: Direction,
}

/// Mean over non-degenerate requests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub value: f64,
    pub n_requests: usize,
    pub n_degenerate: usize,
}

/// Arithmetic mean of the non-degenerate (`Some`) per-request values.
/// Values are summed in sorted order, so the result does not depend on how
/// requests are labeled or ordered.
pub fn aggregate(per_request: &BTreeMap<RequestId, Option<f64>>) -> Result<Aggregate> {
    let mut values: Vec<f64> = per_request.values().flatten().copied().collect();
    let n_requests = per_request.len();
    let n_degenerate = n_requests - values.len();
    if values.is_empty() {
        return Err(Error::AllDegenerate);
    }
    values.sort_by(f64::total_cmp);
    Ok(Aggregate {
        value: pairwise_sum(&values) / values.len() as f64,
        n_requests,
        n_degenerate,
    })
}

/// Concordance counts of two paired value lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// `min(distinct x, distinct y)`.
    pub m: usize,
}

pub fn pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    if x.len() != y.len() {
        return Err(Error::invalid("value lists differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid(
            "rank correlation needs at least two systems",
        ));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in rank correlation input"));
    }
    let (mut c, mut d) = (0u64, 0u64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let s = (x[i] - x[j]) * (y[i] - y[j]);
            if s > 0.0 {
                c += 1;
            } else if s < 0.0 {
                d += 1;
            }
        }
    }
    let distinct = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<BTreeSet<_>>().len();
    Ok(PairCounts {
        concordant: c,
        discordant: d,
        m: distinct(x).min(distinct(y)),
    })
}

/// Stuart's τ-c between two metrics' system values, each oriented so that
/// larger is fairer.
pub fn kendall_tau_c(x: &[f64], y: &[f64], dir_x: Direction, dir_y: Direction) -> Result<f64> {
    let xo: Vec<f64> = x.iter().map(|v| dir_x.orient(*v) + 0.0).collect();
    let yo: Vec<f64> = y.iter().map(|v| dir_y.orient(*v) + 0.0).collect();
    let counts = pair_counts(&xo, &yo)?;
    if counts.m < 2 {
        return Err(Error::ConstantInput);
    }
    let n = x.len() as f64;
    let m = counts.m as f64;
    let diff = counts.concordant as f64 - counts.discordant as f64;
    Ok(2.0 * m * diff / (n * n * (m - 1.0)))
}

/// One metric's per-system values and orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricColumn {
    pub direction: Direction,
    pub values: BTreeMap<String, f64>,
}

/// Symmetric τ-c matrix; `None` marks pairs with fewer than two common
/// systems or a constant column.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub metrics: Vec<String>,
    pub taus: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == a)?;
        let j = self.metrics.iter().position(|m| m == b)?;
        self.taus[i][j]
    }
}

/// Pairwise τ-c over the systems each pair of metrics has in common.
pub fn correlation_matrix(columns: &BTreeMap<String, MetricColumn>) -> Result<CorrelationMatrix> {
    if columns.len() < 2 {
        return Err(Error::invalid("correlation needs at least two metrics"));
    }
    let metrics: Vec<String> = columns.keys().cloned().collect();
    let cols: Vec<&MetricColumn> = columns.values().collect();
    let k = cols.len();
    let mut taus = alloc::vec![alloc::vec![None; k]; k];
    for i in 0..k {
        taus[i][i] = Some(1.0);
        for j in i + 1..k {
            let (a, b) = (cols[i], cols[j]);
            let common: Vec<&String> = a
                .values
                .keys()
                .filter(|s| b.values.contains_key(*s))
                .collect();
            let x: Vec<f64> = common.iter().map(|s| a.values[*s]).collect();
            let y: Vec<f64> = common.iter().map(|s| b.values[*s]).collect();
            let tau = kendall_tau_c(&x, &y, a.direction, b.direction).ok();
            taus[i][j] = tau;
            taus[j][i] = tau;
        }
    }
    Ok(CorrelationMatrix { metrics, taus })
}
