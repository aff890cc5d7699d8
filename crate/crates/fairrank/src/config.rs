//! Evaluation configuration: which metrics to compute and their parameters.
//!
//! The file is TOML. Top-level keys set corpus options and defaults for
//! every metric; `[metric.<name>]` tables override parameters for one
//! metric and can define new named variants through `kind`:
//!
//! ```toml
//! protected = "g0"
//! metrics = ["pref", "awrf", "awrf_equal", "eel"]
//! gamma = 0.5
//!
//! [metric.awrf_equal]
//! kind = "awrf"
//! target = "equal"
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use fairrank_core::{
    DistanceKind, EedMode, FairCdf, MetricKind, RelevanceTable, StopFn, TargetDepth,
    UnlabeledPolicy, UtilityPool, WeightModel,
};
use toml::{Table, Value};

use crate::error::IngestError;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_STEP: usize = 10;
pub const DEFAULT_NEGATIVES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Metrics computed when the configuration does not list any.
pub const DEFAULT_METRICS: [&str; 13] = [
    "pref",
    "awrf",
    "awrf_equal",
    "fair",
    "dp",
    "eed",
    "eur",
    "rur",
    "iaa",
    "eel",
    "eer",
    "intra_acc",
    "inter_acc",
];

/// Browsing model as configured; cascade stopping needs the qrels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    Geometric { gamma: f64 },
    Logarithmic,
    Rbp { gamma: f64, verbatim: bool },
    Cascade { gamma: f64 },
}

impl WeightSpec {
    pub fn resolve(self, relevance: &RelevanceTable) -> WeightModel {
        match self {
            WeightSpec::Geometric { gamma } => WeightModel::Geometric { gamma },
            WeightSpec::Logarithmic => WeightModel::Logarithmic,
            WeightSpec::Rbp { gamma, verbatim } => WeightModel::Rbp {
                gamma,
                verbatim_exponent: verbatim,
            },
            WeightSpec::Cascade { gamma } => WeightModel::Cascade {
                gamma,
                stop: StopFn::Scaled {
                    max_grade: relevance.max_grade(),
                },
            },
        }
    }
}

/// Where a metric's target group distribution comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetMode {
    /// Mean alignment over all labeled catalog documents.
    Catalog,
    /// Equal share for every known group.
    Equal,
    /// The composition of each list (prefix fairness only).
    Composition,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub kind: MetricKind,
    pub weight: WeightSpec,
    pub distance: DistanceKind,
    pub target: TargetMode,
    pub threshold: f64,
    pub step: usize,
    pub n_negatives: usize,
    pub seed: u64,
    pub fair_cdf: FairCdf,
    pub eed_mode: EedMode,
    pub depth: TargetDepth,
    pub pool: UtilityPool,
    /// Fail the evaluation when the metric is undefined for a system.
    pub required: bool,
    /// Report signed values instead of magnitudes.
    pub signed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Protected group label; defaults to the first known alignment column.
    pub protected: Option<String>,
    pub unlabeled: UnlabeledPolicy,
    pub metrics: Vec<MetricSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        parse_config("").expect("empty configuration is valid")
    }
}

impl EvalConfig {
    pub fn thresholds(&self) -> BTreeSet<u64> {
        self.metrics.iter().map(|m| m.threshold.to_bits()).collect()
    }
}

pub fn load_config(path: &Path) -> Result<EvalConfig, IngestError> {
    parse_config(&std::fs::read_to_string(path)?)
}

const TOP_KEYS: [&str; 4] = ["protected", "unlabeled", "metrics", "metric"];
const PARAM_KEYS: [&str; 15] = [
    "weight",
    "gamma",
    "rbp_verbatim",
    "distance",
    "target",
    "threshold",
    "step",
    "n_negatives",
    "seed",
    "fair_cdf",
    "eed_mode",
    "depth",
    "pool",
    "required",
    "signed",
];

pub fn parse_config(text: &str) -> Result<EvalConfig, IngestError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| IngestError::Syntax(e.to_string()))?;
    for key in root.keys() {
        if !TOP_KEYS.contains(&key.as_str()) && !PARAM_KEYS.contains(&key.as_str()) {
            return Err(IngestError::domain(key, "unknown key"));
        }
    }
    let protected = opt_str(&root, "", "protected")?.map(str::to_owned);
    let unlabeled = match opt_str(&root, "", "unlabeled")? {
        None | Some("exclude") => UnlabeledPolicy::Exclude,
        Some("unknown") => UnlabeledPolicy::Unknown,
        Some("error") => UnlabeledPolicy::Error,
        Some(other) => {
            return Err(choice_error(
                "unlabeled",
                other,
                &["exclude", "unknown", "error"],
            ))
        }
    };

    let tables = match root.get("metric") {
        None => Table::new(),
        Some(Value::Table(t)) => t.clone(),
        Some(_) => {
            return Err(IngestError::domain(
                "metric",
                "expected a table of metric tables",
            ))
        }
    };
    let names: Vec<String> = match root.get("metrics") {
        None => {
            let mut names: Vec<String> = DEFAULT_METRICS.iter().map(|s| s.to_string()).collect();
            names.extend(
                tables
                    .keys()
                    .filter(|k| !DEFAULT_METRICS.contains(&k.as_str()))
                    .cloned(),
            );
            names
        }
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str().map(str::to_owned).ok_or_else(|| {
                    IngestError::domain(format!("metrics[{i}]"), "expected a metric name")
                })
            })
            .collect::<Result<_, _>>()?,
        Some(_) => {
            return Err(IngestError::domain(
                "metrics",
                "expected a list of metric names",
            ))
        }
    };
    for name in tables.keys() {
        if !names.contains(name) {
            return Err(IngestError::domain(
                format!("metric.{name}"),
                "metric is not listed in `metrics`",
            ));
        }
    }

    let mut metrics = Vec::with_capacity(names.len());
    let mut seen = BTreeSet::new();
    for (i, name) in names.iter().enumerate() {
        if !seen.insert(name) {
            return Err(IngestError::domain(
                format!("metrics[{i}]"),
                format!("metric {name} listed twice"),
            ));
        }
        let local = match tables.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                return Err(IngestError::domain(
                    format!("metric.{name}"),
                    "expected a table",
                ))
            }
        };
        metrics.push(metric_spec(name, i, &root, local)?);
    }
    Ok(EvalConfig {
        protected,
        unlabeled,
        metrics,
    })
}

/// Parameter lookup: the metric's own table first, then the top level.
struct Params<'a> {
    name: &'a str,
    root: &'a Table,
    local: Option<&'a Table>,
}

impl<'a> Params<'a> {
    fn get(&self, key: &str) -> Option<(String, &'a Value)> {
        if let Some(v) = self.local.and_then(|t| t.get(key)) {
            return Some((format!("metric.{}.{key}", self.name), v));
        }
        self.root.get(key).map(|v| (key.to_owned(), v))
    }

    fn str(&self, key: &str) -> Result<Option<(String, &'a str)>, IngestError> {
        match self.get(key) {
            None => Ok(None),
            Some((path, Value::String(s))) => Ok(Some((path, s.as_str()))),
            Some((path, _)) => Err(IngestError::domain(path, "expected a string")),
        }
    }

    fn float(&self, key: &str) -> Result<Option<(String, f64)>, IngestError> {
        match self.get(key) {
            None => Ok(None),
            Some((path, Value::Float(x))) => Ok(Some((path, *x))),
            Some((path, Value::Integer(n))) => Ok(Some((path, *n as f64))),
            Some((path, _)) => Err(IngestError::domain(path, "expected a number")),
        }
    }

    fn int(&self, key: &str) -> Result<Option<(String, i64)>, IngestError> {
        match self.get(key) {
            None => Ok(None),
            Some((path, Value::Integer(n))) => Ok(Some((path, *n))),
            Some((path, _)) => Err(IngestError::domain(path, "expected an integer")),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, IngestError> {
        match self.get(key) {
            None => Ok(None),
            Some((_, Value::Boolean(b))) => Ok(Some(*b)),
            Some((path, _)) => Err(IngestError::domain(path, "expected true or false")),
        }
    }

    fn choice<T: Copy>(
        &self,
        key: &str,
        options: &[(&str, T)],
        default: T,
    ) -> Result<T, IngestError> {
        let Some((path, s)) = self.str(key)? else {
            return Ok(default);
        };
        options
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                choice_error(&path, s, &names)
            })
    }
}

fn choice_error(path: &str, got: &str, options: &[&str]) -> IngestError {
    IngestError::domain(
        path,
        format!("{got:?} is not one of {}", options.join(", ")),
    )
}

fn opt_str<'a>(table: &'a Table, prefix: &str, key: &str) -> Result<Option<&'a str>, IngestError> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(IngestError::domain(
            format!("{prefix}{key}"),
            "expected a string",
        )),
    }
}

fn default_weight(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Dp | MetricKind::Eur | MetricKind::Rur => "logarithmic",
        MetricKind::Eed | MetricKind::Eel | MetricKind::Eer => "rbp",
        _ => "geometric",
    }
}

fn metric_spec(
    name: &str,
    index: usize,
    root: &Table,
    local: Option<&Table>,
) -> Result<MetricSpec, IngestError> {
    if let Some(t) = local {
        for key in t.keys() {
            if key != "kind" && !PARAM_KEYS.contains(&key.as_str()) {
                return Err(IngestError::domain(
                    format!("metric.{name}.{key}"),
                    "unknown key",
                ));
            }
        }
    }
    let kind = match local
        .map(|t| opt_str(t, &format!("metric.{name}."), "kind"))
        .transpose()?
        .flatten()
    {
        Some(k) => MetricKind::from_str(k).map_err(|_| IngestError::UnknownMetric {
            path: format!("metric.{name}.kind"),
            name: k.to_owned(),
        })?,
        None => match name {
            "awrf_equal" => MetricKind::Awrf,
            _ => MetricKind::from_str(name).map_err(|_| IngestError::UnknownMetric {
                path: format!("metrics[{index}]"),
                name: name.to_owned(),
            })?,
        },
    };
    let p = Params { name, root, local };

    let gamma = match p.float("gamma")? {
        None => DEFAULT_GAMMA,
        Some((path, g)) => {
            if !(g > 0.0 && g <= 1.0) {
                return Err(IngestError::domain(
                    path,
                    format!("gamma {g} must lie in (0, 1]"),
                ));
            }
            g
        }
    };
    let weight = match p.str("weight")? {
        None => default_weight(kind),
        Some((_, w)) => w,
    };
    let weight = match weight {
        "geometric" => {
            if gamma >= 1.0 {
                let path = p.get("gamma").map_or("gamma".into(), |(path, _)| path);
                return Err(IngestError::domain(
                    path,
                    "geometric gamma must lie in (0, 1)",
                ));
            }
            WeightSpec::Geometric { gamma }
        }
        "logarithmic" => WeightSpec::Logarithmic,
        "rbp" => WeightSpec::Rbp {
            gamma,
            verbatim: p.bool("rbp_verbatim")?.unwrap_or(false),
        },
        "cascade" => WeightSpec::Cascade { gamma },
        other => {
            let path = p.get("weight").map_or("weight".into(), |(path, _)| path);
            return Err(choice_error(
                &path,
                other,
                &["geometric", "logarithmic", "rbp", "cascade"],
            ));
        }
    };

    let distance = p.choice(
        "distance",
        &[
            ("nd", DistanceKind::Nd),
            ("rd", DistanceKind::Rd),
            ("kl", DistanceKind::Kl),
        ],
        DistanceKind::Nd,
    )?;

    let default_target = match (kind, name) {
        (MetricKind::PrefD, _) => TargetMode::Composition,
        (_, "awrf_equal") => TargetMode::Equal,
        _ => TargetMode::Catalog,
    };
    let target = match p.get("target") {
        None => default_target,
        Some((path, Value::String(s))) => match s.as_str() {
            "catalog" => TargetMode::Catalog,
            "equal" => TargetMode::Equal,
            "composition" if kind == MetricKind::PrefD => TargetMode::Composition,
            "composition" => {
                return Err(IngestError::domain(
                    path,
                    "the composition target applies to pref only",
                ))
            }
            other => {
                return Err(choice_error(
                    &path,
                    other,
                    &["catalog", "equal", "composition"],
                ))
            }
        },
        Some((path, Value::Array(items))) => {
            let probs = items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(n) => Ok(*n as f64),
                    _ => Err(IngestError::domain(path.clone(), "expected numbers")),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|x| !(*x >= 0.0))
                || (sum - 1.0).abs() > fairrank_core::math::SUM_TOLERANCE
            {
                return Err(IngestError::domain(
                    path,
                    "target must be non-negative and sum to 1",
                ));
            }
            TargetMode::Custom(probs)
        }
        Some((path, _)) => {
            return Err(IngestError::domain(
                path,
                "expected a target name or a list",
            ))
        }
    };

    let threshold = match p.float("threshold")? {
        None => DEFAULT_THRESHOLD,
        Some((path, t)) if !(t > 0.0 && t <= 1.0) => {
            return Err(IngestError::domain(
                path,
                format!("threshold {t} must lie in (0, 1]"),
            ))
        }
        Some((_, t)) => t,
    };
    let step = match p.int("step")? {
        None => DEFAULT_STEP,
        Some((path, s)) if s < 2 => {
            return Err(IngestError::domain(
                path,
                format!("step {s} must be at least 2"),
            ))
        }
        Some((_, s)) => s as usize,
    };
    let n_negatives = match p.int("n_negatives")? {
        None => DEFAULT_NEGATIVES,
        Some((path, n)) if n < 1 => {
            return Err(IngestError::domain(
                path,
                format!("n_negatives {n} must be positive"),
            ))
        }
        Some((_, n)) => n as usize,
    };
    let seed = match p.int("seed")? {
        None => DEFAULT_SEED,
        Some((path, n)) if n < 0 => {
            return Err(IngestError::domain(path, "seed must be non-negative"))
        }
        Some((_, n)) => n as u64,
    };
    Ok(MetricSpec {
        name: name.to_owned(),
        kind,
        weight,
        distance,
        target,
        threshold,
        step,
        n_negatives,
        seed,
        fair_cdf: p.choice(
            "fair_cdf",
            &[("full", FairCdf::Full), ("from_one", FairCdf::FromOne)],
            FairCdf::Full,
        )?,
        eed_mode: p.choice(
            "eed_mode",
            &[("parity", EedMode::Parity), ("raw", EedMode::Raw)],
            EedMode::Parity,
        )?,
        depth: p.choice(
            "depth",
            &[
                ("ranking_length", TargetDepth::RankingLength),
                ("unbounded", TargetDepth::Unbounded),
            ],
            TargetDepth::RankingLength,
        )?,
        pool: p.choice(
            "pool",
            &[
                ("judged", UtilityPool::Judged),
                ("retrieved", UtilityPool::Retrieved),
            ],
            UtilityPool::Judged,
        )?,
        required: p.bool("required")?.unwrap_or(false),
        signed: p.bool("signed")?.unwrap_or(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = parse_config("").unwrap();
        let names: Vec<&str> = c.metrics.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, DEFAULT_METRICS);
        let awrf = &c.metrics[1];
        assert_eq!(awrf.weight, WeightSpec::Geometric { gamma: 0.5 });
        assert_eq!(
            (awrf.distance, awrf.target.clone()),
            (DistanceKind::Nd, TargetMode::Catalog)
        );
        assert_eq!(
            (awrf.threshold, awrf.step, awrf.n_negatives, awrf.seed),
            (0.5, 10, 10_000, 42)
        );
        assert_eq!(c.metrics[2].target, TargetMode::Equal);
        assert_eq!(c.metrics[0].target, TargetMode::Composition);
        assert_eq!(c.unlabeled, UnlabeledPolicy::Exclude);
    }

    #[test]
    fn gamma_out_of_domain() {
        let e = parse_config("gamma = 1.5").unwrap_err();
        assert!(matches!(e, IngestError::ParameterOutOfDomain { ref path, .. } if path == "gamma"));
        let e = parse_config("metrics = [\"awrf\"]\n[metric.awrf]\ngamma = 1.0").unwrap_err();
        assert!(
            matches!(e, IngestError::ParameterOutOfDomain { ref path, .. } if path == "metric.awrf.gamma")
        );
        // γ = 1 is a valid RBP patience.
        assert!(parse_config("metrics = [\"eed\"]\ngamma = 1.0").is_ok());
    }

    #[test]
    fn equal_target() {
        let c = parse_config("target = \"equal\"\nmetrics = [\"awrf\", \"fair\"]").unwrap();
        assert!(c.metrics.iter().all(|m| m.target == TargetMode::Equal));
    }

    #[test]
    fn unknown_metric_path() {
        let e = parse_config("metrics = [\"awrf\", \"nope\"]").unwrap_err();
        assert!(
            matches!(e, IngestError::UnknownMetric { ref path, ref name } if path == "metrics[1]" && name == "nope")
        );
        let e = parse_config("metrics = [\"x\"]\n[metric.x]\nkind = \"bogus\"").unwrap_err();
        assert!(
            matches!(e, IngestError::UnknownMetric { ref path, .. } if path == "metric.x.kind")
        );
    }

    #[test]
    fn named_variants_and_overrides() {
        let c = parse_config(
            "metrics = [\"eel\", \"awrf_kl\"]\ndistance = \"rd\"\n\
             [metric.awrf_kl]\nkind = \"awrf\"\ndistance = \"kl\"\ntarget = [0.25, 0.75]\nweight = \"logarithmic\"",
        )
        .unwrap();
        assert_eq!(c.metrics[0].distance, DistanceKind::Rd);
        assert_eq!(
            c.metrics[0].weight,
            WeightSpec::Rbp {
                gamma: 0.5,
                verbatim: false
            }
        );
        let m = &c.metrics[1];
        assert_eq!((m.kind, m.distance), (MetricKind::Awrf, DistanceKind::Kl));
        assert_eq!(m.target, TargetMode::Custom(vec![0.25, 0.75]));
        assert_eq!(m.weight, WeightSpec::Logarithmic);
    }

    #[test]
    fn domain_guards() {
        for (text, path) in [
            ("step = 1", "step"),
            ("threshold = 0", "threshold"),
            ("n_negatives = 0", "n_negatives"),
            ("distance = \"l2\"", "distance"),
            ("target = [0.5, 0.6]", "target"),
            ("target = \"composition\"\nmetrics = [\"awrf\"]", "target"),
            ("bogus = 1", "bogus"),
        ] {
            let e = parse_config(text).unwrap_err();
            assert!(
                matches!(e, IngestError::ParameterOutOfDomain { path: ref p, .. } if p == path),
                "{text}: {e}"
            );
        }
        assert!(matches!(
            parse_config("gamma = ").unwrap_err(),
            IngestError::Syntax(_)
        ));
    }
}
