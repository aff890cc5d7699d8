//! Per-system metric evaluation over a shared corpus.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use fairrank_core::opportunity::SequenceMetric;
use fairrank_core::pairwise::PairTally;
use fairrank_core::{
    aggregate, awrf, demographic_parity, discounted_group_utility, eed, eur, expected_exposure,
    fair_for_ranking, group_utility, iaa_for_sequence, intra_inter, pref_fairness, rur,
    system_exposure, tally_pairs, AlignmentMatrix, Degeneracy, DocumentId, Error, ExpectedExposure,
    ExposureVector, GroupSpace, MetricKind, MetricResult, PairSampling, PrefixTarget, Ranking,
    RankingSequence, Ratio, RelevanceTable, RequestId, ScoreTable, SingleListResult,
    TargetDistribution, UnlabeledPolicy, WeightModel,
};
use log::{info, warn};

use crate::config::{EvalConfig, MetricSpec, TargetMode};
use crate::ingest::AlignmentFile;

/// Relevance and group alignment shared by every evaluated system.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub relevance: RelevanceTable,
    pub alignment: AlignmentMatrix,
    pub groups: GroupSpace,
    /// Mean alignment of the labeled catalog, before any unlabeled fill.
    pub catalog: Option<Vec<f64>>,
    binarized: BTreeMap<u64, (AlignmentMatrix, GroupSpace)>,
}

impl Corpus {
    /// Resolve the protected group, apply the unlabeled policy to `docs`, and
    /// binarize the alignment at every configured threshold.
    pub fn new<'a>(
        relevance: RelevanceTable,
        alignment: AlignmentFile,
        config: &EvalConfig,
        docs: impl IntoIterator<Item = &'a DocumentId>,
    ) -> Result<Self, Error> {
        let AlignmentFile {
            mut groups,
            matrix: mut alignment,
            ..
        } = alignment;
        let protected = match &config.protected {
            Some(p) => p.clone(),
            None => groups
                .known_indices()
                .next()
                .map(|i| groups.names()[i].clone())
                .ok_or_else(|| Error::invalid("alignment has no known group"))?,
        };
        groups = groups.with_protected(&protected)?;
        let catalog = alignment.catalog_mean();
        let missing = alignment.fill_unlabeled(docs, &groups, config.unlabeled)?;
        if missing > 0 {
            match config.unlabeled {
                UnlabeledPolicy::Unknown => {
                    info!("{missing} unlabeled documents assigned to the unknown group")
                }
                _ => info!("{missing} retrieved or judged documents are unlabeled"),
            }
        }
        let mut binarized = BTreeMap::new();
        for bits in config.thresholds() {
            if config
                .metrics
                .iter()
                .any(|m| m.kind.is_binomial() && m.threshold.to_bits() == bits)
            {
                binarized.insert(bits, alignment.binarize(&groups, f64::from_bits(bits))?);
            }
        }
        Ok(Self {
            relevance,
            alignment,
            groups,
            catalog,
            binarized,
        })
    }

    fn binary(&self, threshold: f64) -> Result<&(AlignmentMatrix, GroupSpace), Error> {
        self.binarized
            .get(&threshold.to_bits())
            .ok_or_else(|| Error::invalid("no binarized alignment for threshold"))
    }

    fn target(&self, mode: &TargetMode) -> Result<TargetDistribution, Error> {
        match mode {
            TargetMode::Catalog => {
                let mean = self
                    .catalog
                    .as_ref()
                    .ok_or(Error::Empty("labeled catalog"))?;
                TargetDistribution::new(mean.clone())
            }
            TargetMode::Equal => TargetDistribution::equal_over_known(&self.groups),
            TargetMode::Custom(p) => {
                if p.len() != self.groups.len() {
                    return Err(Error::invalid(format!(
                        "custom target has {} entries for {} groups",
                        p.len(),
                        self.groups.len()
                    )));
                }
                TargetDistribution::new(p.clone())
            }
            TargetMode::Composition => Err(Error::invalid(
                "composition target applies to prefix fairness only",
            )),
        }
    }
}

/// One system: its ranking sequence and optional predicted scores.
#[derive(Debug, Clone)]
pub struct SystemInput {
    pub name: String,
    pub sequence: RankingSequence,
    pub scores: Option<Arc<ScoreTable>>,
}

/// Supporting statistic for one metric value.
#[derive(Debug, Clone, PartialEq)]
pub struct Detail {
    pub system: String,
    pub metric: String,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemReport {
    pub results: Vec<MetricResult>,
    pub details: Vec<Detail>,
    /// Metrics skipped for missing inputs, with the reason.
    pub skipped: Vec<(String, String)>,
}

struct Outcome {
    value: Option<f64>,
    n_requests: usize,
    n_degenerate: usize,
    details: Vec<(String, f64)>,
}

impl Outcome {
    fn system_level(
        n_requests: usize,
        result: Result<(f64, Vec<(String, f64)>), Error>,
    ) -> Result<Self, Error> {
        match result {
            Ok((value, details)) => Ok(Outcome {
                value: Some(value),
                n_requests,
                n_degenerate: 0,
                details,
            }),
            Err(Error::Degenerate(d)) => Ok(Outcome {
                value: None,
                n_requests,
                n_degenerate: n_requests,
                details: vec![(format!("flag.{d}"), 1.0)],
            }),
            Err(e) => Err(e),
        }
    }
}

fn ratio_value(r: Ratio, signed: bool) -> (f64, Vec<(String, f64)>) {
    let v = if signed { r.log2 } else { r.magnitude() };
    (v, vec![("ratio".into(), r.ratio), ("log2".into(), r.log2)])
}

fn exposure_details(eps: &ExposureVector, groups: &GroupSpace) -> Vec<(String, f64)> {
    groups
        .names()
        .iter()
        .zip(eps.as_slice())
        .map(|(g, e)| (format!("exposure.{g}"), *e))
        .collect()
}

/// Cache of shared per-system intermediates.
struct Scratch<'a> {
    by_request: BTreeMap<&'a RequestId, Vec<&'a Ranking>>,
    exposures: HashMap<(u64, String), ExposureVector>,
    tallies: HashMap<(u64, usize, u64), Result<PairTally, Error>>,
    expected: HashMap<String, Result<SequenceMetric<ExpectedExposure>, Error>>,
}

/// Evaluate every configured metric for one system.
pub fn evaluate_system(
    corpus: &Corpus,
    config: &EvalConfig,
    system: &SystemInput,
) -> Result<SystemReport, Error> {
    let mut scratch = Scratch {
        by_request: system.sequence.by_request(),
        exposures: HashMap::new(),
        tallies: HashMap::new(),
        expected: HashMap::new(),
    };
    let mut report = SystemReport::default();
    for spec in &config.metrics {
        if spec.kind.needs_scores() && system.scores.is_none() {
            let reason = "no score file for this system".to_string();
            warn!("{}: skipping {}: {reason}", system.name, spec.name);
            report.skipped.push((spec.name.clone(), reason));
            continue;
        }
        let outcome = evaluate_metric(corpus, spec, system, &mut scratch)?;
        if outcome.n_degenerate > 0 {
            info!(
                "{}: {} degenerate for {} of {} requests",
                system.name, spec.name, outcome.n_degenerate, outcome.n_requests
            );
        }
        report.results.push(MetricResult {
            metric: spec.name.clone(),
            system: system.name.clone(),
            value: outcome.value,
            n_requests: outcome.n_requests,
            n_degenerate: outcome.n_degenerate,
            direction: spec.kind.direction(),
        });
        report.details.extend(
            outcome
                .details
                .into_iter()
                .map(|(statistic, value)| Detail {
                    system: system.name.clone(),
                    metric: spec.name.clone(),
                    statistic,
                    value,
                }),
        );
    }
    Ok(report)
}

fn evaluate_metric(
    corpus: &Corpus,
    spec: &MetricSpec,
    system: &SystemInput,
    scratch: &mut Scratch<'_>,
) -> Result<Outcome, Error> {
    let model = spec.weight.resolve(&corpus.relevance);
    let seq = &system.sequence;
    let n_requests = scratch.by_request.len();
    match spec.kind {
        MetricKind::PrefD => {
            let target = match spec.target {
                TargetMode::Composition => PrefixTarget::Composition,
                ref mode => PrefixTarget::Fixed(corpus.target(mode)?),
            };
            per_list(scratch, spec, |r| {
                pref_fairness(
                    r,
                    &corpus.alignment,
                    &corpus.groups,
                    &target,
                    spec.distance,
                    spec.step,
                )
            })
        }
        MetricKind::Awrf => {
            let target = corpus.target(&spec.target)?;
            per_list(scratch, spec, |r| {
                awrf(
                    r,
                    &corpus.alignment,
                    &corpus.groups,
                    &model,
                    Some(&corpus.relevance),
                    &target,
                    spec.distance,
                )
            })
        }
        MetricKind::Fair => {
            let p_hat = corpus
                .target(&spec.target)?
                .protected_share(&corpus.groups)?;
            per_list(scratch, spec, |r| {
                fair_for_ranking(
                    r,
                    &corpus.alignment,
                    &corpus.groups,
                    spec.threshold,
                    p_hat,
                    spec.fair_cdf,
                )
            })
        }
        MetricKind::Dp => {
            let (align, groups) = corpus.binary(spec.threshold)?;
            let eps = cached_exposure(scratch, corpus, align, groups, &model, spec.threshold)?;
            let mut details = exposure_details(&eps, groups);
            let result = demographic_parity(&eps, groups).map(|r| {
                let (v, d) = ratio_value(r, spec.signed);
                details.extend(d);
                (v, details)
            });
            Outcome::system_level(n_requests, result)
        }
        MetricKind::Eed => {
            let eps = cached_exposure(
                scratch,
                corpus,
                &corpus.alignment,
                &corpus.groups,
                &model,
                f64::NAN,
            )?;
            let details = exposure_details(&eps, &corpus.groups);
            Outcome::system_level(n_requests, eed(&eps, spec.eed_mode).map(|v| (v, details)))
        }
        MetricKind::Eur => {
            let (align, groups) = corpus.binary(spec.threshold)?;
            let eps = cached_exposure(scratch, corpus, align, groups, &model, spec.threshold)?;
            let result = group_utility(seq, &corpus.relevance, align, groups, spec.pool).and_then(
                |upsilon| {
                    let r = eur(&eps, &upsilon, groups)?;
                    let (v, mut d) = ratio_value(r, spec.signed);
                    d.extend(
                        groups
                            .names()
                            .iter()
                            .zip(&upsilon)
                            .map(|(g, u)| (format!("utility.{g}"), *u)),
                    );
                    d.extend(exposure_details(&eps, groups));
                    Ok((v, d))
                },
            );
            Outcome::system_level(n_requests, result)
        }
        MetricKind::Rur => {
            let (align, groups) = corpus.binary(spec.threshold)?;
            let result = group_utility(seq, &corpus.relevance, align, groups, spec.pool).and_then(
                |upsilon| {
                    let disc =
                        discounted_group_utility(seq, &corpus.relevance, align, groups, &model)?;
                    let r = rur(&disc, &upsilon, groups)?;
                    let (v, mut d) = ratio_value(r, spec.signed);
                    d.extend(
                        groups
                            .names()
                            .iter()
                            .zip(&upsilon)
                            .map(|(g, u)| (format!("utility.{g}"), *u)),
                    );
                    d.extend(
                        groups
                            .names()
                            .iter()
                            .zip(&disc)
                            .map(|(g, u)| (format!("discounted.{g}"), *u)),
                    );
                    Ok((v, d))
                },
            );
            Outcome::system_level(n_requests, result)
        }
        MetricKind::Iaa => {
            let scores = system.scores.as_deref().expect("checked by caller");
            let result = iaa_for_sequence(
                seq,
                scores,
                &corpus.alignment,
                &corpus.groups,
                &model,
                Some(&corpus.relevance),
            );
            sequence_outcome(n_requests, result.map(|m| (m, Vec::new())))
        }
        MetricKind::Eel | MetricKind::Eer => {
            let key = format!("{model:?}/{:?}", spec.depth);
            let result = scratch.expected.entry(key).or_insert_with(|| {
                expected_exposure(
                    seq,
                    &corpus.relevance,
                    &corpus.alignment,
                    &corpus.groups,
                    &model,
                    spec.depth,
                )
            });
            let result = result.clone().map(|m| {
                let ee = m.value;
                let value = if spec.kind == MetricKind::Eel {
                    ee.eel
                } else {
                    ee.eer
                };
                let details = vec![
                    ("eel".into(), ee.eel),
                    ("eer".into(), ee.eer),
                    ("eed_raw".into(), ee.eed_raw),
                    ("target_sq".into(), ee.target_sq),
                ];
                (
                    SequenceMetric {
                        value,
                        n_requests: m.n_requests,
                        n_skipped: m.n_skipped,
                    },
                    details,
                )
            });
            sequence_outcome(n_requests, result)
        }
        MetricKind::IntraAcc | MetricKind::InterAcc => {
            let scores = system.scores.as_deref().expect("checked by caller");
            let (align, groups) = corpus.binary(spec.threshold)?;
            let key = (spec.threshold.to_bits(), spec.n_negatives, spec.seed);
            let tally = scratch.tallies.entry(key).or_insert_with(|| {
                let params = PairSampling {
                    threshold: spec.threshold,
                    n_negatives: spec.n_negatives,
                    seed: spec.seed,
                };
                tally_pairs(&corpus.relevance, scores, align, groups, params)
            });
            let tally = tally.as_ref().map_err(Clone::clone)?;
            let result = tally.accuracy_table(groups).map(|acc| {
                let (intra, inter) = intra_inter(&acc);
                let v = if spec.kind == MetricKind::IntraAcc {
                    intra
                } else {
                    inter
                };
                let v = if spec.signed { v } else { v.abs() };
                let details = vec![
                    ("acc.protected_protected".into(), acc.protected_protected),
                    (
                        "acc.protected_unprotected".into(),
                        acc.protected_unprotected,
                    ),
                    (
                        "acc.unprotected_protected".into(),
                        acc.unprotected_protected,
                    ),
                    (
                        "acc.unprotected_unprotected".into(),
                        acc.unprotected_unprotected,
                    ),
                    ("requests_exhaustive".into(), tally.n_exhaustive as f64),
                ];
                (v, details)
            });
            Outcome::system_level(tally.n_requests, result)
        }
    }
}

/// System exposure, cached per alignment (keyed by threshold; NaN for the
/// full alignment) and browsing model.
fn cached_exposure(
    scratch: &mut Scratch<'_>,
    corpus: &Corpus,
    align: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
    threshold: f64,
) -> Result<ExposureVector, Error> {
    let key = (threshold.to_bits(), format!("{model:?}"));
    if let Some(eps) = scratch.exposures.get(&key) {
        return Ok(eps.clone());
    }
    let mut per_request = BTreeMap::new();
    for (q, draws) in &scratch.by_request {
        let eps = fairrank_core::exposure::mean_draw_exposure(
            draws,
            align,
            model,
            Some(&corpus.relevance),
            groups,
        )?;
        per_request.insert((*q).clone(), eps);
    }
    let eps = system_exposure(&per_request, None)?;
    scratch.exposures.insert(key, eps.clone());
    Ok(eps)
}

/// Single-list metric: per request, the mean over unflagged draws; requests
/// whose draws are all flagged count as degenerate.
fn per_list(
    scratch: &Scratch<'_>,
    spec: &MetricSpec,
    metric: impl Fn(&Ranking) -> Result<SingleListResult, Error>,
) -> Result<Outcome, Error> {
    let mut per_request = BTreeMap::new();
    let mut flags: BTreeMap<Degeneracy, usize> = BTreeMap::new();
    for (q, draws) in &scratch.by_request {
        let mut values = Vec::with_capacity(draws.len());
        for r in draws {
            let flag = match metric(r) {
                Ok(res) => match res.degenerate {
                    None => {
                        values.push(if spec.signed { res.signed } else { res.value });
                        continue;
                    }
                    Some(d) => d,
                },
                Err(Error::Degenerate(d)) => d,
                Err(e) => return Err(e),
            };
            *flags.entry(flag).or_default() += 1;
        }
        let value = (!values.is_empty())
            .then(|| fairrank_core::math::pairwise_sum(&values) / values.len() as f64);
        per_request.insert((*q).clone(), value);
    }
    let mut details: Vec<(String, f64)> = flags
        .into_iter()
        .map(|(d, n)| (format!("flag.{d}"), n as f64))
        .collect();
    details.push((
        "draws".into(),
        scratch.by_request.values().map(Vec::len).sum::<usize>() as f64,
    ));
    Ok(match aggregate(&per_request) {
        Ok(a) => Outcome {
            value: Some(a.value),
            n_requests: a.n_requests,
            n_degenerate: a.n_degenerate,
            details,
        },
        Err(Error::AllDegenerate) => Outcome {
            value: None,
            n_requests: per_request.len(),
            n_degenerate: per_request.len(),
            details,
        },
        Err(e) => return Err(e),
    })
}

fn sequence_outcome(
    n_requests: usize,
    result: Result<(SequenceMetric<f64>, Vec<(String, f64)>), Error>,
) -> Result<Outcome, Error> {
    match result {
        Ok((m, details)) => Ok(Outcome {
            value: Some(m.value),
            n_requests: m.n_requests,
            n_degenerate: m.n_skipped,
            details,
        }),
        Err(Error::Degenerate(d)) => Ok(Outcome {
            value: None,
            n_requests,
            n_degenerate: n_requests,
            details: vec![(format!("flag.{d}"), 1.0)],
        }),
        Err(Error::AllDegenerate) => Ok(Outcome {
            value: None,
            n_requests,
            n_degenerate: n_requests,
            details: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}
