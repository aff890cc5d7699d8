//! Equal-opportunity metrics: exposure relative to utility (EUR, RUR),
//! amortized attention against predicted utility (IAA) and the expected
//! exposure family (EEL, EER and the raw disparity term).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{
    AlignmentMatrix, DocumentId, GroupSpace, Ranking, RankingSequence, RelevanceTable, RequestId,
    ScoreTable,
};
use crate::error::{Degeneracy, Error, Result};
use crate::exposure::{
    mean_draw_exposure, position_weights, system_exposure, target_exposure, ExposureVector,
    WeightModel,
};
use crate::math::{abs, dot, pairwise_sum, squared_norm};
use crate::multi::Ratio;

/// Which documents define a group's mean relevance for a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UtilityPool {
    /// All judged documents for the request.
    #[default]
    Judged,
    /// Only documents retrieved in the request's draws.
    Retrieved,
}

/// Per-group utility statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupUtility {
    /// Mean relevance `Υ(G)`.
    pub upsilon: Vec<f64>,
    /// Discounted utility `Γ(G)`.
    pub gamma_disc: Vec<f64>,
}

fn rho_weight(seq: &RankingSequence, q: &RequestId) -> f64 {
    match seq.request_weights() {
        Some(w) => w.get(q).copied().unwrap_or(0.0),
        None => 1.0,
    }
}

fn retrieved_docs<'a>(draws: &[&'a Ranking]) -> BTreeSet<&'a DocumentId> {
    draws.iter().flat_map(|r| r.docs()).collect()
}

/// `Υ(G)`: per request, the alignment-weighted mean grade of each group's
/// members in the pool (unjudged documents count as 0), averaged over
/// requests with ρ. Requests where a group has no members do not enter that
/// group's average.
pub fn group_utility(
    seq: &RankingSequence,
    relevance: &RelevanceTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    pool: UtilityPool,
) -> Result<Vec<f64>> {
    let g = groups.len();
    let mut num = vec![Vec::new(); g];
    let mut den = vec![Vec::new(); g];
    for (q, draws) in seq.by_request() {
        let rho = rho_weight(seq, q);
        let pool_docs: Vec<&DocumentId> = match pool {
            UtilityPool::Judged => relevance
                .judged(q)
                .map(|m| m.keys().collect())
                .unwrap_or_default(),
            UtilityPool::Retrieved => retrieved_docs(&draws).into_iter().collect(),
        };
        let mut mass = vec![0.0; g];
        let mut util = vec![0.0; g];
        for d in pool_docs {
            if let Some(row) = alignment.row(d) {
                let y = relevance.grade_or_zero(q, d);
                for k in 0..g {
                    mass[k] += row[k];
                    util[k] += row[k] * y;
                }
            }
        }
        for k in 0..g {
            if mass[k] > 0.0 {
                num[k].push(rho * util[k] / mass[k]);
                den[k].push(rho);
            }
        }
    }
    let mut out = Vec::with_capacity(g);
    for k in 0..g {
        let w = pairwise_sum(&den[k]);
        if w > 0.0 {
            out.push(pairwise_sum(&num[k]) / w);
        } else if Some(k) == groups.unknown_index() {
            out.push(0.0);
        } else {
            return Err(Degeneracy::EmptyGroup.into());
        }
    }
    Ok(out)
}

/// `Γ(G) = Σ_{d∈G} E_{πρ}[a_d · y(d|q)]`: per request the mean over draws of
/// alignment-weighted discounted gain, then the ρ-weighted mean over requests.
pub fn discounted_group_utility(
    seq: &RankingSequence,
    relevance: &RelevanceTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
) -> Result<Vec<f64>> {
    let g = groups.len();
    let mut per_request = BTreeMap::new();
    for (q, draws) in seq.by_request() {
        let mut rows = Vec::with_capacity(draws.len());
        for r in &draws {
            let w = position_weights(model, r, Some(relevance))?;
            let mut acc = vec![0.0; g];
            for (d, wi) in r.docs().iter().zip(w.as_slice()) {
                if let Some(row) = alignment.row(d) {
                    let y = relevance.grade_or_zero(q, d);
                    for k in 0..g {
                        acc[k] += row[k] * wi * y;
                    }
                }
            }
            rows.push(acc);
        }
        let mean: Vec<f64> = (0..g)
            .map(|k| {
                let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                pairwise_sum(&col) / rows.len() as f64
            })
            .collect();
        per_request.insert(q.clone(), ExposureVector::new(mean)?);
    }
    Ok(system_exposure(&per_request, seq.request_weights())?.into_vec())
}

/// Both utility statistics at once.
pub fn utility_statistics(
    seq: &RankingSequence,
    relevance: &RelevanceTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
    pool: UtilityPool,
) -> Result<GroupUtility> {
    Ok(GroupUtility {
        upsilon: group_utility(seq, relevance, alignment, groups, pool)?,
        gamma_disc: discounted_group_utility(seq, relevance, alignment, groups, model)?,
    })
}

/// Ratio of two non-negative quantities; 0 and ∞ are both degenerate.
fn finite_ratio(num: f64, den: f64) -> Result<Ratio> {
    if !(den > 0.0) || !(num > 0.0) {
        return Err(Degeneracy::DegenerateDenominator.into());
    }
    Ok(Ratio::new(num / den))
}

fn utility_ratio(numerators: &[f64], upsilon: &[f64], groups: &GroupSpace) -> Result<Ratio> {
    let (p, u) = groups.binomial_pair()?;
    if numerators.len() != groups.len() || upsilon.len() != groups.len() {
        return Err(Error::invalid("vector length differs from group count"));
    }
    if !(upsilon[p] > 0.0) || !(upsilon[u] > 0.0) {
        return Err(Degeneracy::DegenerateUtility.into());
    }
    finite_ratio(numerators[p] / upsilon[p], numerators[u] / upsilon[u])
}

/// Exposed utility ratio `(ε(G⁺)/Υ(G⁺)) / (ε(G⁻)/Υ(G⁻))`; 1 is fair.
pub fn eur(system_eps: &ExposureVector, upsilon: &[f64], groups: &GroupSpace) -> Result<Ratio> {
    utility_ratio(system_eps.as_slice(), upsilon, groups)
}

/// Realized utility ratio `(Γ(G⁺)/Υ(G⁺)) / (Γ(G⁻)/Υ(G⁻))`; 1 is fair.
pub fn rur(gamma_disc: &[f64], upsilon: &[f64], groups: &GroupSpace) -> Result<Ratio> {
    utility_ratio(gamma_disc, upsilon, groups)
}

/// `‖ε − Û‖₁` between sum-normalized exposure and predicted utility.
pub fn iaa(system_eps: &ExposureVector, expected_utility: &[f64]) -> Result<f64> {
    if system_eps.len() != expected_utility.len() {
        return Err(Error::invalid("exposure and utility differ in length"));
    }
    let eps = system_eps.normalized()?;
    let util = crate::math::normalized(expected_utility)
        .ok_or(Error::Degenerate(Degeneracy::ZeroPredictedUtility))?;
    Ok(eps
        .as_slice()
        .iter()
        .zip(&util)
        .map(|(e, u)| abs(e - u))
        .sum())
}

/// Per-group predicted utility of `docs` for `request`: scores are shifted by
/// their minimum, sum-normalized and aggregated through the alignment.
/// Documents without a score are ignored.
pub fn predicted_group_utility<'a>(
    request: &RequestId,
    docs: impl IntoIterator<Item = &'a DocumentId>,
    scores: &ScoreTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
) -> Result<Vec<f64>> {
    let scored: Vec<(&DocumentId, f64)> = docs
        .into_iter()
        .filter_map(|d| scores.score(request, d).map(|s| (d, s)))
        .collect();
    let min = scored.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = scored.iter().map(|(_, s)| s - min).collect();
    let total = pairwise_sum(&shifted);
    if !(total > 0.0) {
        return Err(Degeneracy::ZeroPredictedUtility.into());
    }
    let mut out = vec![0.0; groups.len()];
    for ((d, _), s) in scored.iter().zip(&shifted) {
        if let Some(row) = alignment.row(d) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * s / total;
            }
        }
    }
    Ok(out)
}

/// System-level metric value plus request bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMetric<T> {
    pub value: T,
    pub n_requests: usize,
    /// Requests skipped because the metric was undefined for them.
    pub n_skipped: usize,
}

/// IAA over a ranking sequence: per request, mean raw exposure of the draws
/// against predicted utility of the retrieved documents; both are averaged
/// with ρ before the L₁ comparison.
pub fn iaa_for_sequence(
    seq: &RankingSequence,
    scores: &ScoreTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
    relevance: Option<&RelevanceTable>,
) -> Result<SequenceMetric<f64>> {
    let mut eps_map = BTreeMap::new();
    let mut util_map = BTreeMap::new();
    let by_request = seq.by_request();
    let n_requests = by_request.len();
    for (q, draws) in by_request {
        let util =
            match predicted_group_utility(q, retrieved_docs(&draws), scores, alignment, groups) {
                Ok(u) => u,
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            };
        eps_map.insert(
            q.clone(),
            mean_draw_exposure(&draws, alignment, model, relevance, groups)?,
        );
        util_map.insert(q.clone(), ExposureVector::new(util)?);
    }
    if eps_map.is_empty() {
        return Err(Degeneracy::ZeroPredictedUtility.into());
    }
    let eps = system_exposure(&eps_map, seq.request_weights())?;
    let util = system_exposure(&util_map, seq.request_weights())?;
    Ok(SequenceMetric {
        value: iaa(&eps, util.as_slice())?,
        n_requests,
        n_skipped: n_requests - eps_map.len(),
    })
}

/// Expected-exposure quantities on a pair of system-level vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedExposure {
    /// `‖ε_π − ε*‖₂²`
    pub eel: f64,
    /// `2 ε_πᵀ ε*`
    pub eer: f64,
    /// `‖ε_π‖₂²`
    pub eed_raw: f64,
    /// `‖ε*‖₂²`
    pub target_sq: f64,
}

pub fn expected_exposure_from_vectors(eps: &[f64], target: &[f64]) -> Result<ExpectedExposure> {
    if eps.len() != target.len() {
        return Err(Error::invalid("exposure and target differ in length"));
    }
    let diff: Vec<f64> = eps.iter().zip(target).map(|(a, b)| a - b).collect();
    Ok(ExpectedExposure {
        eel: squared_norm(&diff),
        eer: 2.0 * dot(eps, target),
        eed_raw: squared_norm(eps),
        target_sq: squared_norm(target),
    })
}

/// How deep the ideal-policy rankings are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetDepth {
    /// Ideal rankings cover every candidate.
    Unbounded,
    /// Ideal rankings are cut to the longest system ranking for the request.
    #[default]
    RankingLength,
}

/// EEL, EER and raw EED over a ranking sequence.
///
/// Candidates for the ideal policy are the judged documents plus everything
/// retrieved for the request. Requests without relevant candidates or without
/// labeled candidates are skipped and counted.
pub fn expected_exposure(
    seq: &RankingSequence,
    relevance: &RelevanceTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
    depth: TargetDepth,
) -> Result<SequenceMetric<ExpectedExposure>> {
    let mut eps_map = BTreeMap::new();
    let mut target_map = BTreeMap::new();
    let by_request = seq.by_request();
    let n_requests = by_request.len();
    for (q, draws) in by_request {
        let mut cands: BTreeSet<&DocumentId> = retrieved_docs(&draws);
        if let Some(j) = relevance.judged(q) {
            cands.extend(j.keys());
        }
        if !cands.iter().any(|d| relevance.grade_or_zero(q, d) > 0.0) {
            continue;
        }
        let cands: Vec<DocumentId> = cands.into_iter().cloned().collect();
        let cut = match depth {
            TargetDepth::Unbounded => None,
            TargetDepth::RankingLength => draws.iter().map(|r| r.len()).max(),
        };
        let target = match target_exposure(q, &cands, relevance, alignment, model, groups, cut) {
            Ok(t) => t,
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        };
        eps_map.insert(
            q.clone(),
            mean_draw_exposure(&draws, alignment, model, Some(relevance), groups)?,
        );
        target_map.insert(q.clone(), target);
    }
    if eps_map.is_empty() {
        return Err(Degeneracy::NoRelevant.into());
    }
    let eps = system_exposure(&eps_map, seq.request_weights())?;
    let target = system_exposure(&target_map, seq.request_weights())?;
    Ok(SequenceMetric {
        value: expected_exposure_from_vectors(eps.as_slice(), target.as_slice())?,
        n_requests,
        n_skipped: n_requests - eps_map.len(),
    })
}
