//! Statistical parity of a single ranking: the prefix-fairness family,
//! the binomial FAIR score and attention-weighted rank fairness (AWRF).

use alloc::vec;
use alloc::vec::Vec;

use crate::distance::DistanceKind;
use crate::domain::{
    binomial_membership, restrict_to_labeled, AlignmentMatrix, GroupSpace, Ranking, RelevanceTable,
    TargetDistribution,
};
use crate::error::{Degeneracy, Error, Result};
use crate::exposure::{group_exposure, position_weights, ExposureMode, WeightModel};
use crate::math::{abs, exp, ln, log2};
use crate::report::Direction;

/// Default prefix step of the prefix-fairness family.
pub const DEFAULT_PREFIX_STEP: usize = 10;

/// Outcome of a single-list metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleListResult {
    /// Reported value (a magnitude for signed distances).
    pub value: f64,
    /// Signed value before taking magnitudes; equal to `value` otherwise.
    pub signed: f64,
    pub degenerate: Option<Degeneracy>,
    pub direction: Direction,
}

impl SingleListResult {
    fn ok(value: f64, signed: f64, direction: Direction) -> Self {
        Self {
            value,
            signed,
            degenerate: None,
            direction,
        }
    }

    fn flagged(value: f64, flag: Degeneracy, direction: Direction) -> Self {
        Self {
            value,
            signed: value,
            degenerate: Some(flag),
            direction,
        }
    }
}

/// Target used by the prefix family.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PrefixTarget {
    /// The composition of the (labeled part of the) list itself.
    #[default]
    Composition,
    Fixed(TargetDistribution),
}

/// Prefix lengths `step, 2·step, …` plus `n` when it is not a multiple of
/// `step`. Length 1 is never scored (`log₂ 1 = 0`).
pub fn prefix_schedule(n: usize, step: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=n / step).map(|k| k * step).collect();
    if n % step != 0 && n >= 2 {
        out.push(n);
    }
    out
}

fn check_step(step: usize) -> Result<()> {
    if step < 2 {
        return Err(Error::invalid("prefix step must be at least 2"));
    }
    Ok(())
}

fn prefix_term(
    mass: &[f64],
    len: usize,
    target: &TargetDistribution,
    dist: DistanceKind,
    groups: &GroupSpace,
) -> Result<f64> {
    Ok(abs(dist.signed(mass, target, groups)?) / log2(len as f64))
}

/// Unnormalized prefix score of the given row arrangement.
fn raw_prefix_score(
    rows: &[&[f64]],
    target: &TargetDistribution,
    dist: DistanceKind,
    groups: &GroupSpace,
    step: usize,
) -> Result<f64> {
    let schedule = prefix_schedule(rows.len(), step);
    let mut mass = vec![0.0; groups.len()];
    let mut next = 0;
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for (m, a) in mass.iter_mut().zip(row.iter()) {
            *m += a;
        }
        if schedule.get(next) == Some(&(i + 1)) {
            total += prefix_term(&mass, i + 1, target, dist, groups)?;
            next += 1;
        }
    }
    Ok(total)
}

/// Exact maximum of a prefix score over arrangements of `n_a` copies of one
/// row template and `n_b` copies of another. `term(i, c)` scores a prefix
/// of length `i` containing `c` copies of the first template; `None` marks a
/// prefix on which the distance is undefined, which excludes the arrangement.
fn max_two_template_score(
    n_a: usize,
    n_b: usize,
    step: usize,
    term: impl Fn(usize, usize) -> Option<f64>,
) -> Option<f64> {
    let n = n_a + n_b;
    let schedule = prefix_schedule(n, step);
    // best[c]: best partial score with c first-template rows in the prefix.
    let mut best: Vec<Option<f64>> = vec![None; n_a + 1];
    best[0] = Some(0.0);
    let mut prev_len = 0;
    for &len in &schedule {
        let gap = len - prev_len;
        let mut next: Vec<Option<f64>> = vec![None; n_a + 1];
        let lo = len.saturating_sub(n_b);
        let hi = len.min(n_a);
        for c in lo..=hi {
            let Some(t) = term(len, c) else { continue };
            let from = c.saturating_sub(gap);
            let prior = best[from..=c.min(n_a)]
                .iter()
                .flatten()
                .copied()
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.max(v)))
                });
            if let Some(p) = prior {
                next[c] = Some(p + t);
            }
        }
        best = next;
        prev_len = len;
    }
    best.into_iter()
        .flatten()
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// Segment orders tried by the soft-row normalizer: every order when there
/// are at most [`EXACT_SEGMENTS`] segments, otherwise the orders induced by
/// sign patterns with at most one sign change.
const EXACT_SEGMENTS: usize = 6;

fn segment_orders(schedule: &[usize]) -> Vec<Vec<usize>> {
    let k = schedule.len();
    if k <= EXACT_SEGMENTS {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..k).collect();
        loop {
            out.push(cur.clone());
            let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..k)
                .rev()
                .find(|&j| cur[j] > cur[i - 1])
                .expect("successor exists");
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
    }
    let weights: Vec<f64> = schedule.iter().map(|&i| 1.0 / log2(i as f64)).collect();
    let mut out = Vec::new();
    for change in 0..=k {
        for first in [1.0, -1.0] {
            // Segment j enters every prefix from checkpoint j on.
            let mut coef = vec![0.0; k];
            let mut acc = 0.0;
            for j in (0..k).rev() {
                acc += if j < change { first } else { -first } * weights[j];
                coef[j] = acc;
            }
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| coef[b].total_cmp(&coef[a]));
            if !out.contains(&order) {
                out.push(order);
            }
        }
    }
    out
}

/// Largest prefix score over rearrangements of `rows`.
///
/// Exact when the rows take at most two distinct values (hard binomial
/// membership). Otherwise rows sorted by one group's weight are dealt into
/// the checkpoint segments in each order of [`segment_orders`]; when every
/// prefix term is a convex function of the protected mass these orders
/// contain a maximizer, so the result is exact for ND and two-group KL on
/// rows without unknown mass and at most [`EXACT_SEGMENTS`] checkpoints. RD is
/// undefined on prefixes without unprotected mass, which breaks convexity, so
/// for soft rows it stays a lower bound. The observed arrangement is always
/// included, so the value never exceeds 1.
fn prefix_normalizer_rows(
    rows: &[&[f64]],
    observed_raw: f64,
    target: &TargetDistribution,
    dist: DistanceKind,
    groups: &GroupSpace,
    step: usize,
) -> Result<f64> {
    let mut templates: Vec<&[f64]> = Vec::new();
    for r in rows {
        if !templates.contains(r) {
            templates.push(r);
            if templates.len() > 2 {
                break;
            }
        }
    }
    match templates.len() {
        0 => Ok(0.0),
        1 => Ok(observed_raw),
        2 => {
            let (a, b) = (templates[0], templates[1]);
            let n_a = rows.iter().filter(|r| **r == a).count();
            let n_b = rows.len() - n_a;
            let term = |len: usize, c: usize| {
                let mass: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| c as f64 * x + (len - c) as f64 * y)
                    .collect();
                prefix_term(&mass, len, target, dist, groups).ok()
            };
            Ok(max_two_template_score(n_a, n_b, step, term)
                .unwrap_or(observed_raw)
                .max(observed_raw))
        }
        _ => {
            let schedule = prefix_schedule(rows.len(), step);
            let mut bounds = Vec::with_capacity(schedule.len());
            let mut prev = 0;
            for &len in &schedule {
                bounds.push(prev..len);
                prev = len;
            }
            let orders = segment_orders(&schedule);
            let mut keys: Vec<usize> = groups.known_indices().collect();
            if let Some(p) = groups.protected_index() {
                keys.retain(|&k| k != p);
                keys.insert(0, p);
            }
            if dist.is_binomial() && groups.len() == 2 {
                // Sorting by the other group only reverses the order.
                keys.truncate(1);
            }
            let mut best = observed_raw;
            let mut sorted: Vec<&[f64]> = rows.to_vec();
            let mut arranged: Vec<&[f64]> = rows.to_vec();
            for &k in &keys {
                sorted.sort_by(|x, y| y[k].total_cmp(&x[k]));
                for order in &orders {
                    let mut next = 0;
                    for &seg in order {
                        for slot in bounds[seg].clone() {
                            arranged[slot] = sorted[next];
                            next += 1;
                        }
                    }
                    if let Ok(s) = raw_prefix_score(&arranged, target, dist, groups, step) {
                        best = best.max(s);
                    }
                }
            }
            Ok(best)
        }
    }
}

/// Normalizer `Z` for a hard binomial list of length `n` with `n_protected`
/// protected documents, against scalar target `p_hat`.
pub fn pref_normalizer(
    n: usize,
    n_protected: usize,
    p_hat: f64,
    dist: DistanceKind,
    step: usize,
) -> Result<f64> {
    check_step(step)?;
    if n_protected > n {
        return Err(Error::invalid("more protected documents than list entries"));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid("binomial target must lie in [0, 1]"));
    }
    let groups = GroupSpace::new(["protected", "unprotected"])?.with_protected("protected")?;
    let target = TargetDistribution::new(vec![p_hat, 1.0 - p_hat])?;
    let term = |len: usize, c: usize| {
        let mass = [c as f64, (len - c) as f64];
        prefix_term(&mass, len, &target, dist, &groups).ok()
    };
    let z = max_two_template_score(n_protected, n - n_protected, step, term).unwrap_or(0.0);
    if !(z > 0.0) {
        return Err(Degeneracy::UndefinedNormalizer.into());
    }
    Ok(z)
}

fn labeled_rows<'a>(ranking: &Ranking, alignment: &'a AlignmentMatrix) -> Result<Vec<&'a [f64]>> {
    let labeled = restrict_to_labeled(ranking, alignment);
    if labeled.is_degenerate() {
        return Err(Degeneracy::AllUnlabeled.into());
    }
    Ok(labeled
        .docs()
        .map(|d| alignment.row(d).expect("restricted to labeled"))
        .collect())
}

fn resolve_target(
    rows: &[&[f64]],
    groups: &GroupSpace,
    target: &PrefixTarget,
) -> Result<TargetDistribution> {
    match target {
        PrefixTarget::Fixed(t) => Ok(t.clone()),
        PrefixTarget::Composition => {
            let mut mass = vec![0.0; groups.len()];
            for r in rows {
                for (m, a) in mass.iter_mut().zip(r.iter()) {
                    *m += a;
                }
            }
            TargetDistribution::from_mass(&mass)
        }
    }
}

/// Unnormalized prefix score `Σ_i |Δ(L≤i, p̂)| / log₂ i` over the labeled
/// documents of `ranking`, for any list length.
pub fn pref_raw(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    target: &PrefixTarget,
    dist: DistanceKind,
    step: usize,
) -> Result<f64> {
    check_step(step)?;
    let rows = labeled_rows(ranking, alignment)?;
    let target = resolve_target(&rows, groups, target)?;
    raw_prefix_score(&rows, &target, dist, groups, step)
}

/// Prefix fairness of `ranking` over its labeled documents.
///
/// Lists with fewer than `step` labeled documents are maximally fair by
/// construction (value 0, flagged `ShortList`); a zero normalizer yields
/// value 0 flagged `UndefinedNormalizer`. 1 is maximally unfair.
pub fn pref_fairness(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    target: &PrefixTarget,
    dist: DistanceKind,
    step: usize,
) -> Result<SingleListResult> {
    check_step(step)?;
    let rows = labeled_rows(ranking, alignment)?;
    if rows.len() < step {
        return Ok(SingleListResult::flagged(
            0.0,
            Degeneracy::ShortList,
            Direction::ZeroIsFair,
        ));
    }
    let target = resolve_target(&rows, groups, target)?;
    let raw = raw_prefix_score(&rows, &target, dist, groups, step)?;
    let z = prefix_normalizer_rows(&rows, raw, &target, dist, groups, step)?;
    if !(z > 0.0) {
        return Ok(SingleListResult::flagged(
            0.0,
            Degeneracy::UndefinedNormalizer,
            Direction::ZeroIsFair,
        ));
    }
    let value = (raw / z).min(1.0);
    Ok(SingleListResult::ok(value, value, Direction::ZeroIsFair))
}

/// Which binomial terms the FAIR average includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FairCdf {
    /// Full CDF `P(X ≤ c)`, including `j = 0`.
    #[default]
    Full,
    /// The sum over `j = 1..=c` as printed in the original formula.
    FromOne,
}

/// `Σ_{j=from}^{c} C(k,j) p^j (1−p)^{k−j}`, accumulated in log space.
pub fn binomial_cdf_range(k: usize, c: usize, p: f64, from: usize) -> f64 {
    let c = c.min(k);
    if from > c {
        return 0.0;
    }
    let log_odds = ln(p) - ln(1.0 - p);
    // log pmf(0) = k ln(1−p); pmf(j+1)/pmf(j) = (k−j)/(j+1) · p/(1−p)
    let mut log_pmf = k as f64 * ln(1.0 - p);
    let mut terms = Vec::with_capacity(c - from + 1);
    for j in 0..=c {
        if j >= from {
            terms.push(log_pmf);
        }
        log_pmf += ln((k - j) as f64 / (j + 1) as f64) + log_odds;
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let s: f64 = terms.iter().map(|t| exp(t - max)).sum();
    (exp(max) * s).min(1.0)
}

/// Mean over prefixes `k = 1..=N` of the binomial probability of observing
/// at most the prefix's protected count. `mask` lists binomial membership of
/// the labeled documents in rank order. 1 is fair.
pub fn fair_score(mask: &[bool], p_hat: f64, cdf: FairCdf) -> Result<SingleListResult> {
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(Error::invalid("FAIR target must lie in (0, 1)"));
    }
    if mask.is_empty() {
        return Err(Degeneracy::AllUnlabeled.into());
    }
    let from = match cdf {
        FairCdf::Full => 0,
        FairCdf::FromOne => 1,
    };
    let mut count = 0;
    let mut probs = Vec::with_capacity(mask.len());
    for (i, &protected) in mask.iter().enumerate() {
        if protected {
            count += 1;
        }
        probs.push(binomial_cdf_range(i + 1, count, p_hat, from));
    }
    let value = crate::math::pairwise_sum(&probs) / mask.len() as f64;
    Ok(SingleListResult::ok(value, value, Direction::OneIsFair))
}

/// FAIR on a ranking, binarizing soft alignment at `threshold`. Unlabeled
/// and unknown-dominated documents are skipped.
pub fn fair_for_ranking(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    threshold: f64,
    p_hat: f64,
    cdf: FairCdf,
) -> Result<SingleListResult> {
    let mask: Vec<bool> = crate::domain::protected_mask(ranking, alignment, groups, threshold)?
        .into_iter()
        .flatten()
        .collect();
    fair_score(&mask, p_hat, cdf)
}

/// Attention-weighted rank fairness: distance between the normalized group
/// exposure of the list and `target`. Binomial distances are reported as
/// magnitudes.
pub fn awrf(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    model: &WeightModel,
    relevance: Option<&RelevanceTable>,
    target: &TargetDistribution,
    dist: DistanceKind,
) -> Result<SingleListResult> {
    let weights = position_weights(model, ranking, relevance)?;
    let eps = group_exposure(
        ranking,
        alignment,
        &weights,
        groups,
        ExposureMode::Normalized,
    )?;
    let signed = dist.signed(eps.as_slice(), target, groups)?;
    Ok(SingleListResult::ok(
        abs(signed),
        signed,
        Direction::ZeroIsFair,
    ))
}

/// Binomial membership of each labeled document, in rank order.
pub fn labeled_mask(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    threshold: f64,
) -> Result<Vec<bool>> {
    let mut out = Vec::new();
    for d in ranking.docs() {
        if let Some(row) = alignment.row(d) {
            if let Some(m) = binomial_membership(row, groups, threshold)? {
                out.push(m);
            }
        }
    }
    Ok(out)
}
