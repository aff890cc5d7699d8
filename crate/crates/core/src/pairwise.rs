//! Pairwise fairness: group-conditioned pairwise ranking accuracy and the
//! intra-/inter-group accuracy differences.

use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    binomial_membership, AlignmentMatrix, DocumentId, GroupSpace, RelevanceTable, RequestId,
    ScoreTable,
};
use crate::error::{Degeneracy, Error, Result};

/// Negatives drawn per relevant item by default.
pub const DEFAULT_NEGATIVES: usize = 10_000;

/// A pair where `doc_hi` is strictly more relevant than `doc_lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub request: RequestId,
    pub doc_hi: DocumentId,
    pub doc_lo: DocumentId,
    pub score_hi: f64,
    pub score_lo: f64,
    pub group_hi: usize,
    pub group_lo: usize,
}

impl ScoredPair {
    /// 1 when ordered correctly, 0.5 on a score tie, 0 otherwise.
    pub fn credit(&self) -> f64 {
        credit(self.score_hi, self.score_lo)
    }
}

/// `A_{g1>g2}`: fraction of pairs with the more relevant item in `g1` and the
/// less relevant in `g2` that the scores order correctly. Ties count 0.5.
pub fn pairwise_accuracy(pairs: &[ScoredPair], g1: usize, g2: usize) -> Result<f64> {
    let (mut n, mut hits) = (0usize, 0.0);
    for p in pairs
        .iter()
        .filter(|p| p.group_hi == g1 && p.group_lo == g2)
    {
        n += 1;
        hits += p.credit();
    }
    if n == 0 {
        return Err(Degeneracy::NoPairs.into());
    }
    Ok(hits / n as f64)
}

/// Pairwise accuracies over {protected, unprotected}, keyed `hi_lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyTable {
    pub protected_protected: f64,
    pub protected_unprotected: f64,
    pub unprotected_protected: f64,
    pub unprotected_unprotected: f64,
}

impl AccuracyTable {
    pub fn from_pairs(pairs: &[ScoredPair], groups: &GroupSpace) -> Result<Self> {
        let (p, u) = groups.binomial_pair()?;
        Ok(Self {
            protected_protected: pairwise_accuracy(pairs, p, p)?,
            protected_unprotected: pairwise_accuracy(pairs, p, u)?,
            unprotected_protected: pairwise_accuracy(pairs, u, p)?,
            unprotected_unprotected: pairwise_accuracy(pairs, u, u)?,
        })
    }

    /// The same table with the group labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            protected_protected: self.unprotected_unprotected,
            protected_unprotected: self.unprotected_protected,
            unprotected_protected: self.protected_unprotected,
            unprotected_unprotected: self.protected_protected,
        }
    }
}

/// `IntraAcc = A_{−>−} − A_{+>+}` and `InterAcc = A_{−>+} − A_{+>−}`.
pub fn intra_inter(acc: &AccuracyTable) -> (f64, f64) {
    (
        acc.unprotected_unprotected - acc.protected_protected,
        acc.unprotected_protected - acc.protected_unprotected,
    )
}

/// Output of [`sample_pairs`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledPairs {
    pub pairs: Vec<ScoredPair>,
    /// Requests that produced at least one pair.
    pub n_requests: usize,
    /// Requests whose negative pool was no larger than the sample size, so
    /// every negative was used.
    pub n_exhaustive: usize,
}

/// Borrowed view of one sampled pair.
#[derive(Debug, Clone, Copy)]
pub struct PairRef<'a> {
    pub request: &'a RequestId,
    pub doc_hi: &'a DocumentId,
    pub doc_lo: &'a DocumentId,
    pub score_hi: f64,
    pub score_lo: f64,
    pub group_hi: usize,
    pub group_lo: usize,
}

impl PairRef<'_> {
    pub fn to_owned(&self) -> ScoredPair {
        ScoredPair {
            request: self.request.clone(),
            doc_hi: self.doc_hi.clone(),
            doc_lo: self.doc_lo.clone(),
            score_hi: self.score_hi,
            score_lo: self.score_lo,
            group_hi: self.group_hi,
            group_lo: self.group_lo,
        }
    }

    pub fn credit(&self) -> f64 {
        credit(self.score_hi, self.score_lo)
    }
}

fn credit(hi: f64, lo: f64) -> f64 {
    if hi > lo {
        1.0
    } else if hi == lo {
        0.5
    } else {
        0.0
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Parameters of pair sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampling {
    /// Binomial membership threshold on alignment rows.
    pub threshold: f64,
    /// Negatives drawn per relevant item.
    pub n_negatives: usize,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            n_negatives: DEFAULT_NEGATIVES,
            seed: 42,
        }
    }
}

/// Walk the sampled pairs, calling `visit` on each. Returns
/// `(n_requests, n_exhaustive)` as in [`SampledPairs`].
///
/// For every relevant, scored, labeled item the negatives are the scored,
/// labeled items with grade 0 (unjudged counts as 0); `n_negatives` of them
/// are drawn without replacement, or all of them when the pool is smaller.
/// Relevant items with different grades are also paired exhaustively. The
/// generator is seeded per request, so output does not depend on evaluation
/// order.
pub fn visit_pairs<'a>(
    relevance: &RelevanceTable,
    scores: &'a ScoreTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    params: PairSampling,
    mut visit: impl FnMut(PairRef<'a>),
) -> Result<(usize, usize)> {
    if params.n_negatives == 0 {
        return Err(Error::invalid("n_negatives must be at least 1"));
    }
    let (p, u) = groups.binomial_pair()?;
    let (mut n_requests, mut n_exhaustive) = (0, 0);
    let mut relevant = Vec::new();
    let mut negatives = Vec::new();
    for q in scores.requests() {
        let table = scores
            .for_request(q)
            .expect("request listed by score table");
        relevant.clear();
        negatives.clear();
        for (d, &s) in table {
            let Some(row) = alignment.row(d) else {
                continue;
            };
            let Some(member) = binomial_membership(row, groups, params.threshold)? else {
                continue;
            };
            let g = if member { p } else { u };
            let y = relevance.grade_or_zero(q, d);
            if y > 0.0 {
                relevant.push((d, s, g, y));
            } else {
                negatives.push((d, s, g));
            }
        }
        if relevant.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ fnv1a(q.as_str()));
        let exhaustive = negatives.len() <= params.n_negatives;
        let mut emitted = false;
        for &(d, s, g, y) in &relevant {
            let mut push = |(dl, sl, gl): (&'a DocumentId, f64, usize)| {
                emitted = true;
                visit(PairRef {
                    request: q,
                    doc_hi: d,
                    doc_lo: dl,
                    score_hi: s,
                    score_lo: sl,
                    group_hi: g,
                    group_lo: gl,
                })
            };
            if exhaustive {
                negatives.iter().for_each(|&n| push(n));
            } else {
                let mut picks =
                    index::sample(&mut rng, negatives.len(), params.n_negatives).into_vec();
                picks.sort_unstable();
                picks.into_iter().for_each(|i| push(negatives[i]));
            }
            for &(dl, sl, gl, yl) in &relevant {
                if y > yl {
                    push((dl, sl, gl));
                }
            }
        }
        if emitted {
            n_requests += 1;
            if exhaustive {
                n_exhaustive += 1;
            }
        }
    }
    Ok((n_requests, n_exhaustive))
}

/// Collect the sampled pairs of [`visit_pairs`].
pub fn sample_pairs(
    relevance: &RelevanceTable,
    scores: &ScoreTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    params: PairSampling,
) -> Result<SampledPairs> {
    let mut pairs = Vec::new();
    let (n_requests, n_exhaustive) =
        visit_pairs(relevance, scores, alignment, groups, params, |p| {
            pairs.push(p.to_owned())
        })?;
    Ok(SampledPairs {
        pairs,
        n_requests,
        n_exhaustive,
    })
}

/// Per group-pair counts and credit, indexed `[group_hi][group_lo]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairTally {
    pub counts: Vec<Vec<u64>>,
    pub credit: Vec<Vec<f64>>,
    pub n_requests: usize,
    pub n_exhaustive: usize,
}

impl PairTally {
    pub fn accuracy(&self, g1: usize, g2: usize) -> Result<f64> {
        match self.counts.get(g1).and_then(|r| r.get(g2)) {
            Some(&n) if n > 0 => Ok(self.credit[g1][g2] / n as f64),
            _ => Err(Degeneracy::NoPairs.into()),
        }
    }

    pub fn accuracy_table(&self, groups: &GroupSpace) -> Result<AccuracyTable> {
        let (p, u) = groups.binomial_pair()?;
        Ok(AccuracyTable {
            protected_protected: self.accuracy(p, p)?,
            protected_unprotected: self.accuracy(p, u)?,
            unprotected_protected: self.accuracy(u, p)?,
            unprotected_unprotected: self.accuracy(u, u)?,
        })
    }
}

/// Pair counts of [`visit_pairs`] without materializing the pairs.
pub fn tally_pairs(
    relevance: &RelevanceTable,
    scores: &ScoreTable,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    params: PairSampling,
) -> Result<PairTally> {
    let g = groups.len();
    let mut counts = alloc::vec![alloc::vec![0u64; g]; g];
    let mut hits = alloc::vec![alloc::vec![0.0; g]; g];
    let (n_requests, n_exhaustive) =
        visit_pairs(relevance, scores, alignment, groups, params, |p| {
            counts[p.group_hi][p.group_lo] += 1;
            hits[p.group_hi][p.group_lo] += p.credit();
        })?;
    Ok(PairTally {
        counts,
        credit: hits,
        n_requests,
        n_exhaustive,
    })
}
