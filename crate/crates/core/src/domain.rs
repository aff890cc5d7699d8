//! Identifier spaces and the shared data model: rankings, group spaces,
//! alignment matrices, relevance judgments, targets and ranking sequences.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{abs, pairwise_sum, SUM_TOLERANCE};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self> {
                let id = id.into();
                if id.is_empty() {
                    return Err(Error::invalid(concat!("empty ", $what)));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Opaque document (item) identifier.
    DocumentId,
    "document id"
);
string_id!(
    /// Opaque request (query or user) identifier.
    RequestId,
    "request id"
);

/// An ordered list of documents returned for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    request: RequestId,
    docs: Vec<DocumentId>,
    scores: Option<Vec<f64>>,
}

impl Ranking {
    pub fn new(request: RequestId, docs: Vec<DocumentId>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Empty("ranking"));
        }
        let mut seen = BTreeSet::new();
        for d in &docs {
            if !seen.insert(d) {
                return Err(Error::invalid(format!(
                    "document {d} appears twice in ranking for {request}"
                )));
            }
        }
        Ok(Self {
            request,
            docs,
            scores: None,
        })
    }

    /// Attach per-position system scores.
    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.docs.len() {
            return Err(Error::invalid(
                "score vector length differs from ranking length",
            ));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn request(&self) -> &RequestId {
        &self.request
    }

    pub fn docs(&self) -> &[DocumentId] {
        &self.docs
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// 1-based rank of `doc`.
    pub fn rank_of(&self, doc: &DocumentId) -> Option<usize> {
        self.docs.iter().position(|d| d == doc).map(|i| i + 1)
    }

    /// Document at 1-based position `rank`.
    pub fn doc_at(&self, rank: usize) -> Option<&DocumentId> {
        rank.checked_sub(1).and_then(|i| self.docs.get(i))
    }

    /// The first `k` documents (the whole list when `k >= len`).
    pub fn prefix(&self, k: usize) -> &[DocumentId] {
        &self.docs[..k.min(self.docs.len())]
    }
}

/// The labels of the `g` provider groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpace {
    names: Vec<String>,
    protected: Option<usize>,
    unknown: Option<usize>,
}

impl GroupSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Empty("group space"));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::invalid("empty group label"));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::invalid(format!("duplicate group label {n}")));
            }
        }
        Ok(Self {
            names,
            protected: None,
            unknown: None,
        })
    }

    pub fn with_protected(mut self, label: &str) -> Result<Self> {
        let idx = self.require_index(label)?;
        if self.unknown == Some(idx) {
            return Err(Error::invalid(
                "protected group cannot be the unknown group",
            ));
        }
        self.protected = Some(idx);
        Ok(self)
    }

    pub fn with_unknown(mut self, label: &str) -> Result<Self> {
        let idx = self.require_index(label)?;
        if self.protected == Some(idx) {
            return Err(Error::invalid(
                "unknown group cannot be the protected group",
            ));
        }
        self.unknown = Some(idx);
        Ok(self)
    }

    fn require_index(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::invalid(format!("no group labelled {label}")))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.names.iter().position(|n| n == label)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn protected_index(&self) -> Option<usize> {
        self.protected
    }

    pub fn unknown_index(&self) -> Option<usize> {
        self.unknown
    }

    /// Indices of groups other than the unknown pseudo-group.
    pub fn known_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.names.len()).filter(move |&i| Some(i) != self.unknown)
    }

    /// `(protected, unprotected)` for spaces with exactly two known groups.
    pub fn binomial_pair(&self) -> Result<(usize, usize)> {
        let p = self.protected.ok_or(Error::NoProtectedGroup)?;
        let mut others = self.known_indices().filter(|&i| i != p);
        match (others.next(), others.next()) {
            (Some(u), None) => Ok((p, u)),
            _ => Err(Error::invalid(
                "binomial metric requires exactly two known groups",
            )),
        }
    }

    /// Split a per-group mass vector into (protected, unprotected) mass.
    /// Unprotected mass sums every known group except the protected one.
    pub fn binomial_split(&self, v: &[f64]) -> Result<(f64, f64)> {
        let p = self.protected.ok_or(Error::NoProtectedGroup)?;
        if v.len() != self.len() {
            return Err(Error::invalid("vector length differs from group count"));
        }
        let rest = self.known_indices().filter(|&i| i != p).map(|i| v[i]).sum();
        Ok((v[p], rest))
    }
}

/// How documents without an alignment row are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnlabeledPolicy {
    /// Keep them for position weights but leave them out of group statistics.
    #[default]
    Exclude,
    /// Assign them to the unknown pseudo-group.
    Unknown,
    /// Refuse to evaluate.
    Error,
}

/// Binomial membership of an alignment row: `Some(true)` for the protected
/// group, `Some(false)` for the unprotected group, `None` when the row is
/// dominated by the unknown pseudo-group.
pub fn binomial_membership(
    row: &[f64],
    groups: &GroupSpace,
    threshold: f64,
) -> Result<Option<bool>> {
    let p = groups.protected_index().ok_or(Error::NoProtectedGroup)?;
    if row[p] >= threshold {
        return Ok(Some(true));
    }
    if let Some(u) = groups.unknown_index() {
        if row[u] >= threshold {
            return Ok(None);
        }
    }
    Ok(Some(false))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("membership threshold must lie in (0, 1]"));
    }
    Ok(())
}

/// Soft group membership rows, one per labeled document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentMatrix {
    groups: usize,
    rows: BTreeMap<DocumentId, Vec<f64>>,
}

impl AlignmentMatrix {
    pub fn new(groups: usize) -> Self {
        Self {
            groups,
            rows: BTreeMap::new(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups
    }

    /// Store a row. Entries must be non-negative and sum to one within 1e-9.
    pub fn insert(&mut self, doc: DocumentId, row: Vec<f64>) -> Result<()> {
        if row.len() != self.groups {
            return Err(Error::invalid(format!(
                "alignment row for {doc} has {} entries, expected {}",
                row.len(),
                self.groups
            )));
        }
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!(
                "alignment row for {doc} has a negative or non-finite entry"
            )));
        }
        if abs(pairwise_sum(&row) - 1.0) > SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "alignment row for {doc} does not sum to 1"
            )));
        }
        self.rows.insert(doc, row);
        Ok(())
    }

    pub fn row(&self, doc: &DocumentId) -> Option<&[f64]> {
        self.rows.get(doc).map(Vec::as_slice)
    }

    pub fn remove(&mut self, doc: &DocumentId) -> Option<Vec<f64>> {
        self.rows.remove(doc)
    }

    pub fn is_labeled(&self, doc: &DocumentId) -> bool {
        self.rows.contains_key(doc)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DocumentId, &[f64])> {
        self.rows.iter().map(|(d, r)| (d, r.as_slice()))
    }

    /// Mean alignment over all labeled documents (the catalog composition).
    pub fn catalog_mean(&self) -> Option<Vec<f64>> {
        if self.rows.is_empty() {
            return None;
        }
        let n = self.rows.len() as f64;
        let mut acc = Vec::with_capacity(self.groups);
        for g in 0..self.groups {
            let col: Vec<f64> = self.rows.values().map(|r| r[g]).collect();
            acc.push(pairwise_sum(&col) / n);
        }
        Some(acc)
    }

    /// Collapse soft rows into hard two-group membership (protected, unprotected)
    /// at `threshold`. Rows dominated by the unknown group are dropped.
    pub fn binarize(
        &self,
        groups: &GroupSpace,
        threshold: f64,
    ) -> Result<(AlignmentMatrix, GroupSpace)> {
        check_threshold(threshold)?;
        let p = groups.protected_index().ok_or(Error::NoProtectedGroup)?;
        let protected_name = groups.names()[p].clone();
        let mut other_name = String::from("unprotected");
        if let Ok((_, u)) = groups.binomial_pair() {
            other_name = groups.names()[u].clone();
        } else if other_name == protected_name {
            other_name = format!("not_{protected_name}");
        }
        let space = GroupSpace::new([protected_name.clone(), other_name])?
            .with_protected(&protected_name)?;
        let mut out = AlignmentMatrix::new(2);
        for (doc, row) in &self.rows {
            match binomial_membership(row, groups, threshold)? {
                Some(true) => out.rows.insert(doc.clone(), alloc::vec![1.0, 0.0]),
                Some(false) => out.rows.insert(doc.clone(), alloc::vec![0.0, 1.0]),
                None => None,
            };
        }
        Ok((out, space))
    }

    /// Apply an unlabeled-document policy to `docs`. Returns the number of
    /// documents that were unlabeled.
    pub fn fill_unlabeled<'a>(
        &mut self,
        docs: impl IntoIterator<Item = &'a DocumentId>,
        groups: &GroupSpace,
        policy: UnlabeledPolicy,
    ) -> Result<usize> {
        let mut missing = 0;
        for doc in docs {
            if self.rows.contains_key(doc) {
                continue;
            }
            missing += 1;
            match policy {
                UnlabeledPolicy::Exclude => {}
                UnlabeledPolicy::Error => {
                    return Err(Error::invalid(format!(
                        "document {doc} has no group alignment"
                    )))
                }
                UnlabeledPolicy::Unknown => {
                    let u = groups.unknown_index().ok_or_else(|| {
                        Error::invalid("unknown policy requires an unknown group")
                    })?;
                    let mut row = alloc::vec![0.0; self.groups];
                    row[u] = 1.0;
                    self.rows.insert(doc.clone(), row);
                }
            }
        }
        Ok(missing)
    }
}

/// Per-(request, document) real-valued table.
#[derive(Debug, Clone, PartialEq, Default)]
struct RequestDocTable {
    entries: BTreeMap<RequestId, BTreeMap<DocumentId, f64>>,
}

impl RequestDocTable {
    fn insert(&mut self, q: RequestId, d: DocumentId, v: f64) -> Option<f64> {
        self.entries.entry(q).or_default().insert(d, v)
    }

    fn get(&self, q: &RequestId, d: &DocumentId) -> Option<f64> {
        self.entries.get(q).and_then(|m| m.get(d)).copied()
    }

    fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }
}

/// Graded ground-truth relevance `y(d|q)`. Missing entries are unjudged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevanceTable(RequestDocTable);

impl RelevanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a grade, returning the grade it replaced.
    pub fn insert(
        &mut self,
        request: RequestId,
        doc: DocumentId,
        grade: f64,
    ) -> Result<Option<f64>> {
        if !grade.is_finite() || grade < 0.0 {
            return Err(Error::invalid(format!(
                "relevance grade for ({request}, {doc}) must be finite and non-negative"
            )));
        }
        Ok(self.0.insert(request, doc, grade))
    }

    pub fn grade(&self, request: &RequestId, doc: &DocumentId) -> Option<f64> {
        self.0.get(request, doc)
    }

    /// Grade with unjudged documents treated as irrelevant.
    pub fn grade_or_zero(&self, request: &RequestId, doc: &DocumentId) -> f64 {
        self.grade(request, doc).unwrap_or(0.0)
    }

    pub fn judged(&self, request: &RequestId) -> Option<&BTreeMap<DocumentId, f64>> {
        self.0.entries.get(request)
    }

    pub fn requests(&self) -> impl Iterator<Item = &RequestId> {
        self.0.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RequestId, &DocumentId, f64)> {
        self.0
            .entries
            .iter()
            .flat_map(|(q, m)| m.iter().map(move |(d, y)| (q, d, *y)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.entries.is_empty()
    }

    /// Largest grade in the table (0 for an empty table).
    pub fn max_grade(&self) -> f64 {
        self.iter().map(|(_, _, y)| y).fold(0.0, f64::max)
    }
}

/// System scores `ŷ(d|q)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable(RequestDocTable);

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        request: RequestId,
        doc: DocumentId,
        score: f64,
    ) -> Result<Option<f64>> {
        if !score.is_finite() {
            return Err(Error::invalid(format!(
                "score for ({request}, {doc}) is not finite"
            )));
        }
        Ok(self.0.insert(request, doc, score))
    }

    pub fn score(&self, request: &RequestId, doc: &DocumentId) -> Option<f64> {
        self.0.get(request, doc)
    }

    pub fn for_request(&self, request: &RequestId) -> Option<&BTreeMap<DocumentId, f64>> {
        self.0.entries.get(request)
    }

    pub fn requests(&self) -> impl Iterator<Item = &RequestId> {
        self.0.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RequestId, &DocumentId, f64)> {
        self.0
            .entries
            .iter()
            .flat_map(|(q, m)| m.iter().map(move |(d, y)| (q, d, *y)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.entries.is_empty()
    }
}

/// Target group distribution `p̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    probs: Vec<f64>,
}

impl TargetDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("target distribution"));
        }
        if probs
            .iter()
            .any(|p| !p.is_finite() || !(0.0..=1.0).contains(p))
        {
            return Err(Error::invalid("target probabilities must lie in [0, 1]"));
        }
        if abs(pairwise_sum(&probs) - 1.0) > SUM_TOLERANCE {
            return Err(Error::invalid("target distribution does not sum to 1"));
        }
        Ok(Self { probs })
    }

    pub fn uniform(g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::Empty("target distribution"));
        }
        Self::new(alloc::vec![1.0 / g as f64; g])
    }

    /// Equal representation of every known group; the unknown group gets zero.
    pub fn equal_over_known(groups: &GroupSpace) -> Result<Self> {
        let known = groups.known_indices().count();
        let mut probs = alloc::vec![0.0; groups.len()];
        for i in groups.known_indices() {
            probs[i] = 1.0 / known as f64;
        }
        Self::new(probs)
    }

    /// Normalize a non-negative mass vector into a target.
    pub fn from_mass(mass: &[f64]) -> Result<Self> {
        let probs = crate::math::normalized(mass)
            .ok_or_else(|| Error::invalid("target mass must be positive"))?;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Scalar binomial target: protected share among known groups.
    pub fn protected_share(&self, groups: &GroupSpace) -> Result<f64> {
        let (p, u) = groups.binomial_split(&self.probs)?;
        if p + u <= 0.0 {
            return Err(Error::invalid("target puts no mass on known groups"));
        }
        Ok(p / (p + u))
    }
}

/// Draws from `ρ(q)·π(L|q)`: an empirical policy plus request distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingSequence {
    draws: Vec<Ranking>,
    request_weights: Option<BTreeMap<RequestId, f64>>,
}

impl RankingSequence {
    pub fn new(draws: Vec<Ranking>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Empty("ranking sequence"));
        }
        Ok(Self {
            draws,
            request_weights: None,
        })
    }

    pub fn with_request_weights(mut self, weights: BTreeMap<RequestId, f64>) -> Result<Self> {
        if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("request weights must be non-negative"));
        }
        let ws: Vec<f64> = weights.values().copied().collect();
        if abs(pairwise_sum(&ws) - 1.0) > SUM_TOLERANCE {
            return Err(Error::invalid("request weights do not sum to 1"));
        }
        self.request_weights = Some(weights);
        Ok(self)
    }

    pub fn draws(&self) -> &[Ranking] {
        &self.draws
    }

    pub fn request_weights(&self) -> Option<&BTreeMap<RequestId, f64>> {
        self.request_weights.as_ref()
    }

    /// Distinct requests in sorted order.
    pub fn requests(&self) -> BTreeSet<&RequestId> {
        self.draws.iter().map(Ranking::request).collect()
    }

    pub fn draws_for<'a>(
        &'a self,
        request: &'a RequestId,
    ) -> impl Iterator<Item = &'a Ranking> + 'a {
        self.draws.iter().filter(move |r| r.request() == request)
    }

    /// Rankings grouped by request, requests in sorted order.
    pub fn by_request(&self) -> BTreeMap<&RequestId, Vec<&Ranking>> {
        let mut out: BTreeMap<&RequestId, Vec<&Ranking>> = BTreeMap::new();
        for r in &self.draws {
            out.entry(r.request()).or_default().push(r);
        }
        out
    }
}

/// A ranking filtered to labeled documents, keeping original 1-based positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRanking {
    request: RequestId,
    entries: Vec<(usize, DocumentId)>,
}

impl LabeledRanking {
    pub fn request(&self) -> &RequestId {
        &self.request
    }

    pub fn entries(&self) -> &[(usize, DocumentId)] {
        &self.entries
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(p, _)| *p)
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocumentId> + '_ {
        self.entries.iter().map(|(_, d)| d)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when no document was labeled.
    pub fn is_degenerate(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn restrict_to_labeled(&self, alignment: &AlignmentMatrix) -> LabeledRanking {
        LabeledRanking {
            request: self.request.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(_, d)| alignment.is_labeled(d))
                .cloned()
                .collect(),
        }
    }
}

/// Keep the labeled documents of `ranking`, in order, with their original positions.
pub fn restrict_to_labeled(ranking: &Ranking, alignment: &AlignmentMatrix) -> LabeledRanking {
    LabeledRanking {
        request: ranking.request().clone(),
        entries: ranking
            .docs()
            .iter()
            .enumerate()
            .filter(|(_, d)| alignment.is_labeled(d))
            .map(|(i, d)| (i + 1, d.clone()))
            .collect(),
    }
}

/// Per-position protected membership at `threshold`. Unlabeled documents
/// (and rows dominated by the unknown group) are `None`.
pub fn protected_mask(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    groups: &GroupSpace,
    threshold: f64,
) -> Result<Vec<Option<bool>>> {
    groups.protected_index().ok_or(Error::NoProtectedGroup)?;
    check_threshold(threshold)?;
    ranking
        .docs()
        .iter()
        .map(|d| match alignment.row(d) {
            Some(row) => binomial_membership(row, groups, threshold),
            None => Ok(None),
        })
        .collect()
}
