//! Browsing models and exposure aggregation.
//!
//! A [`WeightModel`] turns rank positions into attention weights. Weights
//! are accumulated per group through the alignment matrix (`ε = Aᵀa`), then
//! averaged over the draws of a request (the policy expectation) and over
//! requests (the system expectation). [`target_exposure`] gives the
//! exposure an ideal policy would produce: every ordering that sorts
//! candidates by decreasing grade, chosen uniformly.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{
    AlignmentMatrix, DocumentId, GroupSpace, Ranking, RankingSequence, RelevanceTable, RequestId,
};
use crate::error::{Degeneracy, Error, Result};
use crate::math::{self, pairwise_sum};

/// Cascade stopping probability `φ(y)`; outputs are clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub enum StopFn {
    /// `φ(y) = y / max_grade`.
    Scaled {
        max_grade: f64,
    },
    Custom(fn(f64) -> f64),
}

impl PartialEq for StopFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (StopFn::Scaled { max_grade: a }, StopFn::Scaled { max_grade: b }) => a == b,
            (StopFn::Custom(f), StopFn::Custom(g)) => core::ptr::fn_addr_eq(*f, *g),
            _ => false,
        }
    }
}

impl StopFn {
    pub fn eval(&self, grade: f64) -> f64 {
        let raw = match *self {
            StopFn::Scaled { max_grade } => {
                if max_grade > 0.0 {
                    grade / max_grade
                } else {
                    0.0
                }
            }
            StopFn::Custom(f) => f(grade),
        };
        if raw.is_nan() {
            0.0
        } else {
            raw.clamp(0.0, 1.0)
        }
    }
}

/// Position-weight (browsing) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightModel {
    /// `γ(1−γ)^{rank−1}`, γ is the stopping probability.
    Geometric { gamma: f64 },
    /// `1 / log₂ max(rank, 2)`.
    Logarithmic,
    /// Rank-biased precision with patience γ. Weight is `γ^{rank−1}`, or
    /// `γ^{rank}` when `verbatim_exponent` is set.
    Rbp { gamma: f64, verbatim_exponent: bool },
    /// `γ^{rank−1} ∏_{j<rank} (1 − φ(y_j))`.
    Cascade { gamma: f64, stop: StopFn },
}

impl WeightModel {
    pub fn geometric(gamma: f64) -> Result<Self> {
        let m = WeightModel::Geometric { gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn rbp(gamma: f64) -> Result<Self> {
        let m = WeightModel::Rbp {
            gamma,
            verbatim_exponent: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn cascade(gamma: f64, stop: StopFn) -> Result<Self> {
        let m = WeightModel::Cascade { gamma, stop };
        m.validate()?;
        Ok(m)
    }

    /// Geometric needs γ ∈ (0, 1); RBP and Cascade accept full patience γ = 1.
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightModel::Geometric { gamma } if !(gamma > 0.0 && gamma < 1.0) => {
                Err(Error::invalid("geometric gamma must lie in (0, 1)"))
            }
            WeightModel::Rbp { gamma, .. } | WeightModel::Cascade { gamma, .. }
                if !(gamma > 0.0 && gamma <= 1.0) =>
            {
                Err(Error::invalid("patience gamma must lie in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn needs_relevance(&self) -> bool {
        matches!(self, WeightModel::Cascade { .. })
    }

    /// Weights for a list whose documents carry `grades`, in rank order.
    /// Grades are only read by the cascade model.
    pub fn weights_for_grades(&self, grades: &[f64]) -> Vec<f64> {
        match *self {
            WeightModel::Cascade { gamma, stop } => {
                let mut out = Vec::with_capacity(grades.len());
                let mut reach = 1.0;
                for &y in grades {
                    out.push(reach);
                    reach *= gamma * (1.0 - stop.eval(y));
                }
                out
            }
            _ => (1..=grades.len()).map(|r| self.rank_weight(r)).collect(),
        }
    }

    /// Weight at 1-based `rank` for the relevance-free models.
    /// The cascade model returns its no-stopping envelope `γ^{rank−1}`.
    pub fn rank_weight(&self, rank: usize) -> f64 {
        match *self {
            WeightModel::Geometric { gamma } => gamma * math::powi(1.0 - gamma, rank - 1),
            WeightModel::Logarithmic => 1.0 / math::log2(rank.max(2) as f64),
            WeightModel::Rbp {
                gamma,
                verbatim_exponent,
            } => {
                if verbatim_exponent {
                    math::powi(gamma, rank)
                } else {
                    math::powi(gamma, rank - 1)
                }
            }
            WeightModel::Cascade { gamma, .. } => math::powi(gamma, rank - 1),
        }
    }
}

/// Attention weights aligned to ranking positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionWeights(Vec<f64>);

impl PositionWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(
                "position weights must be finite and non-negative",
            ));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-group exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureVector(Vec<f64>);

impl ExposureVector {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid(
                "exposure entries must be finite and non-negative",
            ));
        }
        Ok(Self(eps))
    }

    pub fn zeros(g: usize) -> Self {
        Self(vec![0.0; g])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.0)
    }

    /// Sum-normalized copy; `NoExposure` when all entries are zero.
    pub fn normalized(&self) -> Result<ExposureVector> {
        math::normalized(&self.0)
            .map(ExposureVector)
            .ok_or(Error::Degenerate(Degeneracy::NoExposure))
    }
}

/// Whether group exposure is reported as raw mass or as a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExposureMode {
    #[default]
    Raw,
    Normalized,
}

/// Weights for each position of `ranking`. Unjudged documents count as
/// irrelevant for the cascade model.
pub fn position_weights(
    model: &WeightModel,
    ranking: &Ranking,
    relevance: Option<&RelevanceTable>,
) -> Result<PositionWeights> {
    model.validate()?;
    let grades: Vec<f64> = match (model.needs_relevance(), relevance) {
        (true, None) => {
            return Err(Error::invalid(
                "cascade weighting requires relevance judgments",
            ))
        }
        (true, Some(rel)) => ranking
            .docs()
            .iter()
            .map(|d| rel.grade_or_zero(ranking.request(), d))
            .collect(),
        (false, _) => vec![0.0; ranking.len()],
    };
    PositionWeights::new(model.weights_for_grades(&grades))
}

/// Raw per-group exposure of one ranking; zero when nothing is labeled.
fn accumulate(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    weights: &[f64],
    g: usize,
) -> (Vec<f64>, bool) {
    let mut eps = vec![0.0; g];
    let mut any = false;
    for (doc, w) in ranking.docs().iter().zip(weights) {
        if let Some(row) = alignment.row(doc) {
            any = true;
            for (e, a) in eps.iter_mut().zip(row) {
                *e += a * w;
            }
        }
    }
    (eps, any)
}

/// `ε = Aᵀa` over the labeled documents of `ranking`.
pub fn group_exposure(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    weights: &PositionWeights,
    groups: &GroupSpace,
    mode: ExposureMode,
) -> Result<ExposureVector> {
    if weights.len() != ranking.len() {
        return Err(Error::invalid("weights are not aligned to the ranking"));
    }
    if alignment.n_groups() != groups.len() {
        return Err(Error::invalid("alignment width differs from group count"));
    }
    let (eps, any) = accumulate(ranking, alignment, weights.as_slice(), groups.len());
    if !any {
        return Err(Degeneracy::AllUnlabeled.into());
    }
    let eps = ExposureVector::new(eps)?;
    match mode {
        ExposureMode::Raw => Ok(eps),
        ExposureMode::Normalized => eps.normalized(),
    }
}

/// Exposure of one draw. Unlabeled draws contribute zero raw exposure.
pub fn draw_exposure(
    ranking: &Ranking,
    alignment: &AlignmentMatrix,
    model: &WeightModel,
    relevance: Option<&RelevanceTable>,
    groups: &GroupSpace,
) -> Result<Vec<f64>> {
    let w = position_weights(model, ranking, relevance)?;
    Ok(accumulate(ranking, alignment, w.as_slice(), groups.len()).0)
}

/// Expected raw exposure `ε(q)` under the empirical policy: the mean over all
/// draws for `request`.
pub fn request_exposure(
    seq: &RankingSequence,
    request: &RequestId,
    alignment: &AlignmentMatrix,
    model: &WeightModel,
    relevance: Option<&RelevanceTable>,
    groups: &GroupSpace,
) -> Result<ExposureVector> {
    let draws: Vec<&Ranking> = seq.draws_for(request).collect();
    mean_draw_exposure(&draws, alignment, model, relevance, groups).map_err(|e| match e {
        Error::Empty(_) => Error::UnknownRequest(alloc::string::ToString::to_string(request)),
        other => other,
    })
}

/// Mean raw exposure over a set of draws for one request.
pub fn mean_draw_exposure(
    draws: &[&Ranking],
    alignment: &AlignmentMatrix,
    model: &WeightModel,
    relevance: Option<&RelevanceTable>,
    groups: &GroupSpace,
) -> Result<ExposureVector> {
    if draws.is_empty() {
        return Err(Error::Empty("draws"));
    }
    let per_draw = draws
        .iter()
        .map(|r| draw_exposure(r, alignment, model, relevance, groups))
        .collect::<Result<Vec<_>>>()?;
    ExposureVector::new(column_means(&per_draw, groups.len()))
}

fn column_means(rows: &[Vec<f64>], g: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..g)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            pairwise_sum(&col) / n
        })
        .collect()
}

/// ρ-weighted mean of per-request vectors. `rho` defaults to uniform; weights
/// are renormalized over the requests present in `per_request`.
pub fn system_exposure(
    per_request: &BTreeMap<RequestId, ExposureVector>,
    rho: Option<&BTreeMap<RequestId, f64>>,
) -> Result<ExposureVector> {
    let g = per_request
        .values()
        .next()
        .ok_or(Error::Empty("per-request exposure"))?
        .len();
    if per_request.values().any(|e| e.len() != g) {
        return Err(Error::invalid("exposure vectors differ in length"));
    }
    let weights: Vec<f64> = per_request
        .keys()
        .map(|q| match rho {
            Some(m) => m.get(q).copied().unwrap_or(0.0),
            None => 1.0,
        })
        .collect();
    let total = pairwise_sum(&weights);
    if !(total > 0.0) {
        return Err(Error::invalid(
            "request weights put no mass on the evaluated requests",
        ));
    }
    let out = (0..g)
        .map(|j| {
            let terms: Vec<f64> = per_request
                .values()
                .zip(&weights)
                .map(|(e, w)| w * e.as_slice()[j])
                .collect();
            pairwise_sum(&terms) / total
        })
        .collect();
    ExposureVector::new(out)
}

/// Per-document exposure under the ideal policy.
///
/// Candidates are sorted by decreasing grade; a tier of equal grades
/// occupies a contiguous block of positions and every member receives the
/// block's mean weight, which is the expectation over all within-tier
/// permutations. Positions beyond `depth` get zero weight.
pub fn ideal_document_exposure(
    request: &RequestId,
    candidates: &[DocumentId],
    relevance: &RelevanceTable,
    model: &WeightModel,
    depth: Option<usize>,
) -> Result<Vec<(DocumentId, f64)>> {
    model.validate()?;
    let mut graded: Vec<(f64, &DocumentId)> = candidates
        .iter()
        .map(|d| (relevance.grade_or_zero(request, d), d))
        .collect();
    graded.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    graded.dedup_by(|a, b| a.1 == b.1);
    if graded.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let grades: Vec<f64> = graded.iter().map(|(y, _)| *y).collect();
    let mut weights = model.weights_for_grades(&grades);
    if let Some(k) = depth {
        for w in weights.iter_mut().skip(k) {
            *w = 0.0;
        }
    }
    let mut out = Vec::with_capacity(graded.len());
    let mut start = 0;
    while start < graded.len() {
        let mut end = start + 1;
        while end < graded.len() && graded[end].0 == graded[start].0 {
            end += 1;
        }
        let mean = pairwise_sum(&weights[start..end]) / (end - start) as f64;
        out.extend(graded[start..end].iter().map(|(_, d)| ((*d).clone(), mean)));
        start = end;
    }
    Ok(out)
}

/// Target exposure `ε*(q)`: ideal-policy exposure aggregated by alignment.
pub fn target_exposure(
    request: &RequestId,
    candidates: &[DocumentId],
    relevance: &RelevanceTable,
    alignment: &AlignmentMatrix,
    model: &WeightModel,
    groups: &GroupSpace,
    depth: Option<usize>,
) -> Result<ExposureVector> {
    let per_doc = ideal_document_exposure(request, candidates, relevance, model, depth)?;
    let mut eps = vec![0.0; groups.len()];
    let mut any = false;
    for (doc, w) in &per_doc {
        if let Some(row) = alignment.row(doc) {
            any = true;
            for (e, a) in eps.iter_mut().zip(row) {
                *e += a * w;
            }
        }
    }
    if !any {
        return Err(Degeneracy::AllUnlabeled.into());
    }
    ExposureVector::new(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GroupSpace;

    fn doc(s: &str) -> DocumentId {
        DocumentId::new(s).unwrap()
    }

    fn q() -> RequestId {
        RequestId::new("q1").unwrap()
    }

    fn ranking(ids: &[&str]) -> Ranking {
        Ranking::new(q(), ids.iter().map(|s| doc(s)).collect()).unwrap()
    }

    fn ab() -> (GroupSpace, AlignmentMatrix) {
        let g = GroupSpace::new(["A", "B"])
            .unwrap()
            .with_protected("A")
            .unwrap();
        let mut a = AlignmentMatrix::new(2);
        a.insert(doc("a1"), vec![1.0, 0.0]).unwrap();
        a.insert(doc("a2"), vec![1.0, 0.0]).unwrap();
        a.insert(doc("b1"), vec![0.0, 1.0]).unwrap();
        a.insert(doc("s"), vec![0.5, 0.5]).unwrap();
        (g, a)
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn geometric_and_log_weights() {
        let geo = WeightModel::geometric(0.5).unwrap();
        assert!(close(
            &geo.weights_for_grades(&[0.0; 3]),
            &[0.5, 0.25, 0.125]
        ));
        let log = WeightModel::Logarithmic;
        assert_eq!(log.rank_weight(1), 1.0);
        assert_eq!(log.rank_weight(2), 1.0);
        assert_eq!(log.rank_weight(4), 0.5);
    }

    #[test]
    fn rbp_anchoring() {
        let m = WeightModel::rbp(0.5).unwrap();
        assert_eq!(m.rank_weight(1), 1.0);
        let v = WeightModel::Rbp {
            gamma: 0.5,
            verbatim_exponent: true,
        };
        assert_eq!(v.rank_weight(1), 0.5);
    }

    #[test]
    fn cascade_full_patience_no_stopping() {
        let m = WeightModel::cascade(1.0, StopFn::Custom(|_| 0.0)).unwrap();
        let mut rel = RelevanceTable::new();
        rel.insert(q(), doc("a1"), 1.0).unwrap();
        let w = position_weights(&m, &ranking(&["a1", "a2", "b1"]), Some(&rel)).unwrap();
        assert_eq!(w.as_slice(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn cascade_stops_after_relevant() {
        let m = WeightModel::cascade(0.5, StopFn::Scaled { max_grade: 2.0 }).unwrap();
        let w = m.weights_for_grades(&[1.0, 2.0, 0.0]);
        assert!(close(&w, &[1.0, 0.25, 0.0]));
    }

    #[test]
    fn cascade_requires_relevance() {
        let m = WeightModel::cascade(0.5, StopFn::Scaled { max_grade: 1.0 }).unwrap();
        assert!(position_weights(&m, &ranking(&["a1"]), None).is_err());
    }

    #[test]
    fn gamma_domain() {
        assert!(WeightModel::geometric(1.5).is_err());
        assert!(WeightModel::geometric(0.0).is_err());
        assert!(WeightModel::rbp(1.0).is_ok());
    }

    #[test]
    fn group_exposure_raw_and_normalized() {
        let (g, a) = ab();
        let r = ranking(&["a1", "b1"]);
        let w = position_weights(&WeightModel::geometric(0.5).unwrap(), &r, None).unwrap();
        let raw = group_exposure(&r, &a, &w, &g, ExposureMode::Raw).unwrap();
        assert!(close(raw.as_slice(), &[0.5, 0.25]));
        let norm = group_exposure(&r, &a, &w, &g, ExposureMode::Normalized).unwrap();
        assert!(close(norm.as_slice(), &[2.0 / 3.0, 1.0 / 3.0]));
    }

    #[test]
    fn group_exposure_soft_and_unlabeled() {
        let (g, a) = ab();
        let r = ranking(&["s"]);
        let w = PositionWeights::new(vec![0.8]).unwrap();
        let raw = group_exposure(&r, &a, &w, &g, ExposureMode::Raw).unwrap();
        assert!(close(raw.as_slice(), &[0.4, 0.4]));
        let none = ranking(&["zz"]);
        assert_eq!(
            group_exposure(&none, &a, &w, &g, ExposureMode::Raw),
            Err(Error::Degenerate(Degeneracy::AllUnlabeled))
        );
    }

    #[test]
    fn single_group_normalizes_to_one() {
        let g = GroupSpace::new(["only"]).unwrap();
        let mut a = AlignmentMatrix::new(1);
        a.insert(doc("x"), vec![1.0]).unwrap();
        let r = ranking(&["x"]);
        let w = PositionWeights::new(vec![0.3]).unwrap();
        let e = group_exposure(&r, &a, &w, &g, ExposureMode::Normalized).unwrap();
        assert_eq!(e.as_slice(), [1.0]);
    }

    #[test]
    fn request_exposure_means_draws() {
        let (g, a) = ab();
        let rbp1 = WeightModel::rbp(1.0).unwrap();
        let seq = RankingSequence::new(vec![ranking(&["a1"]), ranking(&["b1"])]).unwrap();
        let e = request_exposure(&seq, &q(), &a, &rbp1, None, &g).unwrap();
        assert!(close(e.as_slice(), &[0.5, 0.5]));
        let other = RequestId::new("q9").unwrap();
        assert!(matches!(
            request_exposure(&seq, &other, &a, &rbp1, None, &g),
            Err(Error::UnknownRequest(_))
        ));
    }

    #[test]
    fn system_exposure_weighting() {
        let mut m = BTreeMap::new();
        let q1 = RequestId::new("q1").unwrap();
        let q2 = RequestId::new("q2").unwrap();
        m.insert(q1.clone(), ExposureVector::new(vec![1.0, 0.0]).unwrap());
        m.insert(q2.clone(), ExposureVector::new(vec![0.0, 1.0]).unwrap());
        assert!(close(
            system_exposure(&m, None).unwrap().as_slice(),
            &[0.5, 0.5]
        ));
        let mut rho = BTreeMap::new();
        rho.insert(q1.clone(), 0.25);
        rho.insert(q2.clone(), 0.75);
        assert!(close(
            system_exposure(&m, Some(&rho)).unwrap().as_slice(),
            &[0.25, 0.75]
        ));
        rho.insert(q1, 1.0);
        rho.insert(q2, 0.0);
        assert!(close(
            system_exposure(&m, Some(&rho)).unwrap().as_slice(),
            &[1.0, 0.0]
        ));
        assert!(system_exposure(&BTreeMap::new(), None).is_err());
    }

    #[test]
    fn target_exposure_tiers() {
        let (g, a) = ab();
        let mut rel = RelevanceTable::new();
        rel.insert(q(), doc("a1"), 1.0).unwrap();
        rel.insert(q(), doc("a2"), 1.0).unwrap();
        rel.insert(q(), doc("b1"), 0.0).unwrap();
        let geo = WeightModel::geometric(0.5).unwrap();
        let cands = [doc("b1"), doc("a2"), doc("a1")];
        let t = target_exposure(&q(), &cands, &rel, &a, &geo, &g, None).unwrap();
        assert!(close(t.as_slice(), &[0.75, 0.125]));
    }
}
