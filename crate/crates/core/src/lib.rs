//! Provider-side group fairness metrics for ranked outputs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the metric
//! mathematics: browsing models and exposure, distribution distances,
//! single-list parity metrics, policy-level parity and equal-opportunity
//! metrics, pairwise accuracy, and Kendall's τ-c for comparing the system
//! orderings different metrics induce. File formats and the command line
//! live in the `fairrank` crate.
#![no_std]

extern crate alloc;

pub mod distance;
pub mod domain;
pub mod error;
pub mod exposure;
pub mod math;
pub mod multi;
pub mod opportunity;
pub mod pairwise;
pub mod report;
pub mod single;

pub use distance::{delta_kl, delta_nd, delta_rd, BinomialObservation, DistanceKind};
pub use domain::{
    protected_mask, restrict_to_labeled, AlignmentMatrix, DocumentId, GroupSpace, LabeledRanking,
    Ranking, RankingSequence, RelevanceTable, RequestId, ScoreTable, TargetDistribution,
    UnlabeledPolicy,
};
pub use error::{Degeneracy, Error, Result};
pub use exposure::{
    group_exposure, position_weights, request_exposure, system_exposure, target_exposure,
    ExposureMode, ExposureVector, PositionWeights, StopFn, WeightModel,
};
pub use multi::{demographic_parity, eed, EedMode, Ratio};
pub use opportunity::{
    discounted_group_utility, eur, expected_exposure, group_utility, iaa, iaa_for_sequence, rur,
    ExpectedExposure, GroupUtility, SequenceMetric, TargetDepth, UtilityPool,
};
pub use pairwise::{
    intra_inter, pairwise_accuracy, sample_pairs, tally_pairs, visit_pairs, AccuracyTable,
    PairSampling, PairTally, ScoredPair,
};
pub use report::{
    aggregate, correlation_matrix, kendall_tau_c, CorrelationMatrix, Direction, MetricKind,
    MetricResult,
};
pub use single::{
    awrf, fair_for_ranking, fair_score, pref_fairness, pref_normalizer, pref_raw, FairCdf,
    PrefixTarget, SingleListResult,
};
