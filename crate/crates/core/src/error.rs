use alloc::string::String;
use core::fmt;

/// Named edge cases under which a metric is undefined for a request or list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Degeneracy {
    /// No document in the list carries a group alignment.
    AllUnlabeled,
    /// Fewer labeled documents than the prefix step.
    ShortList,
    /// A ratio denominator (unprotected share, exposure or utility) is zero.
    DegenerateDenominator,
    /// A group contributes zero utility, so utility ratios are undefined.
    DegenerateUtility,
    /// The prefix normalizer is zero: the composition admits no unfairness.
    UndefinedNormalizer,
    /// A group has no members in any candidate pool.
    EmptyGroup,
    /// No pairs satisfy the group conditioning.
    NoPairs,
    /// Neither group received any exposure.
    NoExposure,
    /// The request has no relevant documents, so the target is undefined.
    NoRelevant,
    /// Predicted utility sums to zero.
    ZeroPredictedUtility,
}

impl Degeneracy {
    pub fn as_str(self) -> &'static str {
        match self {
            Degeneracy::AllUnlabeled => "all_unlabeled",
            Degeneracy::ShortList => "short_list",
            Degeneracy::DegenerateDenominator => "degenerate_denominator",
            Degeneracy::DegenerateUtility => "degenerate_utility",
            Degeneracy::UndefinedNormalizer => "undefined_normalizer",
            Degeneracy::EmptyGroup => "empty_group",
            Degeneracy::NoPairs => "no_pairs",
            Degeneracy::NoExposure => "no_exposure",
            Degeneracy::NoRelevant => "no_relevant",
            Degeneracy::ZeroPredictedUtility => "zero_predicted_utility",
        }
    }
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The metric is undefined on this input.
    Degenerate(Degeneracy),
    /// An argument violates a documented precondition.
    InvalidInput(String),
    /// A binomial metric was asked for but no protected group is configured.
    NoProtectedGroup,
    /// The request is not present in the ranking sequence.
    UnknownRequest(String),
    /// Empty input where at least one element is required.
    Empty(&'static str),
    /// Every request was degenerate for the metric.
    AllDegenerate,
    /// Rank correlation is undefined because one of the value lists is constant.
    ConstantInput,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// The degenerate flag carried by this error, if any.
    pub fn degeneracy(&self) -> Option<Degeneracy> {
        match self {
            Error::Degenerate(d) => Some(*d),
            _ => None,
        }
    }
}

impl From<Degeneracy> for Error {
    fn from(d: Degeneracy) -> Self {
        Error::Degenerate(d)
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Degenerate(d) => write!(f, "metric undefined: {d}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NoProtectedGroup => f.write_str("no protected group configured"),
            Error::UnknownRequest(q) => write!(f, "request {q} not present"),
            Error::Empty(what) => write!(f, "empty {what}"),
            Error::AllDegenerate => f.write_str("every request is degenerate"),
            Error::ConstantInput => f.write_str("rank correlation undefined for constant input"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
