//! Distance functions comparing an observed group distribution with a target.

use alloc::vec::Vec;

use crate::domain::{GroupSpace, TargetDistribution};
use crate::error::{Degeneracy, Error, Result};
use crate::math::{log2, normalized};

/// Floor applied to target probabilities before computing KL divergence.
pub const KL_TARGET_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceKind {
    /// Normalized (share) difference.
    #[default]
    Nd,
    /// Ratio difference.
    Rd,
    /// KL divergence in bits.
    Kl,
}

impl DistanceKind {
    pub fn is_binomial(self) -> bool {
        !matches!(self, DistanceKind::Kl)
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Nd => "nd",
            DistanceKind::Rd => "rd",
            DistanceKind::Kl => "kl",
        }
    }

    /// Signed distance of the per-group `mass` from `target`.
    ///
    /// ND and RD collapse `mass` into protected versus unprotected known
    /// groups; KL normalizes it over all groups.
    pub fn signed(
        self,
        mass: &[f64],
        target: &TargetDistribution,
        groups: &GroupSpace,
    ) -> Result<f64> {
        match self {
            DistanceKind::Nd => {
                let (p, u) = groups.binomial_split(mass)?;
                delta_nd(
                    BinomialObservation::new(p, u)?,
                    target.protected_share(groups)?,
                )
            }
            DistanceKind::Rd => {
                let (p, u) = groups.binomial_split(mass)?;
                delta_rd(
                    BinomialObservation::new(p, u)?,
                    target.protected_share(groups)?,
                )
            }
            DistanceKind::Kl => {
                let obs = normalized(mass).ok_or(Error::Degenerate(Degeneracy::NoExposure))?;
                delta_kl(&obs, target.probs())
            }
        }
    }
}

/// Protected and unprotected mass (counts or exposure).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialObservation {
    pub protected: f64,
    pub unprotected: f64,
}

impl BinomialObservation {
    pub fn new(protected: f64, unprotected: f64) -> Result<Self> {
        if !(protected >= 0.0 && unprotected >= 0.0) || !(protected + unprotected).is_finite() {
            return Err(Error::invalid(
                "binomial masses must be finite and non-negative",
            ));
        }
        Ok(Self {
            protected,
            unprotected,
        })
    }

    pub fn from_counts(protected: usize, unprotected: usize) -> Self {
        Self {
            protected: protected as f64,
            unprotected: unprotected as f64,
        }
    }

    pub fn total(&self) -> f64 {
        self.protected + self.unprotected
    }
}

fn check_p_hat(p_hat: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::invalid("binomial target must lie in [0, 1]"));
    }
    Ok(())
}

/// `|G⁺|/N − p̂`, signed.
pub fn delta_nd(obs: BinomialObservation, p_hat: f64) -> Result<f64> {
    check_p_hat(p_hat)?;
    let n = obs.total();
    if n <= 0.0 {
        return Err(Error::Empty("observation"));
    }
    Ok(obs.protected / n - p_hat)
}

/// `|G⁺|/|G⁻| − p̂/(1−p̂)`, signed.
pub fn delta_rd(obs: BinomialObservation, p_hat: f64) -> Result<f64> {
    check_p_hat(p_hat)?;
    if obs.unprotected <= 0.0 || p_hat >= 1.0 {
        return Err(Degeneracy::DegenerateDenominator.into());
    }
    Ok(obs.protected / obs.unprotected - p_hat / (1.0 - p_hat))
}

/// `D_KL(observed ‖ target)` in bits. Target entries are floored at
/// [`KL_TARGET_FLOOR`] and renormalized, so the result is always finite.
pub fn delta_kl(observed: &[f64], target: &[f64]) -> Result<f64> {
    if observed.len() != target.len() {
        return Err(Error::invalid("distributions differ in length"));
    }
    if observed.is_empty() {
        return Err(Error::Empty("distribution"));
    }
    let floored: Vec<f64> = target.iter().map(|t| t.max(KL_TARGET_FLOOR)).collect();
    let smoothed = normalized(&floored).ok_or_else(|| Error::invalid("target has no mass"))?;
    let kl: f64 = observed
        .iter()
        .zip(&smoothed)
        .filter(|(o, _)| **o > 0.0)
        .map(|(o, t)| o * log2(o / t))
        .sum();
    // Rounding can leave tiny negative values for equal distributions.
    Ok(kl.max(0.0))
}
