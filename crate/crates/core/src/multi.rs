//! Statistical parity over ranking policies: the demographic parity ratio
//! and expected exposure disparity.

use crate::domain::GroupSpace;
use crate::error::{Degeneracy, Error, Result};
use crate::exposure::ExposureVector;
use crate::math::{log2, squared_norm};

/// A fairness ratio together with its base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub ratio: f64,
    pub log2: f64,
}

impl Ratio {
    pub fn new(ratio: f64) -> Self {
        Self {
            ratio,
            log2: log2(ratio),
        }
    }

    /// `|log₂ ratio|`: 0 is fair, over- and under-exposure count alike.
    pub fn magnitude(&self) -> f64 {
        self.log2.abs()
    }
}

/// `ε_π(G⁺) / ε_π(G⁻)` on a two-known-group exposure vector.
pub fn demographic_parity(system_eps: &ExposureVector, groups: &GroupSpace) -> Result<Ratio> {
    let (p, u) = groups.binomial_pair()?;
    let eps = system_eps.as_slice();
    if eps.len() != groups.len() {
        return Err(Error::invalid("exposure length differs from group count"));
    }
    match (eps[p] > 0.0, eps[u] > 0.0) {
        (false, false) => Err(Degeneracy::NoExposure.into()),
        (_, false) => Err(Degeneracy::DegenerateDenominator.into()),
        _ => Ok(Ratio::new(eps[p] / eps[u])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EedMode {
    /// Squared norm of the sum-normalized vector; minimum `1/g` at equality.
    #[default]
    Parity,
    /// Squared norm of the raw expected exposure.
    Raw,
}

/// Expected exposure disparity `‖ε_π‖₂²`.
pub fn eed(system_eps: &ExposureVector, mode: EedMode) -> Result<f64> {
    match mode {
        EedMode::Raw => Ok(squared_norm(system_eps.as_slice())),
        EedMode::Parity => Ok(squared_norm(system_eps.normalized()?.as_slice())),
    }
}
