//! Reparameterization of elicited discrepancy weights so that each source's
//! precision contribution, and therefore the sample size, moves by equal
//! amounts for equal steps in the weight.
//!
//! For one source the precision `ξ⁻²(w) = 1/(τ² + K2 + w(K1 − K2))` is a
//! Möbius map of `w`. The transform `f = g ∘ h` first interpolates linearly
//! between `ξ⁻²(0)` and `ξ⁻²(1)` (`h`) and then solves `ξ⁻²(w') = h(w)` for
//! `w'` in closed form (`g`). Sources are transformed independently.

use serde::{Deserialize, Serialize};

use crate::borrowing::{HistoricalSource, WeightKind, WeightVector};
use crate::error::{check_unit_interval, Error, Result};
use crate::stats::GammaMixtureHyperparams;

/// Slack, relative to `at_zero`, allowed when a precision lands just outside
/// `[at_one, at_zero]`.
pub const ENDPOINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEndpoints {
    /// `ξ⁻²(0)`, full borrowing.
    pub at_zero: f64,
    /// `ξ⁻²(1)`, full discounting.
    pub at_one: f64,
}

pub fn precision_endpoints(
    source: &HistoricalSource,
    hyper: &GammaMixtureHyperparams,
) -> PrecisionEndpoints {
    PrecisionEndpoints {
        at_zero: 1.0 / (source.tau_sq + hyper.borrow_variance()),
        at_one: 1.0 / (source.tau_sq + hyper.discount_variance()),
    }
}

/// `h(w) = ξ⁻²(0) + w (ξ⁻²(1) − ξ⁻²(0))`.
pub fn interpolate_precision(w: f64, ep: &PrecisionEndpoints) -> Result<f64> {
    check_unit_interval("w", w)?;
    Ok(if w == 1.0 {
        ep.at_one
    } else {
        ep.at_zero + w * (ep.at_one - ep.at_zero)
    })
}

/// Solves `ξ⁻²(w) = precision` for `w`.
pub fn invert_precision(
    precision: f64,
    source: &HistoricalSource,
    hyper: &GammaMixtureHyperparams,
) -> Result<f64> {
    let ep = precision_endpoints(source, hyper);
    if precision == ep.at_zero {
        return Ok(0.0);
    }
    if precision == ep.at_one {
        return Ok(1.0);
    }
    let slack = ENDPOINT_SLACK * ep.at_zero;
    if !(precision >= ep.at_one - slack && precision <= ep.at_zero + slack) {
        return Err(Error::PrecisionOutOfRange {
            value: precision,
            lo: ep.at_one,
            hi: ep.at_zero,
        });
    }
    let k1 = hyper.discount_variance();
    let k2 = hyper.borrow_variance();
    let w = (1.0 / precision - source.tau_sq - k2) / (k1 - k2);
    Ok(w.clamp(0.0, 1.0))
}

/// The transform `w → w'`. Fixes 0 and 1 and is strictly increasing.
pub fn linearize_weight(
    w: f64,
    source: &HistoricalSource,
    hyper: &GammaMixtureHyperparams,
) -> Result<f64> {
    check_unit_interval("w", w)?;
    if w == 0.0 || w == 1.0 {
        return Ok(w);
    }
    let ep = precision_endpoints(source, hyper);
    invert_precision(interpolate_precision(w, &ep)?, source, hyper)
}

/// Transforms every raw weight independently.
pub fn linearize_all(
    sources: &[HistoricalSource],
    weights: &WeightVector,
    hyper: &GammaMixtureHyperparams,
) -> Result<WeightVector> {
    if weights.kind() == WeightKind::Transformed {
        return Err(Error::InvalidArgument(
            "weights are already transformed".into(),
        ));
    }
    if sources.len() != weights.len() {
        return Err(Error::LengthMismatch {
            sources: sources.len(),
            weights: weights.len(),
        });
    }
    let values = sources
        .iter()
        .zip(weights.values())
        .map(|(s, &w)| linearize_weight(w, s, hyper))
        .collect::<Result<Vec<_>>>()?;
    WeightVector::transformed(values)
}
