//! Conjugate normal updating and the efficacy/futility decision rule.

use serde::{Deserialize, Serialize};

use crate::borrowing::CollectivePrior;
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::stats::{phi, quantile, Probability};

/// Normal prior for the treatment effect, stored by precision so that a
/// flat prior (precision 0) is representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub precision: f64,
}

impl NormalPrior {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        check_positive("variance", variance)?;
        Ok(Self {
            mean,
            precision: 1.0 / variance,
        })
    }

    pub fn flat() -> Self {
        Self {
            mean: 0.0,
            precision: 0.0,
        }
    }
}

impl From<&CollectivePrior> for NormalPrior {
    fn from(p: &CollectivePrior) -> Self {
        Self {
            mean: p.mean,
            precision: p.precision(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorSummary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }
}

/// Combines the prior with an estimate of known precision.
pub fn update_with_estimate(
    prior: &NormalPrior,
    estimate: f64,
    data_precision: f64,
) -> PosteriorSummary {
    let precision = prior.precision + data_precision;
    PosteriorSummary {
        mean: (prior.mean * prior.precision + estimate * data_precision) / precision,
        variance: 1.0 / precision,
    }
}

/// Posterior after observing a mean difference `ybar_delta` in a two-arm
/// trial of total size `n`, allocation `r` and outcome variance `sigma0_sq`.
/// `n = 0` returns the prior.
pub fn posterior_update(
    prior: &NormalPrior,
    ybar_delta: f64,
    n: u64,
    r: f64,
    sigma0_sq: f64,
) -> Result<PosteriorSummary> {
    check_open_unit("allocation", r)?;
    check_positive("sigma0_sq", sigma0_sq)?;
    if n == 0 {
        return Ok(PosteriorSummary {
            mean: prior.mean,
            variance: 1.0 / prior.precision,
        });
    }
    if !ybar_delta.is_finite() {
        return Err(Error::Domain {
            name: "ybar_delta",
            value: ybar_delta,
            domain: "the finite reals",
        });
    }
    let data_precision = n as f64 * r * (1.0 - r) / sigma0_sq;
    Ok(update_with_estimate(prior, ybar_delta, data_precision))
}

/// `P(μΔ > 0) = Φ(d/σ)`.
pub fn prob_efficacy(post: &PosteriorSummary) -> Probability {
    Probability::new(phi(post.mean / post.sd()).clamp(0.0, 1.0)).expect("clamped")
}

/// `P(μΔ ≤ δ) = Φ((δ − d)/σ)`.
pub fn prob_futility(post: &PosteriorSummary, delta: f64) -> Probability {
    Probability::new(phi((delta - post.mean) / post.sd()).clamp(0.0, 1.0)).expect("clamped")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Efficacious,
    Futile,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub verdict: Verdict,
    pub p_efficacy: Probability,
    pub p_futility: Probability,
}

/// Thresholds in z-space, computed once and reused across many decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    pub delta: f64,
    z_eta: f64,
    z_zeta: f64,
}

impl DecisionRule {
    pub fn new(delta: f64, eta: f64, zeta: f64) -> Result<Self> {
        check_open_unit("eta", eta)?;
        check_open_unit("zeta", zeta)?;
        if !delta.is_finite() {
            return Err(Error::Domain {
                name: "delta",
                value: delta,
                domain: "the finite reals",
            });
        }
        Ok(Self {
            delta,
            z_eta: quantile(eta),
            z_zeta: quantile(zeta),
        })
    }

    pub fn verdict(&self, post: &PosteriorSummary) -> Verdict {
        let sd = post.sd();
        // inclusive on both thresholds; efficacy is checked first
        if post.mean / sd >= self.z_eta {
            Verdict::Efficacious
        } else if (self.delta - post.mean) / sd >= self.z_zeta {
            Verdict::Futile
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn decide(&self, post: &PosteriorSummary) -> DecisionOutcome {
        DecisionOutcome {
            verdict: self.verdict(post),
            p_efficacy: prob_efficacy(post),
            p_futility: prob_futility(post, self.delta),
        }
    }
}

/// Efficacious if `P(μΔ > 0) ≥ η`, otherwise futile if `P(μΔ ≤ δ) ≥ ζ`,
/// otherwise inconclusive.
pub fn decide(post: &PosteriorSummary, delta: f64, eta: f64, zeta: f64) -> Result<DecisionOutcome> {
    Ok(DecisionRule::new(delta, eta, zeta)?.decide(post))
}
