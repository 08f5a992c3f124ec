//! Commensurate predictive priors and their aggregation into a single
//! collective prior for the treatment effect.
//!
//! Two aggregation rules are provided. [`aggregate_star`] pools the
//! source-specific predictive priors by precision, which keeps the prior
//! precision additive and strictly decreasing in every discrepancy weight.
//! [`aggregate_legacy`] uses exponential synthesis weights and a convolution
//! of the predictive priors; its precision is not monotone in the weights
//! when there is more than one source, so it is kept for illustration only.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_positive, check_unit_interval, Error, Result};
use crate::stats::{inverse_gamma_mixture_mean, GammaMixtureHyperparams};

/// Sources whose posterior variance falls below this are flagged as
/// near-degenerate in [`CollectivePrior::degenerate_sources`].
pub const DEGENERATE_TAU_SQ: f64 = 1e-12;

/// Posterior summary `N(theta, tau_sq)` of the treatment effect in one
/// historical trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalSource {
    pub id: String,
    pub theta: f64,
    pub tau_sq: f64,
}

impl HistoricalSource {
    pub fn new(id: impl Into<String>, theta: f64, tau_sq: f64) -> Result<Self> {
        check_finite("theta", theta)?;
        check_positive("tau_sq", tau_sq)?;
        Ok(Self {
            id: id.into(),
            theta,
            tau_sq,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    /// Elicited discrepancy probabilities, before linearization.
    Raw,
    /// Output of [`crate::linearize::linearize_all`].
    Transformed,
}

/// One discrepancy weight per source, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
    kind: WeightKind,
}

impl WeightVector {
    pub fn new(values: Vec<f64>, kind: WeightKind) -> Result<Self> {
        for &w in &values {
            check_unit_interval("w", w)?;
        }
        Ok(Self { values, kind })
    }

    pub fn raw(values: Vec<f64>) -> Result<Self> {
        Self::new(values, WeightKind::Raw)
    }

    pub fn transformed(values: Vec<f64>) -> Result<Self> {
        Self::new(values, WeightKind::Transformed)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    /// Precision-weighted pooling.
    Star,
    /// Exponential synthesis weights with convolution of the predictive priors.
    Legacy,
}

/// Normal prior `N(mean, variance)` for the treatment effect in the new trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectivePrior {
    pub mean: f64,
    pub variance: f64,
    pub synthesis_weights: Vec<f64>,
    pub method: AggregationMethod,
    /// Kind of the weights the prior was built from.
    pub weight_kind: WeightKind,
    /// Indices of sources with `tau_sq` below [`DEGENERATE_TAU_SQ`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_sources: Vec<usize>,
}

impl CollectivePrior {
    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }
}

/// `ξ²_q = τ²_q + w·b01/(a01−1) + (1−w)·b02/(a02−1)`.
pub fn commensurate_variance(
    source: &HistoricalSource,
    w: f64,
    hyper: &GammaMixtureHyperparams,
) -> Result<f64> {
    Ok(source.tau_sq + inverse_gamma_mixture_mean(w, hyper)?)
}

/// `ξ⁻²_q`, the single place where the reciprocal is taken.
pub(crate) fn commensurate_precision(
    source: &HistoricalSource,
    w: f64,
    hyper: &GammaMixtureHyperparams,
) -> Result<f64> {
    Ok(1.0 / commensurate_variance(source, w, hyper)?)
}

fn check_lengths(sources: &[HistoricalSource], weights: &WeightVector) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one historical source is required".into(),
        ));
    }
    if sources.len() != weights.len() {
        return Err(Error::LengthMismatch {
            sources: sources.len(),
            weights: weights.len(),
        });
    }
    Ok(())
}

fn degenerate(sources: &[HistoricalSource]) -> Vec<usize> {
    sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.tau_sq < DEGENERATE_TAU_SQ)
        .map(|(i, _)| i)
        .collect()
}

/// Total star precision `Σ_q ξ⁻²_q` for a raw slice of weights.
pub fn star_precision(
    sources: &[HistoricalSource],
    weights: &[f64],
    hyper: &GammaMixtureHyperparams,
) -> Result<f64> {
    sources
        .iter()
        .zip(weights)
        .map(|(s, &w)| commensurate_precision(s, w, hyper))
        .sum()
}

/// Precision-weighted aggregation: `σ⁻²_CP* = Σ ξ⁻²_q`,
/// `θ_CP* = Σ p*_q θ_q` with `p*_q = ξ⁻²_q / Σ ξ⁻²_q`.
pub fn aggregate_star(
    sources: &[HistoricalSource],
    weights: &WeightVector,
    hyper: &GammaMixtureHyperparams,
) -> Result<CollectivePrior> {
    check_lengths(sources, weights)?;
    let precisions = sources
        .iter()
        .zip(weights.values())
        .map(|(s, &w)| commensurate_precision(s, w, hyper))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = precisions.iter().sum();
    let synthesis_weights: Vec<f64> = precisions.iter().map(|p| p / total).collect();
    let mean = synthesis_weights
        .iter()
        .zip(sources)
        .map(|(p, s)| p * s.theta)
        .sum();
    Ok(CollectivePrior {
        mean,
        variance: 1.0 / total,
        synthesis_weights,
        method: AggregationMethod::Star,
        weight_kind: weights.kind(),
        degenerate_sources: degenerate(sources),
    })
}

/// Exponential synthesis weights `p_q ∝ exp(−w_q²/c0)`.
pub fn synthesis_weights_legacy(weights: &[f64], c0: f64) -> Result<Vec<f64>> {
    check_positive("c0", c0)?;
    for &w in weights {
        check_unit_interval("w", w)?;
    }
    // shift by the smallest exponent so the largest term is exp(0)
    let min_sq = weights.iter().map(|w| w * w).fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = weights
        .iter()
        .map(|w| (-(w * w - min_sq) / c0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|x| x / total).collect())
}

/// Legacy aggregation: `θ_CP = Σ p_q θ_q`, `σ²_CP = Σ p²_q ξ²_q`.
pub fn aggregate_legacy(
    sources: &[HistoricalSource],
    weights: &WeightVector,
    hyper: &GammaMixtureHyperparams,
) -> Result<CollectivePrior> {
    check_lengths(sources, weights)?;
    let p = synthesis_weights_legacy(weights.values(), hyper.c0())?;
    let mut mean = 0.0;
    let mut variance = 0.0;
    for ((s, &w), &pq) in sources.iter().zip(weights.values()).zip(&p) {
        mean += pq * s.theta;
        variance += pq * pq * commensurate_variance(s, w, hyper)?;
    }
    Ok(CollectivePrior {
        mean,
        variance,
        synthesis_weights: p,
        method: AggregationMethod::Legacy,
        weight_kind: weights.kind(),
        degenerate_sources: degenerate(sources),
    })
}

pub fn aggregate(
    method: AggregationMethod,
    sources: &[HistoricalSource],
    weights: &WeightVector,
    hyper: &GammaMixtureHyperparams,
) -> Result<CollectivePrior> {
    match method {
        AggregationMethod::Star => aggregate_star(sources, weights, hyper),
        AggregationMethod::Legacy => aggregate_legacy(sources, weights, hyper),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_source_surface_hyper() -> GammaMixtureHyperparams {
        GammaMixtureHyperparams::new(1.1, 1.1, 1e6, 1.0).unwrap()
    }

    fn src(theta: f64, tau_sq: f64) -> HistoricalSource {
        HistoricalSource::new("s", theta, tau_sq).unwrap()
    }

    #[test]
    fn source_validation() {
        assert!(HistoricalSource::new("x", 1.0, 0.0).is_err());
        assert!(HistoricalSource::new("x", 1.0, -1.0).is_err());
        assert!(HistoricalSource::new("x", f64::NAN, 1.0).is_err());
        assert!(WeightVector::raw(vec![0.5, 1.2]).is_err());
    }

    #[test]
    fn commensurate_variance_examples() {
        let h = two_source_surface_hyper();
        let v0 = commensurate_variance(&src(0.0, 0.1), 0.0, &h).unwrap();
        assert!((v0 - 0.100_001).abs() < 1e-9);
        let v1 = commensurate_variance(&src(0.0, 0.1), 1.0, &h).unwrap();
        assert!((v1 - 11.1).abs() < 1e-12);
        let d = GammaMixtureHyperparams::default();
        let v = commensurate_variance(&src(4.9, 4.21), 0.65, &d).unwrap();
        // 4.21 + 0.65 * 101 + 0.35 / 999999
        assert!((v - 69.860_000_35).abs() < 1e-4, "{v}");
    }

    #[test]
    fn star_single_source_and_duplicates() {
        let h = GammaMixtureHyperparams::default();
        let one =
            aggregate_star(&[src(0.7, 0.3)], &WeightVector::raw(vec![0.0]).unwrap(), &h).unwrap();
        assert_eq!(one.mean, 0.7);
        assert!((one.variance - (0.3 + 1.0 / 999_999.0)).abs() < 1e-15);
        assert_eq!(one.synthesis_weights, vec![1.0]);

        let two = aggregate_star(
            &[src(1.0, 0.5), src(1.0, 0.5)],
            &WeightVector::raw(vec![0.0, 0.0]).unwrap(),
            &h,
        )
        .unwrap();
        assert!((two.mean - 1.0).abs() < 1e-15);
        assert!((two.variance - 0.25).abs() < 1e-6);
    }

    #[test]
    fn star_rejects_bad_inputs() {
        let h = GammaMixtureHyperparams::default();
        assert!(aggregate_star(&[], &WeightVector::raw(vec![]).unwrap(), &h).is_err());
        assert!(matches!(
            aggregate_star(
                &[src(0.0, 1.0)],
                &WeightVector::raw(vec![0.1, 0.2]).unwrap(),
                &h
            ),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_sources_flagged() {
        let h = GammaMixtureHyperparams::default();
        let p = aggregate_star(
            &[src(0.0, 1e-13), src(1.0, 1.0)],
            &WeightVector::raw(vec![0.0, 0.0]).unwrap(),
            &h,
        )
        .unwrap();
        assert_eq!(p.degenerate_sources, vec![0]);
    }

    #[test]
    fn legacy_synthesis_examples() {
        let p = synthesis_weights_legacy(&[0.3, 0.3, 0.3], 0.05).unwrap();
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(synthesis_weights_legacy(&[0.7], 0.05).unwrap(), vec![1.0]);
        let p = synthesis_weights_legacy(&[0.0, 1.0], 0.05).unwrap();
        // exp(-20) / (1 + exp(-20))
        let tail = (-20.0f64).exp() / (1.0 + (-20.0f64).exp());
        assert!((p[1] - tail).abs() < 1e-22);
        assert!((p[1] - 2.061e-9).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!(synthesis_weights_legacy(&[0.1], 0.0).is_err());
        assert!(synthesis_weights_legacy(&[0.1], -1.0).is_err());
    }

    #[test]
    fn legacy_examples() {
        let h = two_source_surface_hyper();
        let sources = [src(1.0, 0.1), src(0.0, 0.1)];
        let p =
            aggregate_legacy(&sources, &WeightVector::raw(vec![0.0, 0.0]).unwrap(), &h).unwrap();
        assert!((p.mean - 0.5).abs() < 1e-15);
        assert!((p.variance - 0.050_000_5).abs() < 1e-6);
        assert_eq!(p.method, AggregationMethod::Legacy);

        let p =
            aggregate_legacy(&sources, &WeightVector::raw(vec![1.0, 0.0]).unwrap(), &h).unwrap();
        assert!((p.variance - 0.1).abs() < 1e-5);

        let single =
            aggregate_legacy(&[src(2.0, 0.4)], &WeightVector::raw(vec![0.3]).unwrap(), &h).unwrap();
        assert_eq!(single.mean, 2.0);
        assert!((single.variance - (0.4 + 0.3 * 11.0 + 0.7 / 999_999.0)).abs() < 1e-12);
    }

    #[test]
    fn legacy_is_nonmonotone_near_zero() {
        let h = two_source_surface_hyper();
        let sources = [src(0.0, 0.1), src(0.0, 0.1)];
        let prec = |w1: f64| {
            aggregate_legacy(&sources, &WeightVector::raw(vec![w1, 0.0]).unwrap(), &h)
                .unwrap()
                .precision()
        };
        let at_one = prec(1.0);
        let at_03 = prec(0.3);
        assert!((at_one - 10.0).abs() < 1e-3, "{at_one}");
        assert!((at_03 - 7.04).abs() < 0.01, "{at_03}");
        assert!(at_one > at_03);
    }

    #[test]
    fn star_equals_fixed_effect_pooling_at_zero_weights() {
        // tiny borrow variance so the commensurate term vanishes
        let h = GammaMixtureHyperparams::new(1.1, 1.1, 1e15, 1.0).unwrap();
        let sources = [src(0.3, 0.2), src(-0.5, 0.7), src(1.1, 1.3)];
        let p = aggregate_star(&sources, &WeightVector::raw(vec![0.0; 3]).unwrap(), &h).unwrap();
        let inv: Vec<f64> = sources.iter().map(|s| 1.0 / s.tau_sq).collect();
        let tot: f64 = inv.iter().sum();
        let pooled: f64 = inv
            .iter()
            .zip(&sources)
            .map(|(i, s)| i * s.theta)
            .sum::<f64>()
            / tot;
        assert!((p.mean - pooled).abs() < 1e-12);
        assert!((p.variance - 1.0 / tot).abs() < 1e-12);
    }
}
