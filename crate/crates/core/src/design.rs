//! Minimal sample sizes (or event counts) that make the posterior decisive
//! for every possible observed effect, with and without borrowing.
//!
//! Every formula has the same shape: the posterior precision must reach
//! `((z_η + z_ζ)/δ)²`. The prior supplies part of it and each unit of
//! sample size supplies `1/scale` more, where the scale depends on the
//! endpoint model (see [`information_scale`]).

use serde::{Deserialize, Serialize};

use crate::borrowing::{
    aggregate_legacy, star_precision, AggregationMethod, CollectivePrior, HistoricalSource,
    WeightKind, WeightVector,
};
use crate::error::{check_open_unit, check_positive, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::linearize::linearize_weight;
use crate::stats::{quantile, GammaMixtureHyperparams};

/// Largest allocation denominator searched by [`round_allocation`].
pub const MAX_ALLOCATION_DENOMINATOR: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EndpointModel {
    /// Normal outcome with known variance; effect is a difference in means.
    Normal { sigma0_sq: f64 },
    /// Response rates in two arms of equal size; effect on the log odds ratio scale.
    BinaryTwoArm { rho_t: f64, rho_c: f64 },
    /// Exponential event times; effect on the log rate ratio scale, size in events.
    TimeToEvent,
    /// Single-arm response rate; effect on the log odds scale.
    SingleArmBinary { p: f64 },
}

impl EndpointModel {
    pub fn name(&self) -> &'static str {
        match self {
            EndpointModel::Normal { .. } => "normal",
            EndpointModel::BinaryTwoArm { .. } => "binary_two_arm",
            EndpointModel::TimeToEvent => "time_to_event",
            EndpointModel::SingleArmBinary { .. } => "single_arm_binary",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EndpointModel::Normal { sigma0_sq } => check_positive("sigma0_sq", sigma0_sq),
            EndpointModel::BinaryTwoArm { rho_t, rho_c } => {
                check_open_unit("rho_t", rho_t)?;
                check_open_unit("rho_c", rho_c)
            }
            EndpointModel::TimeToEvent => Ok(()),
            EndpointModel::SingleArmBinary { p } => check_open_unit("p", p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Minimal clinically important difference, on the endpoint's effect scale.
    pub delta: f64,
    /// Proportion `R` of the sample allocated to the experimental arm.
    pub allocation: f64,
    pub eta: f64,
    pub zeta: f64,
    /// No-borrow prior `N(mu0, s0_sq)`.
    pub mu0: f64,
    pub s0_sq: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub endpoint: EndpointModel,
}

impl DesignParams {
    /// MCID 1, `R = 0.5`, `η = 0.95`, `ζ = 0.80`, `α = 0.05`, `β = 0.20`.
    pub fn normal(sigma0_sq: f64) -> Self {
        Self {
            delta: 1.0,
            allocation: 0.5,
            eta: 0.95,
            zeta: 0.80,
            mu0: 0.0,
            s0_sq: None,
            alpha: 0.05,
            beta: 0.20,
            endpoint: EndpointModel::Normal { sigma0_sq },
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("delta", self.delta)?;
        check_open_unit("allocation", self.allocation)?;
        check_open_unit("eta", self.eta)?;
        check_open_unit("zeta", self.zeta)?;
        check_open_unit("alpha", self.alpha)?;
        check_open_unit("beta", self.beta)?;
        if let Some(s0_sq) = self.s0_sq {
            check_positive("s0_sq", s0_sq)?;
        }
        if !self.mu0.is_finite() {
            return Err(Error::Domain {
                name: "mu0",
                value: self.mu0,
                domain: "the finite reals",
            });
        }
        self.endpoint.validate()
    }

    pub fn required_precision(&self) -> Result<f64> {
        required_precision(self.delta, self.eta, self.zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConvention {
    TotalSubjects,
    SubjectsPerArm,
    TotalEvents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rounding {
    /// Smallest multiple of `multiple` at or above `n_real`, so that both arms
    /// receive whole subjects. For `R = 0.5` this is the next even integer.
    Allocation { multiple: u64 },
    /// Plain ceiling.
    Ceiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub treatment: u64,
    pub control: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    /// Pre-rounding bound, clamped at zero.
    pub n_real: f64,
    pub n: u64,
    pub convention: SizeConvention,
    pub arms: Option<ArmCounts>,
    pub prior_precision_used: f64,
    pub decisive_by_prior: bool,
    pub rounding: Rounding,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `((z_η + z_ζ)/δ)²`.
pub fn required_precision(delta: f64, eta: f64, zeta: f64) -> Result<f64> {
    check_positive("delta", delta)?;
    check_open_unit("eta", eta)?;
    check_open_unit("zeta", zeta)?;
    let z = quantile(eta) + quantile(zeta);
    Ok((z / delta).powi(2))
}

/// Sample-size units needed per unit of posterior precision.
pub fn information_scale(design: &DesignParams) -> f64 {
    let r = design.allocation;
    match design.endpoint {
        EndpointModel::Normal { sigma0_sq } => sigma0_sq / (r * (1.0 - r)),
        EndpointModel::BinaryTwoArm { rho_t, rho_c } => {
            1.0 / (rho_t * (1.0 - rho_t)) + 1.0 / (rho_c * (1.0 - rho_c))
        }
        EndpointModel::TimeToEvent => 1.0 / (r * (1.0 - r)),
        EndpointModel::SingleArmBinary { p } => 1.0 / (p * (1.0 - p)),
    }
}

/// Precision contributed by a trial of size `n` in the design's convention.
pub fn data_precision(design: &DesignParams, n: u64) -> f64 {
    n as f64 / information_scale(design)
}

fn allocation_multiple(r: f64) -> Option<u64> {
    (1..=MAX_ALLOCATION_DENOMINATOR).find(|&d| {
        let scaled = r * d as f64;
        (scaled - scaled.round()).abs() <= 1e-9 * d as f64
    })
}

/// Smallest `n ≥ max(n_real, 0)` for which `n·R` and `n·(1−R)` are whole.
/// Falls back to a plain ceiling when `R` has no denominator up to
/// [`MAX_ALLOCATION_DENOMINATOR`].
pub fn round_allocation(n_real: f64, r: f64) -> Result<(u64, Rounding)> {
    if !n_real.is_finite() {
        return Err(Error::Domain {
            name: "n_real",
            value: n_real,
            domain: "the finite reals",
        });
    }
    check_open_unit("allocation", r)?;
    let n_real = n_real.max(0.0);
    Ok(match allocation_multiple(r) {
        Some(m) => {
            let units = (n_real / m as f64).ceil() as u64;
            (units * m, Rounding::Allocation { multiple: m })
        }
        None => (n_real.ceil() as u64, Rounding::Ceiling),
    })
}

struct Sizing {
    scale: f64,
    required: f64,
    prior_precision: f64,
}

impl Sizing {
    fn n_real_signed(&self) -> f64 {
        self.scale * (self.required - self.prior_precision)
    }
}

fn finish(
    sizing: Sizing,
    convention: SizeConvention,
    allocation: Option<f64>,
    mut warnings: Vec<String>,
) -> Result<SampleSizeResult> {
    let signed = sizing.n_real_signed();
    let decisive_by_prior = signed <= 0.0;
    let n_real = signed.max(0.0);
    let (n, rounding) = match allocation {
        Some(r) => round_allocation(n_real, r)?,
        None => (n_real.ceil() as u64, Rounding::Ceiling),
    };
    let arms = match (convention, allocation, rounding) {
        (SizeConvention::SubjectsPerArm, _, _) => Some(ArmCounts {
            treatment: n,
            control: n,
        }),
        (_, Some(r), Rounding::Allocation { .. }) => {
            let treatment = (n as f64 * r).round() as u64;
            Some(ArmCounts {
                treatment,
                control: n - treatment,
            })
        }
        _ => None,
    };
    if let (Some(r), Rounding::Ceiling) = (allocation, rounding) {
        warnings.push(format!(
            "allocation {r} has no denominator up to {MAX_ALLOCATION_DENOMINATOR}; n rounded by plain ceiling"
        ));
    }
    Ok(SampleSizeResult {
        n_real,
        n,
        convention,
        arms,
        prior_precision_used: sizing.prior_precision,
        decisive_by_prior,
        rounding,
        warnings,
    })
}

fn require_normal(design: &DesignParams) -> Result<f64> {
    match design.endpoint {
        EndpointModel::Normal { sigma0_sq } => Ok(sigma0_sq),
        other => Err(Error::UnsupportedEndpoint {
            expected: "normal",
            found: other.name(),
        }),
    }
}

/// `σ0²/(R(1−R)) · ((z_{1−α} + z_{1−β})/δ)²`.
pub fn sample_size_frequentist(design: &DesignParams) -> Result<SampleSizeResult> {
    design.validate()?;
    require_normal(design)?;
    let required = required_precision(design.delta, 1.0 - design.alpha, 1.0 - design.beta)?;
    finish(
        Sizing {
            scale: information_scale(design),
            required,
            prior_precision: 0.0,
        },
        SizeConvention::TotalSubjects,
        Some(design.allocation),
        Vec::new(),
    )
}

/// `σ0²/(R(1−R)) · (((z_η + z_ζ)/δ)² − 1/s0²)`.
pub fn sample_size_no_borrow(design: &DesignParams) -> Result<SampleSizeResult> {
    design.validate()?;
    require_normal(design)?;
    let s0_sq = design
        .s0_sq
        .ok_or_else(|| Error::InvalidArgument("no-borrow design requires s0_sq".into()))?;
    finish(
        Sizing {
            scale: information_scale(design),
            required: design.required_precision()?,
            prior_precision: 1.0 / s0_sq,
        },
        SizeConvention::TotalSubjects,
        Some(design.allocation),
        Vec::new(),
    )
}

/// Cautions attached to any design that borrows through `prior`.
pub fn prior_warnings(prior: &CollectivePrior) -> Vec<String> {
    let mut warnings = Vec::new();
    if prior.method == AggregationMethod::Legacy {
        warnings.push(
            "prior was aggregated with the legacy rule, whose precision is not monotone in the weights"
                .into(),
        );
    }
    if prior.weight_kind == WeightKind::Raw {
        warnings.push(
            "prior was built from untransformed weights; raw weights over-discount the historical data"
                .into(),
        );
    }
    if !prior.degenerate_sources.is_empty() {
        warnings.push(format!(
            "sources {:?} have near-zero variance and dominate the prior",
            prior.degenerate_sources
        ));
    }
    warnings
}

/// `σ0²/(R(1−R)) · (((z_η + z_ζ)/δ)² − σ⁻²_CP)`.
pub fn sample_size_borrow_normal(
    design: &DesignParams,
    prior: &CollectivePrior,
) -> Result<SampleSizeResult> {
    design.validate()?;
    require_normal(design)?;
    finish(
        Sizing {
            scale: information_scale(design),
            required: design.required_precision()?,
            prior_precision: prior.precision(),
        },
        SizeConvention::TotalSubjects,
        Some(design.allocation),
        prior_warnings(prior),
    )
}

/// Per-arm size for two arms of equal size, log odds ratio effect.
pub fn sample_size_binary_two_arm(
    rho_t: f64,
    rho_c: f64,
    delta: f64,
    eta: f64,
    zeta: f64,
    prior_precision: f64,
) -> Result<SampleSizeResult> {
    check_open_unit("rho_t", rho_t)?;
    check_open_unit("rho_c", rho_c)?;
    check_prior_precision(prior_precision)?;
    let scale = 1.0 / (rho_t * (1.0 - rho_t)) + 1.0 / (rho_c * (1.0 - rho_c));
    finish(
        Sizing {
            scale,
            required: required_precision(delta, eta, zeta)?,
            prior_precision,
        },
        SizeConvention::SubjectsPerArm,
        None,
        Vec::new(),
    )
}

/// Total events for exponential event times, log rate ratio effect.
pub fn events_required_tte(
    delta: f64,
    r: f64,
    eta: f64,
    zeta: f64,
    prior_precision: f64,
) -> Result<SampleSizeResult> {
    check_open_unit("allocation", r)?;
    check_prior_precision(prior_precision)?;
    finish(
        Sizing {
            scale: 1.0 / (r * (1.0 - r)),
            required: required_precision(delta, eta, zeta)?,
            prior_precision,
        },
        SizeConvention::TotalEvents,
        Some(r),
        Vec::new(),
    )
}

/// Single-arm size for a response rate `p`, log odds effect. The log odds
/// estimator is taken to have variance `1/(n p (1−p))`.
pub fn sample_size_single_arm_binary(
    p: f64,
    delta: f64,
    eta: f64,
    zeta: f64,
    prior_precision: f64,
) -> Result<SampleSizeResult> {
    check_open_unit("p", p)?;
    check_prior_precision(prior_precision)?;
    finish(
        Sizing {
            scale: 1.0 / (p * (1.0 - p)),
            required: required_precision(delta, eta, zeta)?,
            prior_precision,
        },
        SizeConvention::TotalSubjects,
        None,
        Vec::new(),
    )
}

fn check_prior_precision(prior_precision: f64) -> Result<()> {
    if prior_precision >= 0.0 && prior_precision.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "prior_precision",
            value: prior_precision,
            domain: "[0, inf)",
        })
    }
}

/// Sample size for any endpoint model given the prior precision.
pub fn sample_size(design: &DesignParams, prior_precision: f64) -> Result<SampleSizeResult> {
    design.validate()?;
    let (d, eta, zeta) = (design.delta, design.eta, design.zeta);
    match design.endpoint {
        EndpointModel::Normal { .. } => {
            check_prior_precision(prior_precision)?;
            finish(
                Sizing {
                    scale: information_scale(design),
                    required: design.required_precision()?,
                    prior_precision,
                },
                SizeConvention::TotalSubjects,
                Some(design.allocation),
                Vec::new(),
            )
        }
        EndpointModel::BinaryTwoArm { rho_t, rho_c } => {
            sample_size_binary_two_arm(rho_t, rho_c, d, eta, zeta, prior_precision)
        }
        EndpointModel::TimeToEvent => {
            events_required_tte(d, design.allocation, eta, zeta, prior_precision)
        }
        EndpointModel::SingleArmBinary { p } => {
            sample_size_single_arm_binary(p, d, eta, zeta, prior_precision)
        }
    }
}

/// Sample size for any endpoint, borrowing through `prior`.
pub fn sample_size_with_prior(
    design: &DesignParams,
    prior: &CollectivePrior,
) -> Result<SampleSizeResult> {
    let mut result = sample_size(design, prior.precision())?;
    result.warnings.extend(prior_warnings(prior));
    Ok(result)
}

/// One grid point of [`sweep_surface`]. Sample sizes are signed,
/// pre-rounding values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub weights: Vec<f64>,
    pub precision_star: f64,
    pub precision_legacy: f64,
    pub n_star_raw: f64,
    pub n_star_linearized: f64,
}

/// Equispaced grid on `[0, 1]` with spacing `step`; always ends at 1.
pub fn weight_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::Domain {
            name: "grid_step",
            value: step,
            domain: "(0, 0.5]",
        });
    }
    let count = (1.0 / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(1.0)).collect();
    if *grid.last().expect("grid has at least one point") < 1.0 - 1e-12 {
        grid.push(1.0);
    } else if let Some(last) = grid.last_mut() {
        *last = 1.0;
    }
    Ok(grid)
}

/// Evaluates prior precision and sample size over a grid of one or two
/// source weights. Weights of sources not on an axis stay at `base`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_surface(
    sources: &[HistoricalSource],
    base: &WeightVector,
    hyper: &GammaMixtureHyperparams,
    design: &DesignParams,
    axes: &[usize],
    step: f64,
    mode: Execution,
) -> Result<Vec<SweepRow>> {
    design.validate()?;
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::InvalidArgument(format!(
            "sweep takes one or two axes, got {}",
            axes.len()
        )));
    }
    if sources.len() != base.len() {
        return Err(Error::LengthMismatch {
            sources: sources.len(),
            weights: base.len(),
        });
    }
    if let Some(&bad) = axes.iter().find(|&&a| a >= sources.len()) {
        return Err(Error::InvalidArgument(format!(
            "axis index {bad} out of range for {} sources",
            sources.len()
        )));
    }
    let grid = weight_grid(step)?;
    let points: Vec<Vec<f64>> = match axes {
        [_] => grid.iter().map(|&w| vec![w]).collect(),
        _ => grid
            .iter()
            .flat_map(|&w1| grid.iter().map(move |&w2| vec![w1, w2]))
            .collect(),
    };
    let scale = information_scale(design);
    let required = design.required_precision()?;
    let base_linearized = sources
        .iter()
        .zip(base.values())
        .map(|(s, &w)| match base.kind() {
            WeightKind::Raw => linearize_weight(w, s, hyper),
            WeightKind::Transformed => Ok(w),
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = map_indexed(mode, points.len(), |i| -> Result<SweepRow> {
        let point = &points[i];
        let mut raw = base.values().to_vec();
        let mut lin = base_linearized.clone();
        for (&axis, &w) in axes.iter().zip(point) {
            raw[axis] = w;
            lin[axis] = linearize_weight(w, &sources[axis], hyper)?;
        }
        let precision_star = star_precision(sources, &raw, hyper)?;
        let precision_legacy =
            aggregate_legacy(sources, &WeightVector::raw(raw.clone())?, hyper)?.precision();
        let precision_lin = star_precision(sources, &lin, hyper)?;
        Ok(SweepRow {
            weights: point.clone(),
            precision_star,
            precision_legacy,
            n_star_raw: scale * (required - precision_star),
            n_star_linearized: scale * (required - precision_lin),
        })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::borrowing::aggregate_star;

    fn alz() -> DesignParams {
        let mut d = DesignParams::normal(3.69 * 3.69);
        d.s0_sq = Some(100.0);
        d
    }

    // z-values computed independently by bisection on the CDF
    const Z95: f64 = 1.644_853_626_951_472_2;
    const Z80: f64 = 0.841_621_233_572_914_2;

    #[test]
    fn required_precision_examples() {
        let r = required_precision(1.0, 0.95, 0.80).unwrap();
        assert!((r - (Z95 + Z80).powi(2)).abs() < 1e-12);
        assert!((r - 6.182_56).abs() < 1e-4);
        let r2 = required_precision(2.0, 0.95, 0.80).unwrap();
        assert!((r2 - 1.545_64).abs() < 1e-4);
        assert_eq!(required_precision(1.0, 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn frequentist_examples() {
        let d = alz();
        let r = sample_size_frequentist(&d).unwrap();
        assert_eq!(r.n, 338);
        assert_eq!(
            r.arms,
            Some(ArmCounts {
                treatment: 169,
                control: 169
            })
        );
        let mut d2 = d;
        d2.delta = 2.0;
        let r2 = sample_size_frequentist(&d2).unwrap();
        assert!((r2.n_real * 4.0 - r.n_real).abs() < 1e-9);
        // R = 0.5 minimizes n over allocations
        for i in 1..100 {
            let mut dr = d;
            dr.allocation = f64::from(i) / 100.0;
            assert!(sample_size_frequentist(&dr).unwrap().n_real >= r.n_real - 1e-9);
        }
    }

    #[test]
    fn no_borrow_examples() {
        let r = sample_size_no_borrow(&alz()).unwrap();
        assert_eq!(r.n, 338);
        assert!(!r.decisive_by_prior);
        let mut d = alz();
        d.s0_sq = Some(0.1);
        let r = sample_size_no_borrow(&d).unwrap();
        assert_eq!(r.n, 0);
        assert_eq!(r.n_real, 0.0);
        assert!(r.decisive_by_prior);
        d.s0_sq = None;
        assert!(sample_size_no_borrow(&d).is_err());
    }

    #[test]
    fn no_borrow_vague_limit_matches_frequentist() {
        let mut d = alz();
        d.s0_sq = Some(1e300);
        d.eta = 1.0 - d.alpha;
        d.zeta = 1.0 - d.beta;
        let a = sample_size_no_borrow(&d).unwrap().n_real;
        let b = sample_size_frequentist(&d).unwrap().n_real;
        assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
    }

    #[test]
    fn round_allocation_examples() {
        assert_eq!(round_allocation(336.7, 0.5).unwrap().0, 338);
        assert_eq!(round_allocation(202.17, 0.5).unwrap().0, 204);
        assert_eq!(round_allocation(10.0, 0.5).unwrap().0, 10);
        assert_eq!(round_allocation(-3.0, 0.5).unwrap().0, 0);
        assert_eq!(
            round_allocation(10.2, 1.0 / 3.0).unwrap(),
            (12, Rounding::Allocation { multiple: 3 })
        );
        assert_eq!(round_allocation(10.2, 0.6).unwrap().0, 15);
        let (n, rule) = round_allocation(10.2, std::f64::consts::FRAC_1_PI).unwrap();
        assert_eq!((n, rule), (11, Rounding::Ceiling));
        assert!(round_allocation(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn irrational_allocation_warns() {
        let mut d = alz();
        d.allocation = std::f64::consts::FRAC_1_PI;
        let r = sample_size_frequentist(&d).unwrap();
        assert_eq!(r.rounding, Rounding::Ceiling);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn binary_examples() {
        let r = sample_size_binary_two_arm(0.6, 0.4, 2.25f64.ln(), 0.95, 0.8, 0.0).unwrap();
        let oracle = (2.0 / 0.24) * ((Z95 + Z80) / 2.25f64.ln()).powi(2);
        assert!((r.n_real - oracle).abs() < 1e-9);
        assert_eq!(r.n, 79);
        assert_eq!(r.convention, SizeConvention::SubjectsPerArm);
        let req = required_precision(2.25f64.ln(), 0.95, 0.8).unwrap();
        let r = sample_size_binary_two_arm(0.6, 0.4, 2.25f64.ln(), 0.95, 0.8, req).unwrap();
        assert_eq!(r.n, 0);
        assert!(r.decisive_by_prior);
        let a = sample_size_binary_two_arm(0.7, 0.2, 1.0, 0.95, 0.8, 0.3).unwrap();
        let b = sample_size_binary_two_arm(0.2, 0.7, 1.0, 0.95, 0.8, 0.3).unwrap();
        assert_eq!(a.n_real, b.n_real);
        assert!(sample_size_binary_two_arm(0.0, 0.4, 1.0, 0.95, 0.8, 0.0).is_err());
        assert!(sample_size_binary_two_arm(0.5, 1.0, 1.0, 0.95, 0.8, 0.0).is_err());
    }

    #[test]
    fn tte_examples() {
        let d = 1.5f64.ln();
        let r = events_required_tte(d, 0.5, 0.95, 0.8, 0.0).unwrap();
        let oracle = 4.0 * ((Z95 + Z80) / d).powi(2);
        assert!((r.n_real - oracle).abs() < 1e-9);
        assert_eq!(r.n, 152);
        assert_eq!(r.convention, SizeConvention::TotalEvents);
        let r1 = events_required_tte(d, 0.5, 0.95, 0.8, 1.0).unwrap();
        assert!((r.n_real - r1.n_real - 4.0).abs() < 1e-9);
        for i in 1..100 {
            let ri = events_required_tte(d, f64::from(i) / 100.0, 0.95, 0.8, 0.0).unwrap();
            assert!(ri.n_real >= r.n_real - 1e-9);
        }
    }

    #[test]
    fn single_arm_examples() {
        let r = sample_size_single_arm_binary(0.3, 0.5, 0.95, 0.8, 0.0).unwrap();
        let oracle = ((Z95 + Z80) / 0.5).powi(2) / 0.21;
        assert!((r.n_real - oracle).abs() < 1e-9);
        assert_eq!(r.n, 118);
        for i in 1..100 {
            let p = f64::from(i) / 100.0;
            let ri = sample_size_single_arm_binary(p, 0.5, 0.95, 0.8, 0.0).unwrap();
            assert!(ri.n_real >= r.n_real * 0.21 / 0.25 - 1e-9);
        }
        let req = required_precision(0.5, 0.95, 0.8).unwrap();
        assert_eq!(
            sample_size_single_arm_binary(0.3, 0.5, 0.95, 0.8, req)
                .unwrap()
                .n,
            0
        );
        assert!(sample_size_single_arm_binary(1.0, 0.5, 0.95, 0.8, 0.0).is_err());
    }

    #[test]
    fn n_real_decreasing_in_prior_precision() {
        let d = alz();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let r = sample_size(&d, f64::from(i) * 0.05).unwrap();
            if prev > 0.0 {
                assert!(r.n_real < prev || r.n_real == 0.0);
            } else {
                assert_eq!(r.n_real, 0.0);
            }
            prev = r.n_real;
        }
    }

    #[test]
    fn no_borrow_equals_borrow_with_matching_prior() {
        let h = GammaMixtureHyperparams::default();
        let sources = vec![
            HistoricalSource::new("a", 0.1, 1.25).unwrap(),
            HistoricalSource::new("b", 0.24, 0.73).unwrap(),
        ];
        let prior = aggregate_star(
            &sources,
            &WeightVector::transformed(vec![0.003, 0.005]).unwrap(),
            &h,
        )
        .unwrap();
        let mut d = alz();
        d.s0_sq = Some(prior.variance);
        let a = sample_size_no_borrow(&d).unwrap();
        let b = sample_size_borrow_normal(&d, &prior).unwrap();
        assert_eq!(a.n_real, b.n_real);
        assert_eq!(a.n, b.n);
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn borrow_warns_on_raw_and_legacy() {
        let h = GammaMixtureHyperparams::default();
        let sources = vec![HistoricalSource::new("a", 0.1, 1.25).unwrap()];
        let prior = aggregate_legacy(&sources, &WeightVector::raw(vec![0.2]).unwrap(), &h).unwrap();
        let r = sample_size_borrow_normal(&alz(), &prior).unwrap();
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn non_normal_rejected_by_normal_formulas() {
        let mut d = alz();
        d.endpoint = EndpointModel::TimeToEvent;
        assert!(matches!(
            sample_size_frequentist(&d),
            Err(Error::UnsupportedEndpoint { .. })
        ));
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(weight_grid(0.01).unwrap().len(), 101);
        assert_eq!(weight_grid(0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(
            weight_grid(0.3).unwrap(),
            vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]
        );
        assert!(weight_grid(0.0).is_err());
        assert!(weight_grid(0.6).is_err());
    }

    fn two_source_surface_inputs() -> (Vec<HistoricalSource>, WeightVector, GammaMixtureHyperparams)
    {
        (
            vec![
                HistoricalSource::new("1", 0.0, 0.1).unwrap(),
                HistoricalSource::new("2", 0.0, 0.1).unwrap(),
            ],
            WeightVector::raw(vec![0.0, 0.0]).unwrap(),
            GammaMixtureHyperparams::new(1.1, 1.1, 1e6, 1.0).unwrap(),
        )
    }

    #[test]
    fn sweep_two_source_surface_corners_and_monotonicity() {
        let (sources, base, h) = two_source_surface_inputs();
        let rows = sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[0, 1],
            0.01,
            Execution::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 101 * 101);
        assert!((rows[0].precision_legacy - 19.9998).abs() < 1e-3);
        let last = rows.last().unwrap();
        assert_eq!(last.weights, vec![1.0, 1.0]);
        assert!((last.precision_legacy - 1.0 / 5.55).abs() < 1e-3);
        for i in 0..101 {
            for j in 0..101 {
                let r = &rows[i * 101 + j];
                if j + 1 < 101 {
                    assert!(rows[i * 101 + j + 1].precision_star <= r.precision_star);
                }
                if i + 1 < 101 {
                    assert!(rows[(i + 1) * 101 + j].precision_star <= r.precision_star);
                }
            }
        }
    }

    #[test]
    fn sweep_linearized_axis_is_affine() {
        let (sources, base, h) = two_source_surface_inputs();
        let rows = sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[0],
            0.01,
            Execution::Sequential,
        )
        .unwrap();
        let n: Vec<f64> = rows.iter().map(|r| r.n_star_linearized).collect();
        let scale = n.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for w in n.windows(3) {
            assert!((w[0] - 2.0 * w[1] + w[2]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn sweep_errors() {
        let (sources, base, h) = two_source_surface_inputs();
        assert!(sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[2],
            0.1,
            Execution::Sequential
        )
        .is_err());
        assert!(
            sweep_surface(&sources, &base, &h, &alz(), &[], 0.1, Execution::Sequential).is_err()
        );
        assert!(sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[0],
            0.7,
            Execution::Sequential
        )
        .is_err());
    }

    #[test]
    fn sweep_same_under_both_modes() {
        let (sources, base, h) = two_source_surface_inputs();
        let a = sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[0, 1],
            0.05,
            Execution::Sequential,
        )
        .unwrap();
        let b = sweep_surface(
            &sources,
            &base,
            &h,
            &alz(),
            &[0, 1],
            0.05,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
