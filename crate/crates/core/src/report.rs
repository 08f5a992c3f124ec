//! The end-to-end pipeline on a [`Scenario`]: weights → prior → sample
//! sizes → optional simulations, and the report that bundles them.

use serde::{Deserialize, Serialize};

use crate::borrowing::{aggregate, AggregationMethod, CollectivePrior, WeightKind, WeightVector};
use crate::design::{
    sample_size, sample_size_frequentist, sample_size_with_prior, SampleSizeResult,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::inference::NormalPrior;
use crate::linearize::linearize_all;
use crate::scenario::Scenario;
use crate::simulate::{run_simulation_with, SimulationConfig, SimulationResult};
use crate::EndpointModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub method: AggregationMethod,
    /// Feed elicited weights to the prior without linearizing them.
    pub skip_transform: bool,
    pub mode: Execution,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            method: AggregationMethod::Star,
            skip_transform: false,
            mode: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub id: String,
    pub w: f64,
    pub w_transformed: f64,
}

/// Sample size obtained by treating elicited weights as if they were
/// already transformed, next to the correct one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWeightHazard {
    pub n_untransformed: u64,
    pub n_transformed: u64,
    pub message: String,
}

/// Raw-to-transformed table. Fails when the scenario weights are already
/// transformed.
pub fn transform_table(s: &Scenario) -> Result<Vec<WeightRow>> {
    let transformed = linearize_all(&s.historical_sources(), &s.weights(), &s.hyper)?;
    Ok(s.sources
        .iter()
        .zip(transformed.values())
        .map(|(src, &wt)| WeightRow {
            id: src.id.clone(),
            w: src.w,
            w_transformed: wt,
        })
        .collect())
}

/// Weights as they enter the prior.
pub fn design_weights(s: &Scenario, skip_transform: bool) -> Result<WeightVector> {
    let w = s.weights();
    match (w.kind(), skip_transform) {
        (WeightKind::Raw, false) => linearize_all(&s.historical_sources(), &w, &s.hyper),
        _ => Ok(w),
    }
}

/// True when the prior would be built from untransformed elicited weights.
pub fn uses_raw_weights(s: &Scenario, opts: &PipelineOptions) -> bool {
    s.weights_kind == WeightKind::Raw && opts.skip_transform && !s.sources.is_empty()
}

pub fn collective_prior(s: &Scenario, opts: &PipelineOptions) -> Result<CollectivePrior> {
    if s.sources.is_empty() {
        return Err(Error::InvalidArgument(
            "a collective prior needs at least one historical source".into(),
        ));
    }
    let weights = design_weights(s, opts.skip_transform)?;
    aggregate(opts.method, &s.historical_sources(), &weights, &s.hyper)
}

/// Sample size borrowing through the collective prior.
pub fn borrow_sample_size(s: &Scenario, opts: &PipelineOptions) -> Result<SampleSizeResult> {
    sample_size_with_prior(&s.design, &collective_prior(s, opts)?)
}

/// Sample size under the no-borrow prior `N(mu0, s0_sq)`, or a vague prior
/// when `s0_sq` is absent.
pub fn no_borrow_sample_size(s: &Scenario) -> Result<SampleSizeResult> {
    sample_size(&s.design, s.design.s0_sq.map_or(0.0, |v| 1.0 / v))
}

/// Conventional z-test sample size; normal endpoint only.
pub fn frequentist_sample_size(s: &Scenario) -> Result<SampleSizeResult> {
    sample_size_frequentist(&s.design)
}

pub fn raw_weight_hazard(s: &Scenario) -> Result<Option<RawWeightHazard>> {
    if s.weights_kind != WeightKind::Raw || s.sources.is_empty() {
        return Ok(None);
    }
    let raw = aggregate(
        AggregationMethod::Star,
        &s.historical_sources(),
        &s.weights(),
        &s.hyper,
    )?;
    let n_untransformed = sample_size(&s.design, raw.precision())?.n;
    let n_transformed = borrow_sample_size(s, &PipelineOptions::default())?.n;
    Ok(Some(RawWeightHazard {
        n_untransformed,
        n_transformed,
        message: format!(
            "using elicited weights untransformed gives n = {n_untransformed} instead of \
             n = {n_transformed}; raw weights discount the historical data far more than elicited"
        ),
    }))
}

/// Prior used by the simulated analysis: the collective prior when there
/// are sources, otherwise the no-borrow prior.
pub fn analysis_prior(s: &Scenario, opts: &PipelineOptions) -> Result<NormalPrior> {
    if s.sources.is_empty() {
        match s.design.s0_sq {
            Some(v) => NormalPrior::new(s.design.mu0, v),
            None => Ok(NormalPrior::flat()),
        }
    } else {
        Ok(NormalPrior::from(&collective_prior(s, opts)?))
    }
}

/// Runs one simulation per true effect. `n` defaults to the design size.
pub fn simulate_scenario(
    s: &Scenario,
    opts: &PipelineOptions,
    n: Option<u64>,
    true_mu_delta: &[f64],
    replicates: u64,
    seed: u64,
) -> Result<Vec<SimulationResult>> {
    if !matches!(s.design.endpoint, EndpointModel::Normal { .. }) {
        return Err(Error::UnsupportedEndpoint {
            expected: "normal",
            found: s.design.endpoint.name(),
        });
    }
    let n = match n {
        Some(n) => n,
        None if s.sources.is_empty() => no_borrow_sample_size(s)?.n,
        None => borrow_sample_size(s, opts)?.n,
    };
    let prior = analysis_prior(s, opts)?;
    true_mu_delta
        .iter()
        .map(|&mu| {
            let config = SimulationConfig {
                design: s.design,
                prior,
                n,
                true_mu_delta: mu,
                replicates,
                seed,
            };
            run_simulation_with(&config, opts.mode)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<WeightRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<CollectivePrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<SampleSizeResult>,
    pub no_borrow: SampleSizeResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequentist: Option<SampleSizeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_weight_hazard: Option<RawWeightHazard>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub simulations: Vec<SimulationResult>,
}

/// Scenario echo plus results. Serializes as the scenario object with an
/// extra `results` key, so a report is itself a valid scenario file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub results: ReportResults,
}

pub fn build_report(s: &Scenario, opts: &PipelineOptions) -> Result<Report> {
    let has_sources = !s.sources.is_empty();
    let weights = match (has_sources, s.weights_kind) {
        (true, WeightKind::Raw) => Some(transform_table(s)?),
        _ => None,
    };
    let prior = has_sources.then(|| collective_prior(s, opts)).transpose()?;
    let sample_size = prior
        .as_ref()
        .map(|p| sample_size_with_prior(&s.design, p))
        .transpose()?;
    let frequentist = match s.design.endpoint {
        EndpointModel::Normal { .. } => Some(frequentist_sample_size(s)?),
        _ => None,
    };
    let simulations = match &s.simulation {
        Some(sim) => {
            simulate_scenario(s, opts, sim.n, &sim.true_mu_delta, sim.replicates, sim.seed)?
        }
        None => Vec::new(),
    };
    Ok(Report {
        scenario: s.clone(),
        results: ReportResults {
            weights,
            prior,
            sample_size,
            no_borrow: no_borrow_sample_size(s)?,
            frequentist,
            raw_weight_hazard: raw_weight_hazard(s)?,
            simulations,
        },
    })
}
