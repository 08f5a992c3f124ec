//! Seeded Monte Carlo evaluation of a design: simulate new-trial data under
//! a true effect, analyze each replicate with a fixed prior, and tally the
//! decisions.
//!
//! Random numbers come from ChaCha8, a counter-based generator. Replicate
//! `i` of a run with seed `s` reads stream `i` of the generator keyed by
//! `s`, so each replicate's draws depend only on `(s, i)`. Results are
//! bitwise identical for any execution order or worker count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{DesignParams, EndpointModel};
use crate::error::{Error, Result};
use crate::exec::{map_reduce, Execution};
use crate::inference::{update_with_estimate, DecisionOutcome, DecisionRule, NormalPrior, Verdict};
use crate::stats::quantile;

/// Upper limit on replicates accepted by [`SimulationConfig::validate`].
pub const MAX_REPLICATES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub design: DesignParams,
    pub prior: NormalPrior,
    /// Total sample size of the simulated trial.
    pub n: u64,
    pub true_mu_delta: f64,
    pub replicates: u64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.sigma0_sq()?;
        if self.replicates == 0 || self.replicates > MAX_REPLICATES {
            return Err(Error::InvalidArgument(format!(
                "replicates must be in 1..={MAX_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "simulated trial needs n >= 2, got {}",
                self.n
            )));
        }
        let (t, c) = self.arm_sizes();
        if t == 0 || c == 0 || (self.n as f64 * self.design.allocation - t as f64).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "n = {} does not split into whole arms at allocation {}",
                self.n, self.design.allocation
            )));
        }
        if !self.true_mu_delta.is_finite() {
            return Err(Error::Domain {
                name: "true_mu_delta",
                value: self.true_mu_delta,
                domain: "the finite reals",
            });
        }
        if !(self.prior.precision >= 0.0 && self.prior.precision.is_finite()) {
            return Err(Error::Domain {
                name: "prior precision",
                value: self.prior.precision,
                domain: "[0, inf)",
            });
        }
        Ok(())
    }

    fn sigma0_sq(&self) -> Result<f64> {
        match self.design.endpoint {
            EndpointModel::Normal { sigma0_sq } => Ok(sigma0_sq),
            other => Err(Error::UnsupportedEndpoint {
                expected: "normal",
                found: other.name(),
            }),
        }
    }

    /// `(treatment, control)` arm sizes.
    pub fn arm_sizes(&self) -> (u64, u64) {
        let t = (self.n as f64 * self.design.allocation).round() as u64;
        (t, self.n.saturating_sub(t))
    }

    fn data_precision(&self, sigma0_sq: f64) -> f64 {
        let r = self.design.allocation;
        self.n as f64 * r * (1.0 - r) / sigma0_sq
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub n: u64,
    pub true_mu_delta: f64,
    pub replicates: u64,
    pub seed: u64,
    pub efficacious: u64,
    pub futile: u64,
    pub inconclusive: u64,
    pub pct_efficacious: f64,
    pub pct_futile: f64,
    pub pct_inconclusive: f64,
    /// Monte Carlo standard error of the efficacy proportion, in percentage points.
    pub mc_stderr: f64,
}

/// Generator for replicate `rep_index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
#[inline]
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variate by inversion.
#[inline]
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    quantile(open_unit(rng))
}

struct Prepared {
    rule: DecisionRule,
    sigma0: f64,
    data_precision: f64,
}

fn prepare(config: &SimulationConfig) -> Result<Prepared> {
    config.validate()?;
    let sigma0_sq = config.sigma0_sq()?;
    let d = &config.design;
    Ok(Prepared {
        rule: DecisionRule::new(d.delta, d.eta, d.zeta)?,
        sigma0: sigma0_sq.sqrt(),
        data_precision: config.data_precision(sigma0_sq),
    })
}

/// Draws the arm outcomes of one replicate and returns `ȳT − ȳC`.
fn simulated_difference(config: &SimulationConfig, sigma0: f64, rep_index: u64) -> f64 {
    let mut rng = replicate_rng(config.seed, rep_index);
    let (nt, nc) = config.arm_sizes();
    let mut sum_t = 0.0;
    for _ in 0..nt {
        sum_t += config.true_mu_delta + sigma0 * standard_normal(&mut rng);
    }
    let mut sum_c = 0.0;
    for _ in 0..nc {
        sum_c += sigma0 * standard_normal(&mut rng);
    }
    sum_t / nt as f64 - sum_c / nc as f64
}

/// Analyzes a replicate whose observed mean difference is `ybar_delta`.
pub fn analyze_observed(config: &SimulationConfig, ybar_delta: f64) -> Result<DecisionOutcome> {
    let prep = prepare(config)?;
    let post = update_with_estimate(&config.prior, ybar_delta, prep.data_precision);
    Ok(prep.rule.decide(&post))
}

/// Simulates and analyzes one replicate.
pub fn run_replicate(rep_index: u64, config: &SimulationConfig) -> Result<DecisionOutcome> {
    let prep = prepare(config)?;
    let ybar = simulated_difference(config, prep.sigma0, rep_index);
    let post = update_with_estimate(&config.prior, ybar, prep.data_precision);
    Ok(prep.rule.decide(&post))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    efficacious: u64,
    futile: u64,
    inconclusive: u64,
}

impl Tally {
    fn of(verdict: Verdict) -> Self {
        let mut t = Tally::default();
        match verdict {
            Verdict::Efficacious => t.efficacious = 1,
            Verdict::Futile => t.futile = 1,
            Verdict::Inconclusive => t.inconclusive = 1,
        }
        t
    }

    fn merge(self, other: Self) -> Self {
        Tally {
            efficacious: self.efficacious + other.efficacious,
            futile: self.futile + other.futile,
            inconclusive: self.inconclusive + other.inconclusive,
        }
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationResult> {
    run_simulation_with(config, Execution::default())
}

pub fn run_simulation_with(config: &SimulationConfig, mode: Execution) -> Result<SimulationResult> {
    let prep = prepare(config)?;
    let tally = map_reduce(
        mode,
        config.replicates,
        Tally::default(),
        |i| {
            let ybar = simulated_difference(config, prep.sigma0, i);
            let post = update_with_estimate(&config.prior, ybar, prep.data_precision);
            Tally::of(prep.rule.verdict(&post))
        },
        Tally::merge,
    );
    let reps = config.replicates as f64;
    let pct = |k: u64| 100.0 * k as f64 / reps;
    let p_eff = tally.efficacious as f64 / reps;
    Ok(SimulationResult {
        n: config.n,
        true_mu_delta: config.true_mu_delta,
        replicates: config.replicates,
        seed: config.seed,
        efficacious: tally.efficacious,
        futile: tally.futile,
        inconclusive: tally.inconclusive,
        pct_efficacious: pct(tally.efficacious),
        pct_futile: pct(tally.futile),
        pct_inconclusive: pct(tally.inconclusive),
        mc_stderr: 100.0 * (p_eff * (1.0 - p_eff) / reps).sqrt(),
    })
}
