//! Sample-size determination for clinical trials that borrow from
//! historical data through commensurate priors.
//!
//! The pipeline runs: elicited weights → [`linearize`] → collective prior
//! ([`borrowing`]) → sample size ([`design`]) → operating characteristics
//! ([`simulate`]) under the posterior decision rule ([`inference`]).

pub mod borrowing;
pub mod design;
pub mod error;
mod exec;
pub mod inference;
pub mod linearize;
pub mod locate;
pub mod report;
pub mod scenario;
pub mod simulate;
pub mod stats;

pub use borrowing::{
    aggregate, AggregationMethod, CollectivePrior, HistoricalSource, WeightKind, WeightVector,
};
pub use design::{sample_size, DesignParams, EndpointModel, SampleSizeResult};
pub use error::{Error, Result};
pub use exec::Execution;
pub use inference::{
    decide, posterior_update, DecisionOutcome, NormalPrior, PosteriorSummary, Verdict,
};
pub use linearize::{linearize_all, linearize_weight};
pub use scenario::{Scenario, ScenarioError};
pub use simulate::{run_simulation, SimulationConfig, SimulationResult};
pub use stats::{GammaMixtureHyperparams, Probability};
