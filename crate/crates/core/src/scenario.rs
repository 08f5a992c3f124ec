//! The scenario file: historical sources with their elicited weights,
//! hyperparameters, design parameters, endpoint model and an optional
//! simulation block. One JSON schema shared by the CLI and the service.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "example",
//!   "sources": [{"id": "trial 1", "theta": 0.1, "tau_sq": 1.25, "w": 0.2}],
//!   "weights_kind": "raw",
//!   "hyper": {"a01": 1.01, "b01": 1.01, "a02": 1e6, "b02": 1, "c0": 0.05},
//!   "design": {"delta": 1, "allocation": 0.5, "eta": 0.95, "zeta": 0.8},
//!   "endpoint": {"model": "normal", "sigma0_sq": 13.6161},
//!   "simulation": {"true_mu_delta": [1, 0], "replicates": 10000, "seed": 1}
//! }
//! ```
//!
//! Validation collects every problem it finds rather than stopping at the
//! first; each [`FieldError`] names the offending path and its position.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::borrowing::{HistoricalSource, WeightKind, WeightVector};
use crate::design::{DesignParams, EndpointModel};
use crate::locate::{Locator, Position};
use crate::stats::GammaMixtureHyperparams;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSource {
    pub id: String,
    pub theta: f64,
    pub tau_sq: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    /// Sample size to simulate; the borrowing design's `n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub true_mu_delta: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub sources: Vec<ScenarioSource>,
    pub weights_kind: WeightKind,
    pub hyper: GammaMixtureHyperparams,
    pub design: DesignParams,
    pub simulation: Option<SimulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "<root>"
        } else {
            &self.path
        };
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{path} (line {l}, column {c}): {}", self.message),
            _ => write!(f, "{path}: {}", self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", display_all(.0))]
    Invalid(Vec<FieldError>),
}

fn display_all(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl ScenarioError {
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ScenarioError::Invalid(e) => e,
            ScenarioError::Io { .. } => &[],
        }
    }
}

// Serialized layout; field order here is the on-disk key order.
#[derive(Serialize)]
struct ScenarioDoc<'a> {
    schema_version: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: &'a Option<String>,
    sources: &'a [ScenarioSource],
    weights_kind: WeightKind,
    hyper: &'a GammaMixtureHyperparams,
    design: DesignDoc,
    endpoint: EndpointModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: &'a Option<SimulationSpec>,
}

#[derive(Serialize)]
struct DesignDoc {
    delta: f64,
    allocation: f64,
    eta: f64,
    zeta: f64,
    mu0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    s0_sq: Option<f64>,
    alpha: f64,
    beta: f64,
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = &self.design;
        ScenarioDoc {
            schema_version: SCHEMA_VERSION,
            name: &self.name,
            sources: &self.sources,
            weights_kind: self.weights_kind,
            hyper: &self.hyper,
            design: DesignDoc {
                delta: d.delta,
                allocation: d.allocation,
                eta: d.eta,
                zeta: d.zeta,
                mu0: d.mu0,
                s0_sq: d.s0_sq,
                alpha: d.alpha,
                beta: d.beta,
            },
            endpoint: d.endpoint,
            simulation: &self.simulation,
        }
        .serialize(s)
    }
}

impl Scenario {
    pub fn historical_sources(&self) -> Vec<HistoricalSource> {
        self.sources
            .iter()
            .map(|s| HistoricalSource {
                id: s.id.clone(),
                theta: s.theta,
                tau_sq: s.tau_sq,
            })
            .collect()
    }

    pub fn weights(&self) -> WeightVector {
        WeightVector::new(
            self.sources.iter().map(|s| s.w).collect(),
            self.weights_kind,
        )
        .expect("weights validated at parse time")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            ScenarioError::Invalid(vec![FieldError {
                path: String::new(),
                message: format!("malformed JSON: {e}"),
                line: Some(e.line()),
                column: Some(e.column()),
            }])
        })?;
        let locator = Locator::new(text);
        Self::from_value_at(&value, "", Some(&locator)).map_err(ScenarioError::Invalid)
    }

    /// Validates `value` as a scenario that sits at `prefix` inside a larger
    /// document. Positions are looked up in `locator` when given.
    pub fn from_value_at(
        value: &Value,
        prefix: &str,
        locator: Option<&Locator>,
    ) -> Result<Self, Vec<FieldError>> {
        let mut c = Checker {
            errors: Vec::new(),
            locator,
        };
        let scenario = c.scenario(value, prefix);
        match scenario {
            Some(s) if c.errors.is_empty() => Ok(s),
            _ => Err(c.errors),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Historical sources, weights and hyperparameters without a design:
/// `{"sources": [...], "weights": [...], "weights_kind": "raw", "hyper": {...}}`.
/// Weights may instead be given per source as `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsInput {
    pub sources: Vec<HistoricalSource>,
    pub weights: WeightVector,
    pub hyper: GammaMixtureHyperparams,
}

impl WeightsInput {
    pub fn from_value(value: &Value, locator: Option<&Locator>) -> Result<Self, Vec<FieldError>> {
        let mut c = Checker {
            errors: Vec::new(),
            locator,
        };
        match c.weights_input(value) {
            Some(w) if c.errors.is_empty() => Ok(w),
            _ => Err(c.errors),
        }
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

struct Checker<'a> {
    errors: Vec<FieldError>,
    locator: Option<&'a Locator>,
}

impl Checker<'_> {
    fn error(&mut self, path: &str, message: impl Into<String>) {
        let pos: Option<Position> = self.locator.and_then(|l| l.find(path));
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
            line: pos.map(|p| p.line),
            column: pos.map(|p| p.column),
        });
    }

    fn object<'v>(&mut self, value: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        match value.as_object() {
            Some(m) => Some(m),
            None => {
                self.error(path, "expected an object");
                None
            }
        }
    }

    fn number(&mut self, obj: &Map<String, Value>, parent: &str, key: &str) -> Option<Option<f64>> {
        let path = join(parent, key);
        match obj.get(key) {
            None | Some(Value::Null) => Some(None),
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(Some(x)),
                _ => {
                    self.error(&path, "expected a finite number");
                    None
                }
            },
        }
    }

    /// Number with a default; `check` returns a message when out of range.
    fn real(
        &mut self,
        obj: &Map<String, Value>,
        parent: &str,
        key: &str,
        default: Option<f64>,
        check: impl Fn(f64) -> Option<&'static str>,
    ) -> Option<f64> {
        let path = join(parent, key);
        let x = match self.number(obj, parent, key)? {
            Some(x) => x,
            None => match default {
                Some(d) => return Some(d),
                None => {
                    self.error(&path, "missing required field");
                    return None;
                }
            },
        };
        match check(x) {
            None => Some(x),
            Some(msg) => {
                self.error(&path, format!("{x} is out of range: {msg}"));
                None
            }
        }
    }

    fn integer(
        &mut self,
        obj: &Map<String, Value>,
        parent: &str,
        key: &str,
        default: Option<u64>,
    ) -> Option<u64> {
        let path = join(parent, key);
        match obj.get(key) {
            None | Some(Value::Null) => match default {
                Some(d) => Some(d),
                None => {
                    self.error(&path, "missing required field");
                    None
                }
            },
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    self.error(&path, "expected a non-negative integer");
                    None
                }
            },
        }
    }

    fn scenario(&mut self, value: &Value, prefix: &str) -> Option<Scenario> {
        let obj = self.object(value, prefix)?;
        match obj.get("schema_version") {
            None => self.error(&join(prefix, "schema_version"), "missing required field"),
            Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
            Some(v) => self.error(
                &join(prefix, "schema_version"),
                format!("unsupported schema_version {v}; expected {SCHEMA_VERSION}"),
            ),
        }
        let name = match obj.get("name") {
            None | Some(Value::Null) => Some(None),
            Some(Value::String(s)) => Some(Some(s.clone())),
            Some(_) => {
                self.error(&join(prefix, "name"), "expected a string");
                None
            }
        };
        let weights_kind = match obj.get("weights_kind") {
            None | Some(Value::Null) => Some(WeightKind::Raw),
            Some(v) => match serde_json::from_value::<WeightKind>(v.clone()) {
                Ok(k) => Some(k),
                Err(_) => {
                    self.error(
                        &join(prefix, "weights_kind"),
                        "expected \"raw\" or \"transformed\"",
                    );
                    None
                }
            },
        };
        let sources = self.sources(obj.get("sources"), &join(prefix, "sources"), None);
        let hyper = match obj.get("hyper") {
            None | Some(Value::Null) => Some(GammaMixtureHyperparams::default()),
            Some(v) => self.hyper(v, &join(prefix, "hyper")),
        };
        let endpoint = match obj.get("endpoint") {
            None => {
                self.error(&join(prefix, "endpoint"), "missing required field");
                None
            }
            Some(v) => self.endpoint(v, &join(prefix, "endpoint")),
        };
        let design = match obj.get("design") {
            None => {
                self.error(&join(prefix, "design"), "missing required field");
                None
            }
            Some(v) => self.design(v, &join(prefix, "design")),
        };
        let simulation = match obj.get("simulation") {
            None | Some(Value::Null) => Some(None),
            Some(v) => self.simulation(v, &join(prefix, "simulation")).map(Some),
        };
        let mut design = design?;
        design.endpoint = endpoint?;
        Some(Scenario {
            name: name?,
            sources: sources?,
            weights_kind: weights_kind?,
            hyper: hyper?,
            design,
            simulation: simulation?,
        })
    }

    fn sources(
        &mut self,
        value: Option<&Value>,
        path: &str,
        w_default: Option<f64>,
    ) -> Option<Vec<ScenarioSource>> {
        let Some(value) = value else {
            self.error(path, "missing required field");
            return None;
        };
        let Some(items) = value.as_array() else {
            self.error(path, "expected an array");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (k, item) in items.iter().enumerate() {
            let p = format!("{path}[{k}]");
            let Some(obj) = self.object(item, &p) else {
                ok = false;
                continue;
            };
            let id = match obj.get("id") {
                Some(Value::String(s)) => Some(s.clone()),
                None | Some(Value::Null) => Some(format!("{}", k + 1)),
                Some(_) => {
                    self.error(&join(&p, "id"), "expected a string");
                    None
                }
            };
            let theta = self.real(obj, &p, "theta", None, |_| None);
            let tau_sq = self.real(obj, &p, "tau_sq", None, |x| {
                (x <= 0.0).then_some("must be > 0")
            });
            let w = self.real(obj, &p, "w", w_default, |x| {
                (!(0.0..=1.0).contains(&x)).then_some("must lie in [0, 1]")
            });
            match (id, theta, tau_sq, w) {
                (Some(id), Some(theta), Some(tau_sq), Some(w)) => out.push(ScenarioSource {
                    id,
                    theta,
                    tau_sq,
                    w,
                }),
                _ => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn weights_input(&mut self, value: &Value) -> Option<WeightsInput> {
        let obj = self.object(value, "")?;
        let weights = match obj.get("weights") {
            None | Some(Value::Null) => None,
            Some(Value::Array(xs)) => {
                let mut out = Vec::with_capacity(xs.len());
                for (k, x) in xs.iter().enumerate() {
                    match x.as_f64() {
                        Some(w) if (0.0..=1.0).contains(&w) => out.push(w),
                        _ => self.error(&format!("weights[{k}]"), "expected a number in [0, 1]"),
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.error("weights", "expected an array of numbers");
                None
            }
        };
        let explicit = obj.get("weights").is_some_and(|v| !v.is_null());
        let sources = self.sources(obj.get("sources"), "sources", explicit.then_some(0.0));
        let kind = match obj.get("weights_kind") {
            None | Some(Value::Null) => Some(WeightKind::Raw),
            Some(v) => match serde_json::from_value::<WeightKind>(v.clone()) {
                Ok(k) => Some(k),
                Err(_) => {
                    self.error("weights_kind", "expected \"raw\" or \"transformed\"");
                    None
                }
            },
        };
        let hyper = match obj.get("hyper") {
            None | Some(Value::Null) => Some(GammaMixtureHyperparams::default()),
            Some(v) => self.hyper(v, "hyper"),
        };
        let sources = sources?;
        let values = match weights {
            Some(w) if w.len() != sources.len() => {
                self.error(
                    "weights",
                    format!("{} weights for {} sources", w.len(), sources.len()),
                );
                return None;
            }
            Some(w) => w,
            None if explicit => return None,
            None => sources.iter().map(|s| s.w).collect(),
        };
        if !self.errors.is_empty() {
            return None;
        }
        let weights = WeightVector::new(values, kind?).ok()?;
        Some(WeightsInput {
            sources: sources
                .into_iter()
                .map(|s| HistoricalSource {
                    id: s.id,
                    theta: s.theta,
                    tau_sq: s.tau_sq,
                })
                .collect(),
            weights,
            hyper: hyper?,
        })
    }

    fn hyper(&mut self, value: &Value, path: &str) -> Option<GammaMixtureHyperparams> {
        let obj = self.object(value, path)?;
        let d = GammaMixtureHyperparams::default();
        let shape = |x: f64| (x <= 1.0).then_some("must be > 1");
        let rate = |x: f64| (x <= 0.0).then_some("must be > 0");
        let a01 = self.real(obj, path, "a01", Some(d.a01()), shape);
        let b01 = self.real(obj, path, "b01", Some(d.b01()), rate);
        let a02 = self.real(obj, path, "a02", Some(d.a02()), shape);
        let b02 = self.real(obj, path, "b02", Some(d.b02()), rate);
        let c0 = self.real(obj, path, "c0", Some(d.c0()), rate);
        let (a01, b01, a02, b02, c0) = (a01?, b01?, a02?, b02?, c0?);
        match GammaMixtureHyperparams::with_concentration(a01, b01, a02, b02, c0) {
            Ok(h) => Some(h),
            Err(e) => {
                self.error(path, e.to_string());
                None
            }
        }
    }

    fn design(&mut self, value: &Value, path: &str) -> Option<DesignParams> {
        let obj = self.object(value, path)?;
        let open = |x: f64| (!(x > 0.0 && x < 1.0)).then_some("must lie in (0, 1)");
        let positive = |x: f64| (x <= 0.0).then_some("must be > 0");
        let delta = self.real(obj, path, "delta", None, positive);
        let allocation = self.real(obj, path, "allocation", Some(0.5), open);
        let eta = self.real(obj, path, "eta", Some(0.95), open);
        let zeta = self.real(obj, path, "zeta", Some(0.80), open);
        let mu0 = self.real(obj, path, "mu0", Some(0.0), |_| None);
        let s0_sq = match self.number(obj, path, "s0_sq") {
            Some(Some(x)) if x <= 0.0 => {
                self.error(
                    &join(path, "s0_sq"),
                    format!("{x} is out of range: must be > 0"),
                );
                None
            }
            other => other,
        };
        let alpha = self.real(obj, path, "alpha", Some(0.05), open);
        let beta = self.real(obj, path, "beta", Some(0.20), open);
        Some(DesignParams {
            delta: delta?,
            allocation: allocation?,
            eta: eta?,
            zeta: zeta?,
            mu0: mu0?,
            s0_sq: s0_sq?,
            alpha: alpha?,
            beta: beta?,
            endpoint: EndpointModel::TimeToEvent,
        })
    }

    fn endpoint(&mut self, value: &Value, path: &str) -> Option<EndpointModel> {
        let obj = self.object(value, path)?;
        let open = |x: f64| (!(x > 0.0 && x < 1.0)).then_some("must lie strictly inside (0, 1)");
        match obj.get("model").and_then(Value::as_str) {
            Some("normal") => {
                let s = self.real(obj, path, "sigma0_sq", None, |x| {
                    (x <= 0.0).then_some("must be > 0")
                });
                Some(EndpointModel::Normal { sigma0_sq: s? })
            }
            Some("binary_two_arm") => {
                let t = self.real(obj, path, "rho_t", None, open);
                let c = self.real(obj, path, "rho_c", None, open);
                Some(EndpointModel::BinaryTwoArm {
                    rho_t: t?,
                    rho_c: c?,
                })
            }
            Some("time_to_event") => Some(EndpointModel::TimeToEvent),
            Some("single_arm_binary") => {
                let p = self.real(obj, path, "p", None, open);
                Some(EndpointModel::SingleArmBinary { p: p? })
            }
            Some(other) => {
                self.error(
                    &join(path, "model"),
                    format!("unknown endpoint model {other:?}; expected normal, binary_two_arm, time_to_event or single_arm_binary"),
                );
                None
            }
            None => {
                self.error(&join(path, "model"), "missing required field");
                None
            }
        }
    }

    fn simulation(&mut self, value: &Value, path: &str) -> Option<SimulationSpec> {
        let obj = self.object(value, path)?;
        let n = match obj.get("n") {
            None | Some(Value::Null) => Some(None),
            Some(_) => self.integer(obj, path, "n", None).map(Some),
        };
        let mu_path = join(path, "true_mu_delta");
        let true_mu_delta = match obj.get("true_mu_delta") {
            None | Some(Value::Null) => Some(vec![1.0, 0.0]),
            Some(Value::Number(x)) => x.as_f64().map(|x| vec![x]),
            Some(Value::Array(xs)) if !xs.is_empty() => {
                let vals: Option<Vec<f64>> = xs.iter().map(Value::as_f64).collect();
                if vals.is_none() {
                    self.error(&mu_path, "expected numbers");
                }
                vals
            }
            Some(_) => {
                self.error(
                    &mu_path,
                    "expected a number or a non-empty array of numbers",
                );
                None
            }
        };
        let replicates = self.integer(obj, path, "replicates", Some(10_000));
        if replicates == Some(0) {
            self.error(&join(path, "replicates"), "must be at least 1");
        }
        let seed = self.integer(obj, path, "seed", None);
        Some(SimulationSpec {
            n: n?,
            true_mu_delta: true_mu_delta?,
            replicates: replicates.filter(|&r| r > 0)?,
            seed: seed?,
        })
    }
}
