//! Scenario files: a JSON document mapping 1:1 onto the simulation
//! configuration, plus optional sweep grids.
//!
//! ```json
//! {
//!   "params": { "k": 3, "discount": 0.9 },
//!   "mode": "discrete",
//!   "horizon": 40,
//!   "seed": 7,
//!   "roster": [
//!     { "id": "alice", "power": 0.6, "strategy": "honest" },
//!     { "id": "mallory", "power": 0.4, "strategy": "double_spend(l=10, eps=1.0)" }
//!   ],
//!   "sweep": { "epsilon": [0.5, 1.0, 1.5] },
//!   "seeds": 32
//! }
//! ```
//!
//! Every `params` field except `k` and `discount` has a default; strategy
//! strings are `honest`, `double_spend(l=…, eps=…)`, or `churn(period=…)`.

use crate::protocol::ProtocolParams;
use crate::sim::{RosterEntry, SimConfig, SimError, SimMode};
use crate::sweep::{SweepError, SweepSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: ProtocolParams,
    #[serde(default = "default_mode")]
    pub mode: SimMode,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    pub roster: Vec<RosterEntry>,
    /// Optional sweep grids keyed by parameter name
    /// (k, d, gamma0, delta, epsilon, attack_round).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<BTreeMap<String, Vec<f64>>>,
    /// Seeds per sweep grid point (default 32).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
}

fn default_mode() -> SimMode {
    SimMode::Discrete
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario does not parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Config(#[from] SimError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

impl Scenario {
    /// Parses and validates a scenario from JSON text.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.sim_config().validate()?;
        if let Some(grids) = &scenario.sweep {
            SweepSpec::from_named(grids, scenario.seeds)?;
        }
        Ok(scenario)
    }

    /// Loads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            mode: self.mode,
            horizon: self.horizon,
            seed: self.seed,
            params: self.params.clone(),
            roster: self.roster.clone(),
        }
    }

    pub fn sweep_spec(&self) -> Result<Option<SweepSpec>, SweepError> {
        match &self.sweep {
            Some(grids) => Ok(Some(SweepSpec::from_named(grids, self.seeds)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::StrategySpec;

    const MINIMAL: &str = r#"{
        "params": { "k": 3, "discount": 0.9 },
        "horizon": 40,
        "roster": [
            { "id": "alice", "power": 0.6, "strategy": "honest" },
            { "id": "mallory", "power": 0.4, "strategy": "double_spend(l=10, eps=1.0)" }
        ]
    }"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.mode, SimMode::Discrete);
        assert_eq!(s.seed, 0);
        assert_eq!(s.params.alpha, 1.0);
        assert_eq!(s.params.lambda, 1.0);
        assert_eq!(s.params.delta_t, 1.0);
        assert_eq!(s.params.decay_growth, 1.0);
        assert_eq!(
            s.roster[1].strategy,
            StrategySpec::DoubleSpend {
                attack_round: 10,
                epsilon: 1.0
            }
        );
    }

    #[test]
    fn missing_roster_names_the_field() {
        let text = r#"{ "params": { "k": 3, "discount": 0.9 }, "horizon": 40 }"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(err.to_string().contains("roster"), "got: {err}");
    }

    #[test]
    fn missing_discount_is_distinct_from_out_of_range() {
        let unset = r#"{ "params": { "k": 3 }, "horizon": 40,
            "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ] }"#;
        let err = Scenario::from_json(unset).unwrap_err();
        assert!(matches!(err, ScenarioError::Json(_)));
        assert!(err.to_string().contains("discount"), "got: {err}");

        let out_of_range = r#"{ "params": { "k": 3, "discount": 1.0 }, "horizon": 40,
            "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ] }"#;
        let err = Scenario::from_json(out_of_range).unwrap_err();
        assert!(matches!(err, ScenarioError::Config(_)));
        assert!(err.to_string().contains("out of range"), "got: {err}");
    }

    #[test]
    fn bad_strategy_string_fails_to_parse() {
        let text = r#"{ "params": { "k": 3, "discount": 0.9 }, "horizon": 40,
            "roster": [ { "id": "a", "power": 1.0, "strategy": "selfish" } ] }"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(err.to_string().contains("selfish"), "got: {err}");
    }

    #[test]
    fn unknown_sweep_parameter_is_rejected_at_load() {
        let text = r#"{ "params": { "k": 3, "discount": 0.9 }, "horizon": 40,
            "roster": [ { "id": "a", "power": 1.0, "strategy": "honest" } ],
            "sweep": { "nonsense": [1, 2] } }"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(matches!(err, ScenarioError::Sweep(SweepError::UnknownParameter(_))));
    }

    #[test]
    fn scenarios_round_trip_through_json() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(s, back);
    }
}
