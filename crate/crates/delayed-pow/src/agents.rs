//! Agent strategies and the actions they can take.
//!
//! Three canonical strategies cover the threat model: always-honest mining,
//! a one-shot double spender that rotates to a clean identity, and a
//! periodic identity churner. Strategies are pure functions of the round
//! observation and their own fixed parameters, so runs replay exactly.

use crate::protocol::MinerStatus;
use crate::sim::SimEvent;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// One action per agent per round.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    MineHonest,
    /// Broadcast a conflicting transaction pair worth an external prize of
    /// `epsilon`, then shift power to a fresh identity at the end of the
    /// round. The burned identity still mines this round; its locked
    /// rewards are what the subsequent slash removes.
    DoubleSpend { epsilon: f64 },
    /// Mine this round, then rotate to a fresh identity at the end of it.
    ChurnIdentity,
    /// Sit the round out.
    Idle,
}

/// What an agent sees when choosing an action: the public event log up to
/// the previous round, plus its own ledger-side state. Other miners'
/// pending balances are not exposed directly.
#[derive(Clone, Debug)]
pub struct Observation<'a> {
    pub round: u64,
    pub status: MinerStatus,
    pub pending_count: usize,
    pub log: &'a [SimEvent],
}

/// Declarative strategy configuration, parsed from the scenario roster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategySpec {
    Honest,
    DoubleSpend { attack_round: u64, epsilon: f64 },
    Churn { period: u64 },
}

impl StrategySpec {
    pub fn is_attacker(&self) -> bool {
        matches!(self, StrategySpec::DoubleSpend { .. })
    }

    /// Instantiates the per-run mutable state for this strategy.
    pub fn instantiate(&self) -> AgentStrategy {
        match *self {
            StrategySpec::Honest => AgentStrategy::Honest,
            StrategySpec::DoubleSpend { attack_round, epsilon } => AgentStrategy::DoubleSpender {
                attack_round,
                epsilon,
                attacked: false,
            },
            StrategySpec::Churn { period } => AgentStrategy::Churner { period },
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StrategyParseError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("strategy `{strategy}` is missing argument `{arg}`")]
    MissingArgument { strategy: &'static str, arg: &'static str },
    #[error("strategy `{strategy}` got unknown argument `{arg}`")]
    UnknownArgument { strategy: &'static str, arg: String },
    #[error("could not parse `{value}` for argument `{arg}`")]
    BadValue { arg: String, value: String },
    #[error("strategy `{strategy}` argument `{arg}` must be at least 1")]
    ArgumentTooSmall { strategy: &'static str, arg: &'static str },
    #[error("double_spend epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("malformed strategy spec `{0}`")]
    Malformed(String),
}

fn parse_args(body: &str) -> Result<Vec<(String, String)>, StrategyParseError> {
    let mut out = Vec::new();
    for piece in body.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (key, value) = piece
            .split_once('=')
            .ok_or_else(|| StrategyParseError::Malformed(piece.to_string()))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl std::str::FromStr for StrategySpec {
    type Err = StrategyParseError;

    /// Accepts `honest`, `double_spend(l=…, eps=…)`, and `churn(period=…)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, body) = match s.split_once('(') {
            Some((name, rest)) => {
                let body = rest
                    .strip_suffix(')')
                    .ok_or_else(|| StrategyParseError::Malformed(s.to_string()))?;
                (name.trim(), Some(body))
            }
            None => (s, None),
        };
        match name {
            "honest" => {
                if body.is_none_or(|b| b.trim().is_empty()) {
                    Ok(StrategySpec::Honest)
                } else {
                    Err(StrategyParseError::Malformed(s.to_string()))
                }
            }
            "double_spend" => {
                let mut l = None;
                let mut eps = None;
                for (key, value) in parse_args(body.unwrap_or(""))? {
                    match key.as_str() {
                        "l" => {
                            l = Some(value.parse::<u64>().map_err(|_| StrategyParseError::BadValue {
                                arg: key.clone(),
                                value: value.clone(),
                            })?)
                        }
                        "eps" => {
                            eps = Some(value.parse::<f64>().map_err(|_| StrategyParseError::BadValue {
                                arg: key.clone(),
                                value: value.clone(),
                            })?)
                        }
                        _ => {
                            return Err(StrategyParseError::UnknownArgument {
                                strategy: "double_spend",
                                arg: key,
                            })
                        }
                    }
                }
                let attack_round = l.ok_or(StrategyParseError::MissingArgument {
                    strategy: "double_spend",
                    arg: "l",
                })?;
                let epsilon = eps.ok_or(StrategyParseError::MissingArgument {
                    strategy: "double_spend",
                    arg: "eps",
                })?;
                if attack_round < 1 {
                    return Err(StrategyParseError::ArgumentTooSmall {
                        strategy: "double_spend",
                        arg: "l",
                    });
                }
                if !epsilon.is_finite() || epsilon <= 0.0 {
                    return Err(StrategyParseError::NonPositiveEpsilon(epsilon));
                }
                Ok(StrategySpec::DoubleSpend { attack_round, epsilon })
            }
            "churn" => {
                let mut period = None;
                for (key, value) in parse_args(body.unwrap_or(""))? {
                    match key.as_str() {
                        "period" => {
                            period =
                                Some(value.parse::<u64>().map_err(|_| StrategyParseError::BadValue {
                                    arg: key.clone(),
                                    value: value.clone(),
                                })?)
                        }
                        _ => {
                            return Err(StrategyParseError::UnknownArgument {
                                strategy: "churn",
                                arg: key,
                            })
                        }
                    }
                }
                let period = period.ok_or(StrategyParseError::MissingArgument {
                    strategy: "churn",
                    arg: "period",
                })?;
                if period < 1 {
                    return Err(StrategyParseError::ArgumentTooSmall {
                        strategy: "churn",
                        arg: "period",
                    });
                }
                Ok(StrategySpec::Churn { period })
            }
            other => Err(StrategyParseError::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Honest => f.write_str("honest"),
            StrategySpec::DoubleSpend { attack_round, epsilon } => {
                write!(f, "double_spend(l={attack_round}, eps={epsilon})")
            }
            StrategySpec::Churn { period } => write!(f, "churn(period={period})"),
        }
    }
}

impl TryFrom<String> for StrategySpec {
    type Error = StrategyParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StrategySpec> for String {
    fn from(s: StrategySpec) -> String {
        s.to_string()
    }
}

/// Per-run strategy state.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentStrategy {
    Honest,
    DoubleSpender {
        attack_round: u64,
        epsilon: f64,
        attacked: bool,
    },
    Churner {
        period: u64,
    },
}

impl AgentStrategy {
    pub fn act(&mut self, obs: &Observation) -> Action {
        match self {
            AgentStrategy::Honest => Action::MineHonest,
            AgentStrategy::DoubleSpender {
                attack_round,
                epsilon,
                attacked,
            } => {
                if !*attacked && obs.round == *attack_round && obs.status.is_active() {
                    *attacked = true;
                    Action::DoubleSpend { epsilon: *epsilon }
                } else {
                    Action::MineHonest
                }
            }
            AgentStrategy::Churner { period } => {
                if obs.status.is_active() && obs.round.is_multiple_of(*period) {
                    Action::ChurnIdentity
                } else {
                    Action::MineHonest
                }
            }
        }
    }
}
