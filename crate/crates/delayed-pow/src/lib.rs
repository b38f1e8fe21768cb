//! Discrete-event simulator and economic analyzer for timelock-and-slash
//! mining protocols.
//!
//! A `(k, d, gamma)` protocol timelocks block rewards for `k` rounds, makes
//! fresh identities grind through `d` units of startup work, and decays
//! locked rewards at a rate that grows as an identity drops out of mining.
//! Locked rewards act as stake: a verified fraud proof (two conflicting
//! transactions signed by the same key) slashes everything the signer has
//! in flight, optionally sharing a cut with the reporter.
//!
//! The crate provides:
//!
//! - [`protocol`]: parameter validation, miner records, the pending ledger;
//! - [`fraud`]: simulated signatures, double-spend detection, fraud proofs;
//! - [`reward`]: accrual, decay, maturity, slashing, dropout tracking;
//! - [`agents`]: honest, double-spend, and churn strategies;
//! - [`sim`]: the deterministic round engine and replayable event log;
//! - [`economics`]: closed-form utility and attack-cost calculators;
//! - [`game`]: the motivating coordination game and its resilience checks;
//! - [`scenario`]: JSON scenario files;
//! - [`sweep`]: seeded parameter sweeps, parallel behind the `parallel`
//!   feature (on by default) with a sequential fallback;
//! - [`output`]: event-log, CSV, and report writers.

pub mod agents;
pub mod economics;
pub mod fraud;
pub mod game;
pub mod output;
pub mod protocol;
pub mod reward;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use protocol::{MinerId, MinerRecord, MinerStatus, PendingReward, ProtocolParams};
pub use sim::{run, run_with_counterfactual, RunOutput, ScenarioOutcome, SimConfig, SimMode};
