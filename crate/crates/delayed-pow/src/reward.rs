//! The timelocked reward ledger: accrual, per-round decay, maturity
//! payouts, slashing on verified fraud proofs, and dropout tracking.
//!
//! Decay is accumulated per round (`sum of gamma_v(r) * delta_t` over the
//! locked interval) and applied once at settlement, so the nominal amount
//! stays frozen and conservation accounting stays exact. With a constant
//! rate the factor at maturity reduces to `exp(-gamma * delta_t * k)`.

use crate::fraud::{verify_fraud_proof, FraudProof, KeyRegistry};
use crate::protocol::{MinerId, MinerRecord, MinerStatus, PendingReward, ProtocolParams};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("miner `{0}` is not tracked by the ledger")]
    UnknownMiner(MinerId),
    #[error("cannot accrue a reward to `{id}` with status {status:?}")]
    AccrualToInactive { id: MinerId, status: MinerStatus },
    #[error("fraud proof against `{0}` does not verify")]
    InvalidProof(MinerId),
}

/// Running value-flow totals. Every unit of reward that ever enters the
/// ledger leaves through exactly one of: payout, reporter credit, burn, or
/// decay loss — or is still locked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConservationTally {
    /// Sum of nominal amounts ever accrued.
    pub accrued_nominal: f64,
    /// Sum of matured payouts.
    pub paid_out: f64,
    /// Sum of reporter credits from slashes.
    pub reporter_credits: f64,
    /// Sum of slashed value not credited to reporters.
    pub burned: f64,
    /// Nominal value destroyed by decay, realized at settlement.
    pub decay_loss: f64,
}

impl ConservationTally {
    /// Signed residual of the conservation identity given the nominal value
    /// still locked; zero (up to float error) when no value has leaked.
    pub fn residual(&self, outstanding_nominal: f64) -> f64 {
        self.accrued_nominal
            - (self.paid_out + self.reporter_credits + self.burned + self.decay_loss + outstanding_nominal)
    }
}

/// A matured payout, already credited to the owner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payout {
    pub owner: MinerId,
    pub nominal: f64,
    pub decay_factor: f64,
    pub amount: f64,
    pub created_round: u64,
}

/// Result of processing one fraud proof.
#[derive(Clone, Debug, PartialEq)]
pub struct SlashOutcome {
    /// Decay-adjusted value of everything removed.
    pub slashed_total: f64,
    pub reporter_credit: f64,
    pub burned: f64,
    /// The removed entries, in unlock order.
    pub entries: Vec<PendingReward>,
}

impl SlashOutcome {
    fn noop() -> Self {
        SlashOutcome {
            slashed_total: 0.0,
            reporter_credit: 0.0,
            burned: 0.0,
            entries: Vec::new(),
        }
    }
}

/// The ledger: every identity ever seen, keyed by id, plus flow totals.
#[derive(Clone, Debug, Default)]
pub struct Ledger {
    pub miners: BTreeMap<MinerId, MinerRecord>,
    pub tally: ConservationTally,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: MinerRecord) {
        self.miners.insert(record.id.clone(), record);
    }

    pub fn get(&self, id: &MinerId) -> Option<&MinerRecord> {
        self.miners.get(id)
    }

    pub fn get_mut(&mut self, id: &MinerId) -> Option<&mut MinerRecord> {
        self.miners.get_mut(id)
    }

    /// Nominal value of all locked entries.
    pub fn outstanding_nominal(&self) -> f64 {
        self.miners
            .values()
            .flat_map(|m| m.pending.iter())
            .map(|e| e.nominal)
            .sum()
    }

    /// Conservation residual; asserted near zero by the engine every round.
    pub fn conservation_residual(&self) -> f64 {
        self.tally.residual(self.outstanding_nominal())
    }

    /// Creates a locked entry for a block won this round. Only `Active`
    /// identities may accrue; the engine never requests otherwise.
    pub fn accrue_reward(
        &mut self,
        id: &MinerId,
        round: u64,
        params: &ProtocolParams,
    ) -> Result<&PendingReward, RewardError> {
        let miner = self
            .miners
            .get_mut(id)
            .ok_or_else(|| RewardError::UnknownMiner(id.clone()))?;
        if !miner.status.is_active() {
            return Err(RewardError::AccrualToInactive {
                id: id.clone(),
                status: miner.status.clone(),
            });
        }
        let nominal = params.alpha_at(round);
        let entry = PendingReward {
            owner: id.clone(),
            nominal,
            created_round: round,
            unlock_round: round + params.k,
            accrued_decay: 0.0,
        };
        debug_assert!(miner
            .pending
            .last()
            .is_none_or(|last| last.unlock_round <= entry.unlock_round));
        miner.pending.push(entry);
        self.tally.accrued_nominal += nominal;
        Ok(miner.pending.last().unwrap())
    }

    /// Adds one round of decay to every locked entry. An entry is charged
    /// for the rounds strictly after its creation up to and including its
    /// unlock round, which is exactly `k` charges at rate `gamma_v`.
    pub fn tick_decay(&mut self, round: u64, params: &ProtocolParams) {
        for miner in self.miners.values_mut() {
            if miner.pending.is_empty() {
                continue;
            }
            let step = params.gamma_for(miner.dropouts) * params.delta_t;
            if step == 0.0 {
                continue;
            }
            for entry in &mut miner.pending {
                if entry.created_round < round && round <= entry.unlock_round {
                    entry.accrued_decay += step;
                }
            }
        }
    }

    /// Pays out every entry whose unlock round has arrived. Call after
    /// [`Ledger::tick_decay`] for the same round. Payouts are returned in
    /// miner-id order, then unlock order.
    pub fn mature_rewards(&mut self, round: u64) -> Vec<Payout> {
        let mut payouts = Vec::new();
        for miner in self.miners.values_mut() {
            let mut kept = Vec::with_capacity(miner.pending.len());
            for entry in miner.pending.drain(..) {
                if entry.unlock_round <= round {
                    let decay_factor = (-entry.accrued_decay).exp();
                    let amount = entry.nominal * decay_factor;
                    miner.paid_balance += amount;
                    payouts.push(Payout {
                        owner: miner.id.clone(),
                        nominal: entry.nominal,
                        decay_factor,
                        amount,
                        created_round: entry.created_round,
                    });
                } else {
                    kept.push(entry);
                }
            }
            miner.pending = kept;
        }
        for p in &payouts {
            self.tally.paid_out += p.amount;
            self.tally.decay_loss += p.nominal - p.amount;
        }
        payouts
    }

    /// Processes a verified fraud proof: removes every locked entry of the
    /// accused (with a k-round lock these are exactly the most recent wins),
    /// credits the reporter their share, burns the rest, and blacklists the
    /// accused identity. Slashing an already-blacklisted identity is a no-op.
    ///
    /// The proof is re-verified; an invalid proof is an error because the
    /// caller was required to check it first.
    pub fn slash(
        &mut self,
        proof: &FraudProof,
        params: &ProtocolParams,
        registry: &KeyRegistry,
    ) -> Result<SlashOutcome, RewardError> {
        if !verify_fraud_proof(proof, registry) {
            return Err(RewardError::InvalidProof(proof.accused.clone()));
        }
        let accused = self
            .miners
            .get_mut(&proof.accused)
            .ok_or_else(|| RewardError::UnknownMiner(proof.accused.clone()))?;
        if accused.status == MinerStatus::Blacklisted {
            return Ok(SlashOutcome::noop());
        }
        let entries: Vec<PendingReward> = accused.pending.drain(..).collect();
        accused.status = MinerStatus::Blacklisted;

        let slashed_total: f64 = entries.iter().map(PendingReward::current_value).sum();
        let nominal_total: f64 = entries.iter().map(|e| e.nominal).sum();
        let reporter_credit = params.reporter_share * slashed_total;
        let burned = slashed_total - reporter_credit;

        if reporter_credit > 0.0 {
            if let Some(reporter) = self.miners.get_mut(&proof.reporter) {
                reporter.paid_balance += reporter_credit;
                self.tally.reporter_credits += reporter_credit;
            } else {
                // No ledger account to credit; the share is burned instead.
                self.tally.burned += reporter_credit;
            }
        }
        self.tally.burned += burned;
        self.tally.decay_loss += nominal_total - slashed_total;

        Ok(SlashOutcome {
            slashed_total,
            reporter_credit: if self.miners.contains_key(&proof.reporter) {
                reporter_credit
            } else {
                0.0
            },
            burned,
            entries,
        })
    }

    /// Increments the dropout count of every miner that holds locked
    /// rewards but was absent from the active set this round. Returns the
    /// affected ids with their new counts.
    pub fn update_participation(&mut self, active: &BTreeSet<MinerId>) -> Vec<(MinerId, u32)> {
        let mut dropped = Vec::new();
        for miner in self.miners.values_mut() {
            if !miner.pending.is_empty() && !active.contains(&miner.id) {
                miner.dropouts += 1;
                dropped.push((miner.id.clone(), miner.dropouts));
            }
        }
        dropped
    }
}
