//! The deterministic discrete-event engine.
//!
//! Each round runs a fixed pipeline: collect agent actions, select block
//! winners, accrue locked rewards, tick decay, process fraud reports and
//! slashes, pay maturities, track participation, then handle identity
//! churn and startup-work progress. Every random draw flows from the run
//! seed through named ChaCha substreams — stream 0 drives arrivals and
//! winner selection, stream `i + 1` belongs to roster slot `i` — so runs
//! replay byte-identically and adding a slot never perturbs another slot's
//! draws.
//!
//! Rounds are 1-indexed. A block won in round `i` unlocks in round `i + k`
//! and its payout is discounted by `discount^(k + i - 1)`, matching the
//! closed forms in [`crate::economics`].
//!
//! In `Discrete` mode exactly one block is won per round (when any miner is
//! active). In `Poisson` mode inter-arrival times are exponential with rate
//! `lambda` and arrivals are binned into rounds of length `delta_t`, so a
//! round can carry any number of wins.

use crate::agents::{Action, AgentStrategy, Observation, StrategySpec};
use crate::fraud::{sign_transaction, FraudProof, KeyRegistry, SecretSeed, Transaction};
use crate::protocol::{
    MinerId, MinerRecord, MinerStatus, ParamError, PowerError, ProtocolParams,
};
use crate::reward::{Ledger, RewardError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Reserved reporter identity used when no eligible miner can report a
/// fraud; it holds no ledger account, so the reporter share is burned.
pub const WATCHTOWER_ID: &str = "@watchtower";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// One winner per round.
    Discrete,
    /// Exponential inter-arrivals binned into rounds of length `delta_t`.
    Poisson,
}

/// One logical agent in the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    pub power: f64,
    pub strategy: StrategySpec,
    /// Per-miner override of `params.mining_cost`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mining_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mode: SimMode,
    /// Rounds for `Discrete` (must be a positive integer), total time for
    /// `Poisson`.
    pub horizon: f64,
    pub seed: u64,
    pub params: ProtocolParams,
    pub roster: Vec<RosterEntry>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("roster must not be empty")]
    EmptyRoster,
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("discrete-mode horizon must be a whole number of rounds, got {0}")]
    FractionalHorizon(f64),
    #[error("duplicate roster id `{0}`")]
    DuplicateRosterId(String),
    #[error("roster id `{0}` is reserved or contains reserved characters")]
    ReservedRosterId(String),
    #[error("power vector is not normalized (sums to {sum})")]
    UnnormalizedPowers { sum: f64 },
    #[error("startup work can never finish with power {power}")]
    StartupImpossible { power: f64 },
}

impl SimConfig {
    /// Validates parameters, horizon, and roster. Does not mutate powers;
    /// the engine normalizes its own copy at startup.
    pub fn validate(&self) -> Result<(), SimError> {
        self.params.clone().validate()?;
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(SimError::NonPositiveHorizon(self.horizon));
        }
        if self.mode == SimMode::Discrete && self.horizon.fract() != 0.0 {
            return Err(SimError::FractionalHorizon(self.horizon));
        }
        if self.roster.is_empty() {
            return Err(SimError::EmptyRoster);
        }
        let mut seen = BTreeSet::new();
        let mut any_positive = false;
        for entry in &self.roster {
            if entry.id.is_empty() || entry.id.contains('~') || entry.id.starts_with('@') {
                return Err(SimError::ReservedRosterId(entry.id.clone()));
            }
            if !seen.insert(entry.id.clone()) {
                return Err(SimError::DuplicateRosterId(entry.id.clone()));
            }
            if !entry.power.is_finite() {
                return Err(SimError::Power(PowerError::NotFinite {
                    id: MinerId::new(entry.id.clone()),
                    power: entry.power,
                }));
            }
            if entry.power < 0.0 {
                return Err(SimError::Power(PowerError::Negative {
                    id: MinerId::new(entry.id.clone()),
                    power: entry.power,
                }));
            }
            any_positive |= entry.power > 0.0;
        }
        if !any_positive {
            return Err(SimError::Power(PowerError::AllZero));
        }
        Ok(())
    }

    /// Number of ledger rounds the run covers.
    pub fn horizon_rounds(&self) -> u64 {
        match self.mode {
            SimMode::Discrete => self.horizon as u64,
            SimMode::Poisson => (self.horizon / self.params.delta_t).ceil() as u64,
        }
    }
}

/// Categorical draw over a normalized power vector; returns the index.
pub fn select_winner<R: Rng>(powers: &[f64], rng: &mut R) -> Result<usize, SimError> {
    let sum: f64 = powers.iter().sum();
    if powers.is_empty() || (sum - 1.0).abs() > 1e-9 || powers.iter().any(|p| *p < 0.0) {
        return Err(SimError::UnnormalizedPowers { sum });
    }
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in powers.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return Ok(i);
        }
    }
    Ok(powers.len() - 1)
}

/// Number of rounds a fresh identity needs to finish `d` units of startup
/// work: Bernoulli trials at per-round success probability
/// `q = min(1, p_v * lambda * delta_t)` until `ceil(d)` successes.
pub fn sample_startup_rounds<R: Rng>(
    d: f64,
    p_v: f64,
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<u64, SimError> {
    if d <= 0.0 {
        return Ok(0);
    }
    if p_v <= 0.0 {
        return Err(SimError::StartupImpossible { power: p_v });
    }
    let q = (p_v * params.lambda * params.delta_t).min(1.0);
    let needed = d.ceil() as u64;
    if q >= 1.0 {
        return Ok(needed);
    }
    let mut rounds = 0;
    let mut successes = 0;
    while successes < needed {
        rounds += 1;
        if rng.gen::<f64>() < q {
            successes += 1;
        }
    }
    Ok(rounds)
}

/// One log entry. Events are totally ordered by
/// `(time, round, kind rank, miner id)`, and the engine emits them in that
/// order. The round component only matters in Poisson mode, where one
/// round's settlement and the next round's actions share the bin-boundary
/// timestamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: f64,
    pub round: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SimEvent {
    /// Total-order key over the log.
    pub fn sort_key(&self) -> (f64, u64, u8, &MinerId) {
        (self.time, self.round, self.kind.rank(), self.kind.miner_key())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    DoubleSpendAttempted {
        miner: MinerId,
        epsilon: f64,
        tx_a: Transaction,
        tx_b: Transaction,
    },
    BlockWon {
        miner: MinerId,
    },
    RewardAccrued {
        miner: MinerId,
        nominal: f64,
        unlock_round: u64,
    },
    FraudReported {
        accused: MinerId,
        reporter: MinerId,
        round_submitted: u64,
        tx_a: Transaction,
        tx_b: Transaction,
    },
    Slashed {
        miner: MinerId,
        reporter: MinerId,
        slashed_total: f64,
        reporter_credit: f64,
        burned: f64,
    },
    RewardMatured {
        miner: MinerId,
        nominal: f64,
        decay_factor: f64,
        amount: f64,
    },
    Dropout {
        miner: MinerId,
        dropouts: u32,
    },
    StartupSolved {
        miner: MinerId,
    },
    IdentityChurned {
        agent: String,
        old_id: MinerId,
        new_id: MinerId,
        startup_rounds: u64,
    },
}

impl EventKind {
    /// Tie-break rank; mirrors the in-round pipeline order.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::DoubleSpendAttempted { .. } => 0,
            EventKind::BlockWon { .. } => 1,
            EventKind::RewardAccrued { .. } => 2,
            EventKind::FraudReported { .. } => 3,
            EventKind::Slashed { .. } => 4,
            EventKind::RewardMatured { .. } => 5,
            EventKind::Dropout { .. } => 6,
            EventKind::StartupSolved { .. } => 7,
            EventKind::IdentityChurned { .. } => 8,
        }
    }

    /// Primary miner id used as the final ordering component.
    pub fn miner_key(&self) -> &MinerId {
        match self {
            EventKind::DoubleSpendAttempted { miner, .. } => miner,
            EventKind::BlockWon { miner } => miner,
            EventKind::RewardAccrued { miner, .. } => miner,
            EventKind::FraudReported { accused, .. } => accused,
            EventKind::Slashed { miner, .. } => miner,
            EventKind::RewardMatured { miner, .. } => miner,
            EventKind::Dropout { miner, .. } => miner,
            EventKind::StartupSolved { miner } => miner,
            EventKind::IdentityChurned { old_id, .. } => old_id,
        }
    }
}

/// Serializes events as line-delimited JSON, one event per line, with the
/// canonical field order fixed by the struct definitions.
pub fn events_to_jsonl(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(event).expect("event serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn events_from_jsonl(text: &str) -> Result<Vec<SimEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Per-agent results aggregated over every identity the agent has used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: String,
    pub strategy: StrategySpec,
    /// Normalized nominal power share.
    pub power: f64,
    pub mining_cost: f64,
    /// Every identity used, oldest first; the last one is current.
    pub identities: Vec<MinerId>,
    /// Undiscounted payouts plus reporter credits received.
    pub paid_total: f64,
    /// Sum of `discount^(round-1) * amount` over payouts and credits.
    pub discounted_payoff: f64,
    /// Double-spend prizes, credited outside the ledger and undiscounted.
    pub external_balance: f64,
    /// Sum of matured payout amounts (excludes reporter credits).
    pub matured_total: f64,
    pub blocks_won: u64,
}

impl AgentSummary {
    /// Realized per-round utility over the run: matured value per
    /// payable round, pulled back through the timelock discount, minus the
    /// per-round cost. Comparable to [`crate::economics::per_round_utility`].
    pub fn realized_per_round_utility(&self, params: &ProtocolParams, horizon_rounds: u64) -> f64 {
        let payable = horizon_rounds.saturating_sub(params.k);
        if payable == 0 {
            return 0.0;
        }
        let disc_k = params.discount.powi(params.k as i32);
        disc_k * (self.matured_total / payable as f64 - self.mining_cost * params.delta_t)
    }
}

/// Complete, replayable result of one run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: SimConfig,
    pub events: Vec<SimEvent>,
    pub ledger: Ledger,
    pub agents: Vec<AgentSummary>,
    pub slashed_total: f64,
    pub horizon_rounds: u64,
}

struct AgentSlot {
    name: String,
    nominal_power: f64,
    mining_cost: f64,
    strategy: AgentStrategy,
    strategy_spec: StrategySpec,
    current_id: MinerId,
    seed: SecretSeed,
    generation: u32,
    rng: ChaCha8Rng,
    identities: Vec<MinerId>,
    paid_total: f64,
    discounted_payoff: f64,
    external_balance: f64,
    matured_total: f64,
    blocks_won: u64,
}

struct QueuedReport {
    due_round: u64,
    accused: MinerId,
    accused_slot: usize,
    tx_a: Transaction,
    tx_b: Transaction,
}

/// Runs one simulation to completion.
pub fn run(config: &SimConfig) -> Result<RunOutput, SimError> {
    config.validate()?;
    let params = config.params.clone().validate()?;
    let rounds = config.horizon_rounds();

    let mut registry = KeyRegistry::new();
    let mut ledger = Ledger::new();
    let total_power: f64 = config.roster.iter().map(|e| e.power).sum();

    let mut slots: Vec<AgentSlot> = Vec::with_capacity(config.roster.len());
    for (i, entry) in config.roster.iter().enumerate() {
        let id = MinerId::new(entry.id.clone());
        let seed = SecretSeed::derive(id.clone(), config.seed);
        registry.register(&seed);
        let power = entry.power / total_power;
        ledger.insert(MinerRecord::new(id.clone(), power));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64 + 1);
        slots.push(AgentSlot {
            name: entry.id.clone(),
            nominal_power: power,
            mining_cost: entry.mining_cost.unwrap_or(params.mining_cost),
            strategy: entry.strategy.instantiate(),
            strategy_spec: entry.strategy.clone(),
            current_id: id.clone(),
            seed,
            generation: 0,
            rng,
            identities: vec![id],
            paid_total: 0.0,
            discounted_payoff: 0.0,
            external_balance: 0.0,
            matured_total: 0.0,
            blocks_won: 0,
        });
    }

    let mut arrivals_rng = ChaCha8Rng::seed_from_u64(config.seed);
    arrivals_rng.set_stream(0);
    let exp = Exp::new(params.lambda).expect("lambda validated positive");
    let mut next_arrival = match config.mode {
        SimMode::Poisson => Some(exp.sample(&mut arrivals_rng)),
        SimMode::Discrete => None,
    };

    let mut events: Vec<SimEvent> = Vec::new();
    let mut queued_reports: Vec<QueuedReport> = Vec::new();
    let mut slashed_total = 0.0;

    // Owner-id -> slot lookup for crediting payouts; rebuilt on churn.
    let mut owner_of: BTreeMap<MinerId, usize> = slots
        .iter()
        .enumerate()
        .map(|(i, s)| (s.current_id.clone(), i))
        .collect();

    for round in 1..=rounds {
        let round_end = round as f64 * params.delta_t;
        let round_start = (round - 1) as f64 * params.delta_t;
        let discount_weight = params.discount.powi(round as i32 - 1);

        // 1. Collect actions in roster order.
        let mut mines: Vec<bool> = vec![false; slots.len()];
        let mut churners: Vec<usize> = Vec::new();
        let mut attacks: Vec<(usize, f64)> = Vec::new();
        for (i, slot) in slots.iter_mut().enumerate() {
            let record = ledger.get(&slot.current_id).expect("slot id tracked");
            let obs = Observation {
                round,
                status: record.status.clone(),
                pending_count: record.pending.len(),
                log: &events,
            };
            let action = slot.strategy.act(&obs);
            let eligible = record.status.is_active() && record.power > 0.0;
            match action {
                Action::MineHonest => mines[i] = eligible,
                Action::Idle => {}
                Action::ChurnIdentity => {
                    mines[i] = eligible;
                    if eligible {
                        churners.push(i);
                    }
                }
                Action::DoubleSpend { epsilon } => {
                    mines[i] = eligible;
                    if eligible {
                        attacks.push((i, epsilon));
                        churners.push(i);
                    }
                }
            }
        }
        attacks.sort_by(|a, b| slots[a.0].current_id.cmp(&slots[b.0].current_id));
        for &(i, epsilon) in &attacks {
            let slot = &mut slots[i];
            let outpoint = format!("{}:{}", slot.current_id, round);
            // Two spends of the same output with different amounts: the
            // canonical conflicting pair.
            let tx_a = sign_transaction(&slot.seed, &slot.current_id, &outpoint, 1.0)
                .expect("seed matches its own identity");
            let tx_b = sign_transaction(&slot.seed, &slot.current_id, &outpoint, 2.0)
                .expect("seed matches its own identity");
            slot.external_balance += epsilon;
            events.push(SimEvent {
                time: match config.mode {
                    SimMode::Discrete => round_end,
                    SimMode::Poisson => round_start,
                },
                round,
                kind: EventKind::DoubleSpendAttempted {
                    miner: slot.current_id.clone(),
                    epsilon,
                    tx_a: tx_a.clone(),
                    tx_b: tx_b.clone(),
                },
            });
            // The network notices the conflict now; the report lands next
            // round, the minimum causally consistent delay.
            queued_reports.push(QueuedReport {
                due_round: round + 1,
                accused: slot.current_id.clone(),
                accused_slot: i,
                tx_a,
                tx_b,
            });
        }

        // 2 + 3. Winner selection and reward accrual.
        let mining_slots: Vec<usize> = (0..slots.len()).filter(|&i| mines[i]).collect();
        let active_weight: f64 = mining_slots.iter().map(|&i| slots[i].nominal_power).sum();
        if active_weight > 0.0 {
            let weights: Vec<f64> = mining_slots
                .iter()
                .map(|&i| slots[i].nominal_power / active_weight)
                .collect();
            let record_win = |slot_idx: usize,
                                  time: f64,
                                  slots: &mut Vec<AgentSlot>,
                                  ledger: &mut Ledger,
                                  events: &mut Vec<SimEvent>|
             -> Result<(), SimError> {
                let winner = slots[slot_idx].current_id.clone();
                slots[slot_idx].blocks_won += 1;
                events.push(SimEvent {
                    time,
                    round,
                    kind: EventKind::BlockWon { miner: winner.clone() },
                });
                let entry = ledger.accrue_reward(&winner, round, &params)?;
                events.push(SimEvent {
                    time,
                    round,
                    kind: EventKind::RewardAccrued {
                        miner: winner,
                        nominal: entry.nominal,
                        unlock_round: entry.unlock_round,
                    },
                });
                Ok(())
            };
            match config.mode {
                SimMode::Discrete => {
                    let idx = select_winner(&weights, &mut arrivals_rng)?;
                    record_win(mining_slots[idx], round_end, &mut slots, &mut ledger, &mut events)?;
                }
                SimMode::Poisson => {
                    while let Some(t) = next_arrival {
                        if t > round_end || t > config.horizon {
                            break;
                        }
                        let idx = select_winner(&weights, &mut arrivals_rng)?;
                        record_win(mining_slots[idx], t, &mut slots, &mut ledger, &mut events)?;
                        next_arrival = Some(t + exp.sample(&mut arrivals_rng));
                    }
                }
            }
        } else if config.mode == SimMode::Poisson {
            // No one to attribute arrivals to; drop any that fall in this
            // round so the clock still advances.
            while let Some(t) = next_arrival {
                if t > round_end || t > config.horizon {
                    break;
                }
                next_arrival = Some(t + exp.sample(&mut arrivals_rng));
            }
        }

        // 4. Decay.
        ledger.tick_decay(round, &params);

        // 5. Fraud reports and slashes due this round.
        let mut due: Vec<QueuedReport> = Vec::new();
        let mut remaining: Vec<QueuedReport> = Vec::new();
        for report in queued_reports.drain(..) {
            if report.due_round == round {
                due.push(report);
            } else {
                remaining.push(report);
            }
        }
        queued_reports = remaining;
        due.sort_by(|a, b| a.accused.cmp(&b.accused));
        let mut proofs: Vec<FraudProof> = Vec::new();
        for report in &due {
            // Earliest active non-accused miner in id order reports; the
            // accused agent's own identities are excluded so it cannot
            // recoup its stake through the reporter share. With no eligible
            // miner, the watchtower observer reports and the share burns.
            let reporter = slots
                .iter()
                .enumerate()
                .filter(|(i, s)| {
                    *i != report.accused_slot
                        && s.nominal_power > 0.0
                        && ledger
                            .get(&s.current_id)
                            .is_some_and(|r| r.status.is_active())
                })
                .map(|(_, s)| s.current_id.clone())
                .min()
                .unwrap_or_else(|| MinerId::new(WATCHTOWER_ID));
            let proof = FraudProof {
                accused: report.accused.clone(),
                reporter,
                round_submitted: round,
                tx_a: report.tx_a.clone(),
                tx_b: report.tx_b.clone(),
            };
            events.push(SimEvent {
                time: round_end,
                round,
                kind: EventKind::FraudReported {
                    accused: proof.accused.clone(),
                    reporter: proof.reporter.clone(),
                    round_submitted: proof.round_submitted,
                    tx_a: proof.tx_a.clone(),
                    tx_b: proof.tx_b.clone(),
                },
            });
            proofs.push(proof);
        }
        for proof in &proofs {
            let outcome = ledger.slash(proof, &params, &registry)?;
            slashed_total += outcome.slashed_total;
            if outcome.reporter_credit > 0.0 {
                if let Some(&slot_idx) = owner_of.get(&proof.reporter) {
                    slots[slot_idx].paid_total += outcome.reporter_credit;
                    slots[slot_idx].discounted_payoff += discount_weight * outcome.reporter_credit;
                }
            }
            events.push(SimEvent {
                time: round_end,
                round,
                kind: EventKind::Slashed {
                    miner: proof.accused.clone(),
                    reporter: proof.reporter.clone(),
                    slashed_total: outcome.slashed_total,
                    reporter_credit: outcome.reporter_credit,
                    burned: outcome.burned,
                },
            });
        }

        // 6. Maturities.
        for payout in ledger.mature_rewards(round) {
            if let Some(&slot_idx) = owner_of.get(&payout.owner) {
                let slot = &mut slots[slot_idx];
                slot.paid_total += payout.amount;
                slot.matured_total += payout.amount;
                slot.discounted_payoff += discount_weight * payout.amount;
            }
            events.push(SimEvent {
                time: round_end,
                round,
                kind: EventKind::RewardMatured {
                    miner: payout.owner,
                    nominal: payout.nominal,
                    decay_factor: payout.decay_factor,
                    amount: payout.amount,
                },
            });
        }

        // 7. Participation tracking.
        let active_ids: BTreeSet<MinerId> = mining_slots
            .iter()
            .map(|&i| slots[i].current_id.clone())
            .collect();
        for (miner, dropouts) in ledger.update_participation(&active_ids) {
            events.push(SimEvent {
                time: round_end,
                round,
                kind: EventKind::Dropout { miner, dropouts },
            });
        }

        // 8. Startup progress first (fresh churns must not tick), then
        // identity rotation.
        let mut solved_order: Vec<usize> = (0..slots.len())
            .filter(|&i| {
                matches!(
                    ledger.get(&slots[i].current_id).map(|r| &r.status),
                    Some(MinerStatus::Restarting { .. })
                )
            })
            .collect();
        solved_order.sort_by(|&a, &b| slots[a].current_id.cmp(&slots[b].current_id));
        for i in solved_order {
            let id = slots[i].current_id.clone();
            let record = ledger.get_mut(&id).expect("restarting id tracked");
            if let MinerStatus::Restarting { remaining_rounds } = &mut record.status {
                *remaining_rounds -= 1;
                if *remaining_rounds == 0 {
                    record.status = MinerStatus::Active;
                    events.push(SimEvent {
                        time: round_end,
                        round,
                        kind: EventKind::StartupSolved { miner: id },
                    });
                }
            }
        }
        churners.sort_by(|&a, &b| slots[a].current_id.cmp(&slots[b].current_id));
        for i in churners {
            let slot = &mut slots[i];
            let old_id = slot.current_id.clone();
            slot.generation += 1;
            let new_id = MinerId::new(format!("{}~{}", slot.name, slot.generation));
            let new_seed = SecretSeed::derive(new_id.clone(), config.seed);
            registry.register(&new_seed);

            let startup_rounds = if params.d > 0.0 {
                sample_startup_rounds(params.d, slot.nominal_power, &params, &mut slot.rng)?
            } else {
                0
            };
            let mut record = MinerRecord::new(new_id.clone(), slot.nominal_power);
            record.status = if startup_rounds == 0 {
                MinerStatus::Active
            } else {
                MinerStatus::Restarting {
                    remaining_rounds: startup_rounds,
                }
            };
            record.key_history = slot.identities.clone();
            ledger.insert(record);

            // The abandoned identity keeps its record (and any locked
            // rewards, which keep decaying) but no longer mines.
            let old_record = ledger.get_mut(&old_id).expect("old id tracked");
            old_record.power = 0.0;

            owner_of.insert(new_id.clone(), i);
            slot.current_id = new_id.clone();
            slot.seed = new_seed;
            slot.identities.push(new_id.clone());
            events.push(SimEvent {
                time: round_end,
                round,
                kind: EventKind::IdentityChurned {
                    agent: slot.name.clone(),
                    old_id,
                    new_id,
                    startup_rounds,
                },
            });
        }

        debug_assert!(
            ledger.conservation_residual().abs() < 1e-6,
            "value leaked in round {round}: residual {}",
            ledger.conservation_residual()
        );
    }

    let agents = slots
        .into_iter()
        .map(|slot| AgentSummary {
            name: slot.name,
            strategy: slot.strategy_spec,
            power: slot.nominal_power,
            mining_cost: slot.mining_cost,
            identities: slot.identities,
            paid_total: slot.paid_total,
            discounted_payoff: slot.discounted_payoff,
            external_balance: slot.external_balance,
            matured_total: slot.matured_total,
            blocks_won: slot.blocks_won,
        })
        .collect();

    Ok(RunOutput {
        config: config.clone(),
        events,
        ledger,
        agents,
        slashed_total,
        horizon_rounds: rounds,
    })
}

/// Balances reconstructed purely from an event log: per-identity payouts
/// plus reporter credits, and per-identity external double-spend prizes.
pub fn replay_balances(events: &[SimEvent]) -> (BTreeMap<MinerId, f64>, BTreeMap<MinerId, f64>) {
    let mut paid: BTreeMap<MinerId, f64> = BTreeMap::new();
    let mut external: BTreeMap<MinerId, f64> = BTreeMap::new();
    for event in events {
        match &event.kind {
            EventKind::RewardMatured { miner, amount, .. } => {
                *paid.entry(miner.clone()).or_default() += amount;
            }
            EventKind::Slashed {
                reporter,
                reporter_credit,
                ..
            } => {
                if *reporter_credit > 0.0 {
                    *paid.entry(reporter.clone()).or_default() += reporter_credit;
                }
            }
            EventKind::DoubleSpendAttempted { miner, epsilon, .. } => {
                *external.entry(miner.clone()).or_default() += epsilon;
            }
            _ => {}
        }
    }
    (paid, external)
}

/// A run plus, when the roster contains a double spender, the matched-seed
/// counterfactual in which every attacker plays honest instead.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub main: RunOutput,
    pub counterfactual: Option<RunOutput>,
}

impl ScenarioOutcome {
    /// Attack advantage over honesty: external prizes plus discounted
    /// realized payoffs of the attacking agents, minus the same agents'
    /// discounted payoffs in the honest counterfactual.
    pub fn attacker_profit(&self) -> f64 {
        let Some(twin) = &self.counterfactual else {
            return 0.0;
        };
        self.main
            .agents
            .iter()
            .zip(&twin.agents)
            .filter(|(agent, _)| agent.strategy.is_attacker())
            .map(|(agent, twin_agent)| {
                agent.external_balance + agent.discounted_payoff - twin_agent.discounted_payoff
            })
            .sum()
    }

    /// Configured prize of the first attacking agent, zero without one.
    pub fn epsilon(&self) -> f64 {
        self.main
            .agents
            .iter()
            .find_map(|a| match a.strategy {
                StrategySpec::DoubleSpend { epsilon, .. } => Some(epsilon),
                _ => None,
            })
            .unwrap_or(0.0)
    }

    /// Mean realized per-round utility across honest-strategy agents.
    pub fn honest_mean_utility(&self) -> f64 {
        let honest: Vec<f64> = self
            .main
            .agents
            .iter()
            .filter(|a| a.strategy == StrategySpec::Honest)
            .map(|a| a.realized_per_round_utility(&self.main.config.params, self.main.horizon_rounds))
            .collect();
        if honest.is_empty() {
            0.0
        } else {
            honest.iter().sum::<f64>() / honest.len() as f64
        }
    }
}

/// Runs the scenario, and when any roster entry is a double spender also
/// runs the honest counterfactual under the same seed.
pub fn run_with_counterfactual(config: &SimConfig) -> Result<ScenarioOutcome, SimError> {
    let main = run(config)?;
    let counterfactual = if config.roster.iter().any(|e| e.strategy.is_attacker()) {
        let mut twin = config.clone();
        for entry in &mut twin.roster {
            if entry.strategy.is_attacker() {
                entry.strategy = StrategySpec::Honest;
            }
        }
        Some(run(&twin)?)
    } else {
        None
    };
    Ok(ScenarioOutcome { main, counterfactual })
}
