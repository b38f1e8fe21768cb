//! Protocol parameters, miner identities, and the timelocked reward ledger.
//!
//! A `(k, d, gamma)` protocol timelocks every block reward for `k` rounds,
//! demands `d` units of startup work from each fresh identity, and decays
//! locked rewards at a per-round rate that grows with the owner's dropout
//! count. `(k, 0, 0)` is "legacy mode": a plain maturity delay with no decay
//! and no startup cost, which is how existing chains behave.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Opaque miner identity: the current public-key handle of a logical agent.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MinerId(pub String);

impl MinerId {
    pub fn new(s: impl Into<String>) -> Self {
        MinerId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MinerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MinerId {
    fn from(s: &str) -> Self {
        MinerId(s.to_string())
    }
}

/// Full parameter tuple for a delayed protocol run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Reward timelock length in rounds.
    pub k: u64,
    /// Aggregate startup proof-of-work units required per fresh identity.
    #[serde(default)]
    pub d: f64,
    /// Per-round base decay rate applied to locked rewards.
    #[serde(default)]
    pub gamma0: f64,
    /// Multiplicative growth of the decay rate per dropout:
    /// `gamma_v = gamma0 * decay_growth^dropouts`.
    #[serde(default = "one")]
    pub decay_growth: f64,
    /// Per-block reward (block subsidy plus fees, combined).
    #[serde(default = "one")]
    pub alpha: f64,
    /// Exponential decay rate of the reward schedule over rounds:
    /// `alpha(t) = alpha * exp(-alpha_decay * t)`. Zero means constant.
    #[serde(default)]
    pub alpha_decay: f64,
    /// Global block arrival rate.
    #[serde(default = "one")]
    pub lambda: f64,
    /// Discretization step length.
    #[serde(default = "one")]
    pub delta_t: f64,
    /// Per-round discount factor, strictly inside (0, 1).
    pub discount: f64,
    /// Fraction of slashed value credited to the reporter.
    #[serde(default)]
    pub reporter_share: f64,
    /// Per-round mining cost (uniform default; per-miner override allowed
    /// in the roster).
    #[serde(default)]
    pub mining_cost: f64,
}

fn one() -> f64 {
    1.0
}

/// Parameter validation failure; names the first violated field.
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("discount out of range: {0} (must lie strictly inside (0, 1))")]
    DiscountOutOfRange(f64),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("`{field}` must be positive, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("`{field}` must be nonnegative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("`{field}` must be finite, got {value}")]
    NotFinite { field: &'static str, value: f64 },
    #[error("reporter_share out of range: {0} (must lie in [0, 1])")]
    ReporterShareOutOfRange(f64),
    #[error("decay_growth must be at least 1, got {0}")]
    DecayGrowthBelowOne(f64),
}

impl ProtocolParams {
    /// Checks every parameter invariant, returning the validated params.
    ///
    /// `(k, 0, 0)` passes and is flagged legacy by [`ProtocolParams::is_legacy`].
    pub fn validate(self) -> Result<Self, ParamError> {
        let finite = |field: &'static str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::NotFinite { field, value })
            }
        };
        let positive = |field: &'static str, value: f64| {
            finite(field, value)?;
            if value > 0.0 {
                Ok(())
            } else {
                Err(ParamError::NotPositive { field, value })
            }
        };
        let nonneg = |field: &'static str, value: f64| {
            finite(field, value)?;
            if value >= 0.0 {
                Ok(())
            } else {
                Err(ParamError::Negative { field, value })
            }
        };

        nonneg("d", self.d)?;
        nonneg("gamma0", self.gamma0)?;
        finite("decay_growth", self.decay_growth)?;
        if self.decay_growth < 1.0 {
            return Err(ParamError::DecayGrowthBelowOne(self.decay_growth));
        }
        positive("alpha", self.alpha)?;
        nonneg("alpha_decay", self.alpha_decay)?;
        positive("lambda", self.lambda)?;
        positive("delta_t", self.delta_t)?;
        if !self.discount.is_finite() || self.discount <= 0.0 || self.discount >= 1.0 {
            return Err(ParamError::DiscountOutOfRange(self.discount));
        }
        finite("reporter_share", self.reporter_share)?;
        if !(0.0..=1.0).contains(&self.reporter_share) {
            return Err(ParamError::ReporterShareOutOfRange(self.reporter_share));
        }
        nonneg("mining_cost", self.mining_cost)?;
        Ok(self)
    }

    /// True for `(k, 0, 0)` configurations: a plain maturity delay with no
    /// decay and no startup work, mimicking existing protocols.
    pub fn is_legacy(&self) -> bool {
        self.d == 0.0 && self.gamma0 == 0.0
    }

    /// Reward available at round `t`: `alpha * exp(-alpha_decay * t)`.
    pub fn alpha_at(&self, round: u64) -> f64 {
        if self.alpha_decay == 0.0 {
            self.alpha
        } else {
            self.alpha * (-self.alpha_decay * round as f64).exp()
        }
    }

    /// Decay rate for an identity with the given dropout count:
    /// `gamma0 * decay_growth^dropouts`.
    pub fn gamma_for(&self, dropouts: u32) -> f64 {
        self.gamma0 * self.decay_growth.powi(dropouts as i32)
    }
}

/// A timelocked ledger entry awaiting maturity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingReward {
    pub owner: MinerId,
    /// Reward amount at creation, before decay.
    pub nominal: f64,
    pub created_round: u64,
    /// Always `created_round + k`.
    pub unlock_round: u64,
    /// Accumulated `gamma_v(r) * delta_t` over elapsed locked rounds.
    pub accrued_decay: f64,
}

impl PendingReward {
    /// Current decay-adjusted value: `nominal * exp(-accrued_decay)`.
    pub fn current_value(&self) -> f64 {
        self.nominal * (-self.accrued_decay).exp()
    }
}

/// Participation status of one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinerStatus {
    /// Eligible to mine.
    Active,
    /// Permanently banned after a verified fraud proof.
    Blacklisted,
    /// Fresh identity working through its startup proof of work;
    /// `remaining_rounds` counts down to activation.
    Restarting { remaining_rounds: u64 },
}

impl MinerStatus {
    pub fn is_active(&self) -> bool {
        matches!(self, MinerStatus::Active)
    }
}

/// Ledger-side record of one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinerRecord {
    pub id: MinerId,
    /// Share of aggregate power, in [0, 1]. Abandoned identities keep a
    /// record with power zero so their locked rewards keep decaying and
    /// maturing.
    pub power: f64,
    pub status: MinerStatus,
    /// Count of rounds this identity was absent while holding locked rewards.
    pub dropouts: u32,
    /// Locked entries, sorted by unlock round (nondecreasing).
    pub pending: Vec<PendingReward>,
    /// Matured payouts plus reporter credits received.
    pub paid_balance: f64,
    /// Prior identities of the same logical agent, oldest first.
    pub key_history: Vec<MinerId>,
}

impl MinerRecord {
    pub fn new(id: MinerId, power: f64) -> Self {
        MinerRecord {
            id,
            power,
            status: MinerStatus::Active,
            dropouts: 0,
            pending: Vec::new(),
            paid_balance: 0.0,
            key_history: Vec::new(),
        }
    }

    /// Decay-adjusted value of everything currently locked.
    pub fn pending_value(&self) -> f64 {
        self.pending.iter().map(PendingReward::current_value).sum()
    }
}

/// Power-vector validation failure.
#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("all miner powers are zero; at least one must be positive")]
    AllZero,
    #[error("miner `{id}` has negative power {power}")]
    Negative { id: MinerId, power: f64 },
    #[error("miner `{id}` has non-finite power {power}")]
    NotFinite { id: MinerId, power: f64 },
}

/// Rescales the power of every `Active` miner so the shares sum to one,
/// preserving relative ratios. Non-active records are left untouched.
pub fn normalize_powers(miners: &mut [MinerRecord]) -> Result<(), PowerError> {
    let mut total = 0.0;
    for m in miners.iter() {
        if !m.power.is_finite() {
            return Err(PowerError::NotFinite {
                id: m.id.clone(),
                power: m.power,
            });
        }
        if m.power < 0.0 {
            return Err(PowerError::Negative {
                id: m.id.clone(),
                power: m.power,
            });
        }
        if m.status.is_active() {
            total += m.power;
        }
    }
    if total <= 0.0 {
        return Err(PowerError::AllZero);
    }
    for m in miners.iter_mut() {
        if m.status.is_active() {
            m.power /= total;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> ProtocolParams {
        ProtocolParams {
            k: 3,
            d: 0.0,
            gamma0: 0.0,
            decay_growth: 1.0,
            alpha: 1.0,
            alpha_decay: 0.0,
            lambda: 1.0,
            delta_t: 1.0,
            discount: 0.9,
            reporter_share: 0.0,
            mining_cost: 0.0,
        }
    }

    #[test]
    fn bitcoin_like_params_validate_as_legacy() {
        let p = ProtocolParams {
            k: 100,
            discount: 0.99,
            ..base_params()
        }
        .validate()
        .unwrap();
        assert!(p.is_legacy());
    }

    #[test]
    fn instant_payout_params_validate_as_legacy() {
        let p = ProtocolParams { k: 0, ..base_params() }.validate().unwrap();
        assert!(p.is_legacy());
    }

    #[test]
    fn decayed_params_are_not_legacy() {
        let p = ProtocolParams {
            gamma0: 0.1,
            ..base_params()
        }
        .validate()
        .unwrap();
        assert!(!p.is_legacy());
    }

    #[test]
    fn discount_at_one_is_rejected() {
        let err = ProtocolParams {
            discount: 1.0,
            ..base_params()
        }
        .validate()
        .unwrap_err();
        assert_eq!(err, ParamError::DiscountOutOfRange(1.0));
    }

    #[test]
    fn discount_at_zero_is_rejected() {
        let err = ProtocolParams {
            discount: 0.0,
            ..base_params()
        }
        .validate()
        .unwrap_err();
        assert_eq!(err, ParamError::DiscountOutOfRange(0.0));
    }

    #[test]
    fn first_violated_field_is_named() {
        let err = ProtocolParams {
            lambda: 0.0,
            reporter_share: 2.0,
            ..base_params()
        }
        .validate()
        .unwrap_err();
        assert_eq!(
            err,
            ParamError::NotPositive {
                field: "lambda",
                value: 0.0
            }
        );
    }

    #[test]
    fn decay_growth_below_one_is_rejected() {
        let err = ProtocolParams {
            decay_growth: 0.5,
            ..base_params()
        }
        .validate()
        .unwrap_err();
        assert_eq!(err, ParamError::DecayGrowthBelowOne(0.5));
    }

    #[test]
    fn reward_schedule_decays_exponentially() {
        let p = ProtocolParams {
            alpha_decay: 0.1,
            ..base_params()
        };
        let expected = (-1.0f64).exp();
        assert!((p.alpha_at(10) - expected).abs() < 1e-15);
        assert_eq!(base_params().alpha_at(10), 1.0);
    }

    #[test]
    fn gamma_grows_with_dropouts() {
        let p = ProtocolParams {
            gamma0: 0.01,
            decay_growth: 2.0,
            ..base_params()
        };
        assert!((p.gamma_for(3) - 0.08).abs() < 1e-15);
        assert_eq!(p.gamma_for(0), 0.01);
    }

    fn roster(powers: &[f64]) -> Vec<MinerRecord> {
        powers
            .iter()
            .enumerate()
            .map(|(i, &p)| MinerRecord::new(MinerId::new(format!("m{i}")), p))
            .collect()
    }

    #[test]
    fn normalize_keeps_already_normalized_vector() {
        let mut m = roster(&[0.5, 0.5]);
        normalize_powers(&mut m).unwrap();
        assert_eq!(m[0].power, 0.5);
        assert_eq!(m[1].power, 0.5);
    }

    #[test]
    fn normalize_rescales_proportionally() {
        let mut m = roster(&[2.0, 1.0, 1.0]);
        normalize_powers(&mut m).unwrap();
        assert!((m[0].power - 0.5).abs() < 1e-12);
        assert!((m[1].power - 0.25).abs() < 1e-12);
        assert!((m[2].power - 0.25).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let mut m = roster(&[0.0, 0.0]);
        assert_eq!(normalize_powers(&mut m).unwrap_err(), PowerError::AllZero);
    }

    #[test]
    fn normalize_preserves_ratios() {
        let mut m = roster(&[3.0, 7.0, 11.0]);
        normalize_powers(&mut m).unwrap();
        let sum: f64 = m.iter().map(|r| r.power).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((m[1].power / m[0].power - 7.0 / 3.0).abs() < 1e-12);
        assert!((m[2].power / m[0].power - 11.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_skips_non_active_records() {
        let mut m = roster(&[1.0, 3.0]);
        m[1].status = MinerStatus::Blacklisted;
        normalize_powers(&mut m).unwrap();
        assert_eq!(m[0].power, 1.0);
        assert_eq!(m[1].power, 3.0);
    }

    #[test]
    fn pending_value_applies_decay() {
        let e = PendingReward {
            owner: MinerId::new("m"),
            nominal: 1.0,
            created_round: 1,
            unlock_round: 3,
            accrued_decay: 0.2,
        };
        assert!((e.current_value() - (-0.2f64).exp()).abs() < 1e-15);
    }
}
