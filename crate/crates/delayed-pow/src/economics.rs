//! Closed-form utility and attack-profitability calculators.
//!
//! These are the analytic counterparts of the simulator: per-round expected
//! utility under a `k`-round timelock with decay, the cumulative payoff of
//! sustained honest mining, the discounted value an attacker forfeits when
//! slashed (with and without startup work on the replacement identity), and
//! the coarse big-O magnitude of that cost. Rounds are 1-indexed: a block
//! won in round `i` pays out `k` rounds later and is discounted by
//! `discount^(k + i - 1)`.

use crate::protocol::ProtocolParams;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error("attack round {l} must exceed the timelock k = {k}")]
    AttackWindowTooShort { l: u64, k: u64 },
    #[error("success probability {0} must lie in (0, 1]")]
    InvalidSuccessProbability(f64),
}

/// Decay factor a reward carries at maturity: `exp(-gamma0 * delta_t * k)`.
fn maturity_factor(params: &ProtocolParams) -> f64 {
    (-(params.gamma0 * params.delta_t * params.k as f64)).exp()
}

/// Expected per-block reward flow per unit time, after decay:
/// `alpha(t) * exp(-gamma0 * delta_t * k) * p_v * lambda`.
fn reward_rate(params: &ProtocolParams, p_v: f64, t: u64) -> f64 {
    params.alpha_at(t) * maturity_factor(params) * p_v * params.lambda
}

/// Expected utility of one round of mining at time `t`:
/// `discount^k * delta_t * (alpha(t) * exp(-gamma0*delta_t*k) * p_v * lambda - c_v)`.
pub fn per_round_utility(params: &ProtocolParams, p_v: f64, c_v: f64, t: u64) -> f64 {
    params.discount.powi(params.k as i32) * params.delta_t * (reward_rate(params, p_v, t) - c_v)
}

/// Cumulative discounted payoff of mining honestly for rounds `1..=l`
/// with constant reward and no cost:
/// `sum_{i=1..l} discount^(k+i-1) * alpha * exp(-gamma0*delta_t*k) * p_v * lambda`,
/// evaluated in closed form as `discount^k * (1 - discount^l) / (1 - discount)`
/// times the reward rate.
pub fn honest_cumulative(params: &ProtocolParams, p_v: f64, l: u64) -> f64 {
    let delta = params.discount;
    let geometric = delta.powi(params.k as i32) * (1.0 - delta.powi(l as i32)) / (1.0 - delta);
    geometric * reward_rate(params, p_v, 0)
}

/// Discounted expected value of the `k` payouts a slash removes after a
/// deviation in round `l`: `sum_{i=l-k+1..=l} discount^(k+i-1)` times the
/// reward rate. An attack with prize `epsilon >=` this value is profitable.
pub fn value_at_risk(params: &ProtocolParams, p_v: f64, l: u64) -> Result<f64, EconError> {
    value_at_risk_with_startup(params, p_v, l, 0)
}

/// Value at risk extended by `r` startup rounds the replacement identity
/// spends unable to mine: `sum_{i=l-k+1..=l+r} discount^(k+i-1)` times the
/// reward rate. Reduces to [`value_at_risk`] at `r = 0`.
pub fn value_at_risk_with_startup(
    params: &ProtocolParams,
    p_v: f64,
    l: u64,
    r: u64,
) -> Result<f64, EconError> {
    if l <= params.k {
        return Err(EconError::AttackWindowTooShort { l, k: params.k });
    }
    let delta = params.discount;
    // sum of delta^(k+i-1) over i = l-k+1 ..= l+r, i.e. exponents l .. l+k+r-1
    let terms = params.k + r;
    let geometric = delta.powi(l as i32) * (1.0 - delta.powi(terms as i32)) / (1.0 - delta);
    Ok(geometric * reward_rate(params, p_v, 0))
}

/// Coarse upper-envelope magnitude of the attack cost:
/// `(k + r) * alpha * discount^k * exp(-gamma0*delta_t*k) * lambda`.
/// A sweep-dashboard heuristic, not an exact threshold; the power fraction
/// is deliberately dropped, so this bounds the exact sum from above.
pub fn attack_cost_magnitude(params: &ProtocolParams, r: u64) -> f64 {
    (params.k + r) as f64
        * params.alpha
        * params.discount.powi(params.k as i32)
        * maturity_factor(params)
        * params.lambda
}

/// Expected number of rounds to finish `d` units of startup work at
/// per-round success probability `q`: `ceil(d) / q`.
pub fn expected_startup_rounds(d: f64, q: f64) -> Result<f64, EconError> {
    if d == 0.0 {
        return Ok(0.0);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(EconError::InvalidSuccessProbability(q));
    }
    Ok(d.ceil() / q)
}
