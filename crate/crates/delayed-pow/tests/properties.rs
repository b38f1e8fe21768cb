//! Property tests for the engine-wide invariants: value conservation,
//! log replay, event ordering, decay monotonicity, and power
//! normalization, across randomized scenarios.

use delayed_pow::agents::StrategySpec;
use delayed_pow::protocol::{normalize_powers, MinerId, MinerRecord, ProtocolParams};
use delayed_pow::reward::Ledger;
use delayed_pow::sim::{replay_balances, run, RosterEntry, SimConfig, SimMode};
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = ProtocolParams> {
    (
        0u64..8,
        prop_oneof![Just(0.0), 0.5f64..6.0],
        prop_oneof![Just(0.0), 0.001f64..0.1],
        1.0f64..2.0,
        0.1f64..3.0,
        0.05f64..0.99,
        0.0f64..1.0,
    )
        .prop_map(
            |(k, d, gamma0, decay_growth, alpha, discount, reporter_share)| ProtocolParams {
                k,
                d,
                gamma0,
                decay_growth,
                alpha,
                alpha_decay: 0.0,
                lambda: 1.0,
                delta_t: 1.0,
                discount,
                reporter_share,
                mining_cost: 0.0,
            },
        )
}

fn arb_strategy() -> impl Strategy<Value = StrategySpec> {
    prop_oneof![
        3 => Just(StrategySpec::Honest),
        1 => (5u64..40, 0.1f64..3.0).prop_map(|(l, eps)| StrategySpec::DoubleSpend {
            attack_round: l,
            epsilon: eps
        }),
        1 => (3u64..25).prop_map(|period| StrategySpec::Churn { period }),
    ]
}

fn arb_config() -> impl Strategy<Value = SimConfig> {
    (
        arb_params(),
        prop::collection::vec((0.1f64..5.0, arb_strategy()), 1..4),
        50u64..120,
        any::<u64>(),
        prop::bool::ANY,
    )
        .prop_map(|(params, roster, horizon, seed, poisson)| SimConfig {
            mode: if poisson { SimMode::Poisson } else { SimMode::Discrete },
            horizon: horizon as f64,
            seed,
            params,
            roster: roster
                .into_iter()
                .enumerate()
                .map(|(i, (power, strategy))| RosterEntry {
                    id: format!("m{i}"),
                    power,
                    strategy,
                    mining_cost: None,
                })
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// No value appears or vanishes outside accrual, decay, payout, and
    /// slash: the flow tally closes to within float noise.
    #[test]
    fn conservation_holds_for_random_scenarios(config in arb_config()) {
        let out = run(&config).unwrap();
        let residual = out.ledger.conservation_residual();
        let scale = out.ledger.tally.accrued_nominal.max(1.0);
        prop_assert!(residual.abs() <= 1e-9 * scale, "residual {residual}");
    }

    /// Reconstructing balances purely from the event log reproduces the
    /// final ledger exactly.
    #[test]
    fn replay_matches_final_state(config in arb_config()) {
        let out = run(&config).unwrap();
        let (paid, external) = replay_balances(&out.events);
        for (id, record) in &out.ledger.miners {
            let replayed = paid.get(id).copied().unwrap_or(0.0);
            prop_assert_eq!(replayed, record.paid_balance, "paid mismatch for {}", id);
        }
        let replayed_external: f64 = external.values().sum();
        let actual: f64 = out.agents.iter().map(|a| a.external_balance).sum();
        prop_assert_eq!(replayed_external, actual);
    }

    /// The log is totally ordered by (time, round, kind rank, miner id).
    #[test]
    fn event_log_is_totally_ordered(config in arb_config()) {
        let out = run(&config).unwrap();
        for pair in out.events.windows(2) {
            prop_assert!(
                pair[0].sort_key() <= pair[1].sort_key(),
                "out of order: {:?} then {:?}",
                pair[0],
                pair[1]
            );
        }
    }

    /// Pending collections stay sorted by unlock round and blacklisted
    /// identities never hold pending rewards at the end of a run.
    #[test]
    fn ledger_structural_invariants(config in arb_config()) {
        let out = run(&config).unwrap();
        for record in out.ledger.miners.values() {
            prop_assert!(record
                .pending
                .windows(2)
                .all(|w| w[0].unlock_round <= w[1].unlock_round));
            if record.status == delayed_pow::protocol::MinerStatus::Blacklisted {
                prop_assert!(record.pending.is_empty());
            }
            for entry in &record.pending {
                prop_assert_eq!(entry.unlock_round - entry.created_round, config.params.k);
                prop_assert!(entry.accrued_decay >= 0.0);
            }
        }
    }

    /// With constant decay the payout factor exp(-gamma * dt * k) is
    /// nonincreasing in k and in gamma0, and decreasing in dropouts once
    /// the growth factor exceeds one.
    #[test]
    fn payout_factor_is_monotone(
        k in 1u64..12,
        gamma0 in 0.001f64..0.2,
        growth in 1.0f64..2.0,
        dropouts in 0u32..6,
    ) {
        let factor = |k: u64, gamma0: f64, dropouts: u32| -> f64 {
            let params = ProtocolParams {
                k,
                d: 0.0,
                gamma0,
                decay_growth: growth,
                alpha: 1.0,
                alpha_decay: 0.0,
                lambda: 1.0,
                delta_t: 1.0,
                discount: 0.9,
                reporter_share: 0.0,
                mining_cost: 0.0,
            };
            let mut ledger = Ledger::new();
            let id = MinerId::new("m");
            let mut record = MinerRecord::new(id.clone(), 1.0);
            record.dropouts = dropouts;
            ledger.insert(record);
            ledger.accrue_reward(&id, 1, &params).unwrap();
            for round in 2..=(1 + k) {
                ledger.tick_decay(round, &params);
            }
            let payouts = ledger.mature_rewards(1 + k);
            payouts[0].decay_factor
        };
        let base = factor(k, gamma0, dropouts);
        prop_assert!(factor(k + 1, gamma0, dropouts) <= base + 1e-15);
        prop_assert!(factor(k, gamma0 * 1.5, dropouts) <= base + 1e-15);
        if growth > 1.0 {
            prop_assert!(factor(k, gamma0, dropouts + 1) < base);
        }
    }

    /// Normalization rescales to unit sum while preserving ratios.
    #[test]
    fn normalization_preserves_ratios(powers in prop::collection::vec(0.01f64..100.0, 1..8)) {
        let mut miners: Vec<MinerRecord> = powers
            .iter()
            .enumerate()
            .map(|(i, &p)| MinerRecord::new(MinerId::new(format!("m{i}")), p))
            .collect();
        normalize_powers(&mut miners).unwrap();
        let sum: f64 = miners.iter().map(|m| m.power).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        for (i, &original) in powers.iter().enumerate() {
            let expected = original / powers.iter().sum::<f64>();
            prop_assert!((miners[i].power - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }
}
