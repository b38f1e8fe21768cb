//! The motivating n-player coordination game: payoffs, brute-force Nash and
//! coalition-resilience checking, the closed-form collusion condition, and
//! the repeated-game discount-factor threshold solver.
//!
//! The one-shot game: everyone playing 0 pays `alpha` to each player;
//! exactly two players playing 1 pays `beta` to each of those two and zero
//! to the rest; every other profile pays zero to everyone. The all-zero
//! profile is a Nash equilibrium, but with `beta > alpha` a colluding pair
//! profits by deviating, which is what the resilience machinery quantifies.

use thiserror::Error;

/// Payoff structure of the coordination game.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinationGame {
    pub n: usize,
    /// Payoff to every player when all play 0.
    pub alpha: f64,
    /// Payoff to each of exactly two players playing 1.
    pub beta: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("the game needs more than one player, got {0}")]
    TooFewPlayers(usize),
    #[error("payoff `{0}` must be positive")]
    NonPositivePayoff(&'static str),
    #[error("profile has {got} actions but the game has {expected} players")]
    ProfileLengthMismatch { got: usize, expected: usize },
    #[error("coalition size {k} out of range for {n} players")]
    CoalitionSizeOutOfRange { k: usize, n: usize },
    #[error("{what} supports at most {max} players, got {n}")]
    TooLargeForSearch { what: &'static str, max: usize, n: usize },
}

impl CoordinationGame {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self, GameError> {
        if n <= 1 {
            return Err(GameError::TooFewPlayers(n));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(GameError::NonPositivePayoff("alpha"));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(GameError::NonPositivePayoff("beta"));
        }
        Ok(CoordinationGame { n, alpha, beta })
    }
}

/// A pure action profile: one bit per player, bit set means the player
/// plays 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Profile(pub u32);

impl Profile {
    pub fn from_actions(actions: &[u8]) -> Self {
        let mut bits = 0u32;
        for (i, &a) in actions.iter().enumerate() {
            if a != 0 {
                bits |= 1 << i;
            }
        }
        Profile(bits)
    }

    pub fn action(&self, player: usize) -> u8 {
        ((self.0 >> player) & 1) as u8
    }

    pub fn all_zero() -> Self {
        Profile(0)
    }
}

/// Payoff vector for a profile: `alpha` each on unanimous 0, `beta` to each
/// of exactly two 1-players, zero otherwise.
pub fn payoff(game: &CoordinationGame, profile: Profile) -> Vec<f64> {
    let ones = (profile.0 & ((1u32 << game.n) - 1)).count_ones();
    (0..game.n)
        .map(|i| {
            if ones == 0 {
                game.alpha
            } else if ones == 2 && profile.action(i) == 1 {
                game.beta
            } else {
                0.0
            }
        })
        .collect()
}

const NASH_MAX_PLAYERS: usize = 20;
const RESILIENCE_MAX_PLAYERS: usize = 12;

/// True iff no single player strictly gains by flipping their action.
pub fn is_nash(game: &CoordinationGame, profile: Profile) -> Result<bool, GameError> {
    if game.n > NASH_MAX_PLAYERS {
        return Err(GameError::TooLargeForSearch {
            what: "unilateral deviation check",
            max: NASH_MAX_PLAYERS,
            n: game.n,
        });
    }
    let base = payoff(game, profile);
    for (player, own) in base.iter().enumerate() {
        let flipped = Profile(profile.0 ^ (1 << player));
        if payoff(game, flipped)[player] > *own {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff no coalition of size at most `k` has a joint deviation that
/// strictly improves any member's payoff, with non-members held fixed.
pub fn is_k_resilient(game: &CoordinationGame, profile: Profile, k: usize) -> Result<bool, GameError> {
    if k < 1 || k > game.n {
        return Err(GameError::CoalitionSizeOutOfRange { k, n: game.n });
    }
    if game.n > RESILIENCE_MAX_PLAYERS {
        return Err(GameError::TooLargeForSearch {
            what: "coalition enumeration",
            max: RESILIENCE_MAX_PLAYERS,
            n: game.n,
        });
    }
    let base = payoff(game, profile);
    let full = 1u32 << game.n;
    for coalition in 1..full {
        let size = coalition.count_ones() as usize;
        if size > k {
            continue;
        }
        // Walk every joint reassignment of the coalition's bits.
        let mut sub = coalition;
        loop {
            let deviated = Profile((profile.0 & !coalition) | sub);
            if deviated != profile {
                let pay = payoff(game, deviated);
                for player in 0..game.n {
                    if coalition & (1 << player) != 0 && pay[player] > base[player] {
                        return Ok(false);
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & coalition;
        }
    }
    Ok(true)
}

/// Closed-form collusion condition: returns true (k-resilience ruled out)
/// iff `2*beta / k > alpha`.
pub fn resilience_ruled_out(alpha: f64, beta: f64, k: usize) -> bool {
    2.0 * beta / k as f64 > alpha
}

/// Comparison of the closed-form condition against exhaustive search for
/// one profile and coalition bound. The two can genuinely disagree (the
/// closed form spreads the pair payoff `2*beta` over the whole coalition),
/// so disagreements are surfaced, never reconciled silently.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResilienceCrossCheck {
    pub k: usize,
    pub ruled_out_by_condition: bool,
    pub exhaustively_resilient: bool,
}

impl ResilienceCrossCheck {
    /// The condition claims no k-resilient equilibrium exists, yet the
    /// search found this profile resilient.
    pub fn disagrees(&self) -> bool {
        self.ruled_out_by_condition && self.exhaustively_resilient
    }
}

pub fn resilience_cross_check(
    game: &CoordinationGame,
    profile: Profile,
    k: usize,
) -> Result<ResilienceCrossCheck, GameError> {
    Ok(ResilienceCrossCheck {
        k,
        ruled_out_by_condition: resilience_ruled_out(game.alpha, game.beta, k),
        exhaustively_resilient: is_k_resilient(game, profile, k)?,
    })
}

/// Discounted value of cooperating through a `t`-round punishment window:
/// `(1 - discount^(t+1)) / (1 - discount)`, i.e. `1 + discount + ... +
/// discount^t`. Near `discount = 1` the explicit sum is used for stability.
pub fn repeated_lhs(discount: f64, t: u64) -> f64 {
    if 1.0 - discount < 1e-6 {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for _ in 0..=t {
            sum += pow;
            pow *= discount;
        }
        sum
    } else {
        (1.0 - discount.powi(t as i32 + 1)) / (1.0 - discount)
    }
}

/// Smallest discount factor that makes cooperation hold against a size-`k`
/// coalition under a `t`-round punishment, or `Infeasible` when no
/// `discount < 1` does.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MinDiscount {
    Feasible(f64),
    Infeasible,
}

impl std::fmt::Display for MinDiscount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinDiscount::Feasible(d) => write!(f, "{d:.9}"),
            MinDiscount::Infeasible => f.write_str("Infeasible"),
        }
    }
}

/// Solves `repeated_lhs(discount, t) >= 2*beta / (alpha*k)` for the
/// infimum feasible discount by bisection to 1e-9. The left side spans
/// `[1, t+1)` over `discount in [0, 1)`: targets at most 1 need no
/// patience at all, targets at least `t+1` are unreachable.
pub fn min_discount(alpha: f64, beta: f64, k: usize, t: u64) -> MinDiscount {
    let target = 2.0 * beta / (alpha * k as f64);
    if target <= 1.0 {
        return MinDiscount::Feasible(0.0);
    }
    if target >= (t + 1) as f64 {
        return MinDiscount::Infeasible;
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if repeated_lhs(mid, t) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    MinDiscount::Feasible(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_game() -> CoordinationGame {
        CoordinationGame::new(3, 1.0, 2.0).unwrap()
    }

    #[test]
    fn unanimous_zero_pays_alpha_to_all() {
        let g = example_game();
        assert_eq!(payoff(&g, Profile::from_actions(&[0, 0, 0])), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn exactly_two_ones_pay_beta_to_the_pair() {
        let g = example_game();
        assert_eq!(payoff(&g, Profile::from_actions(&[1, 1, 0])), vec![2.0, 2.0, 0.0]);
    }

    #[test]
    fn any_other_profile_pays_zero() {
        let g = example_game();
        assert_eq!(payoff(&g, Profile::from_actions(&[1, 0, 0])), vec![0.0, 0.0, 0.0]);
        assert_eq!(payoff(&g, Profile::from_actions(&[1, 1, 1])), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn all_zero_is_nash() {
        let g = example_game();
        assert!(is_nash(&g, Profile::all_zero()).unwrap());
    }

    #[test]
    fn two_ones_is_also_nash() {
        // The third player flipping to 1 yields three ones (zero for all);
        // either 1-player flipping to 0 leaves a single one (zero for all).
        let g = example_game();
        assert!(is_nash(&g, Profile::from_actions(&[1, 1, 0])).unwrap());
    }

    #[test]
    fn single_one_is_not_nash() {
        let g = example_game();
        assert!(!is_nash(&g, Profile::from_actions(&[1, 0, 0])).unwrap());
    }

    #[test]
    fn one_resilience_reduces_to_nash() {
        for n in 2..=8usize {
            for (alpha, beta) in [(1.0, 2.0), (2.0, 1.0)] {
                let g = CoordinationGame::new(n, alpha, beta).unwrap();
                for bits in 0..(1u32 << n) {
                    let p = Profile(bits);
                    assert_eq!(
                        is_k_resilient(&g, p, 1).unwrap(),
                        is_nash(&g, p).unwrap(),
                        "n={n} alpha={alpha} beta={beta} profile {bits:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn pair_collusion_breaks_all_zero_when_beta_exceeds_alpha() {
        let g = example_game();
        assert!(!is_k_resilient(&g, Profile::all_zero(), 2).unwrap());
    }

    #[test]
    fn all_zero_survives_pairs_when_beta_is_small() {
        let g = CoordinationGame::new(3, 1.0, 0.5).unwrap();
        assert!(is_k_resilient(&g, Profile::all_zero(), 2).unwrap());
    }

    #[test]
    fn resilience_is_monotone_downward_in_k() {
        let g = CoordinationGame::new(5, 1.0, 2.0).unwrap();
        for bits in 0..32u32 {
            let p = Profile(bits);
            for k in 2..=5 {
                if is_k_resilient(&g, p, k).unwrap() {
                    assert!(is_k_resilient(&g, p, k - 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn coalition_size_bounds_are_enforced() {
        let g = example_game();
        assert!(is_k_resilient(&g, Profile::all_zero(), 0).is_err());
        assert!(is_k_resilient(&g, Profile::all_zero(), 4).is_err());
    }

    #[test]
    fn closed_form_condition_flips_at_the_expected_k() {
        assert!(resilience_ruled_out(1.0, 2.0, 3));
        assert!(!resilience_ruled_out(1.0, 2.0, 4));
        assert!(!resilience_ruled_out(10.0, 1.0, 1));
    }

    #[test]
    fn cross_check_surfaces_the_known_disagreement() {
        // At k=1 the closed form rules resilience out while the all-zero
        // profile is plainly Nash; the checker must report, not hide, this.
        let g = example_game();
        let cc = resilience_cross_check(&g, Profile::all_zero(), 1).unwrap();
        assert!(cc.disagrees());
        let cc = resilience_cross_check(&g, Profile::all_zero(), 2).unwrap();
        assert!(!cc.disagrees());
    }

    #[test]
    fn repeated_lhs_examples() {
        assert_eq!(repeated_lhs(0.3, 0), 1.0);
        assert!((repeated_lhs(0.5, 2) - 1.75).abs() < 1e-12);
        // Near the unit discount the sum tends to t+1.
        assert!((repeated_lhs(1.0 - 1e-9, 4) - 5.0).abs() < 1e-6);
    }

    #[test]
    fn min_discount_is_zero_when_the_target_is_trivial() {
        assert_eq!(min_discount(1.0, 2.0, 4, 3), MinDiscount::Feasible(0.0));
    }

    #[test]
    fn min_discount_matches_the_quadratic_root() {
        // Need 1 + x + x^2 >= 1.5; the positive root of x^2 + x - 0.5
        // is (sqrt(3) - 1) / 2.
        let expected = (3.0f64.sqrt() - 1.0) / 2.0;
        match min_discount(1.0, 3.0, 4, 2) {
            MinDiscount::Feasible(d) => assert!((d - expected).abs() < 1e-8),
            MinDiscount::Infeasible => panic!("should be feasible"),
        }
    }

    #[test]
    fn min_discount_reports_infeasible_targets() {
        // Need 1 + x >= 3, impossible for x < 1.
        assert_eq!(min_discount(1.0, 3.0, 2, 1), MinDiscount::Infeasible);
    }

    #[test]
    fn min_discount_is_monotone_in_patience_and_coalition_size() {
        let value = |m: MinDiscount| match m {
            MinDiscount::Feasible(d) => d,
            MinDiscount::Infeasible => 1.0,
        };
        let mut prev = 1.0;
        for t in 1..8 {
            let v = value(min_discount(1.0, 3.0, 2, t));
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        let mut prev = 1.0;
        for k in 1..8 {
            let v = value(min_discount(1.0, 3.0, k, 3));
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        let mut prev = 0.0;
        for beta in [0.5, 1.0, 2.0, 3.0] {
            let v = value(min_discount(1.0, beta, 2, 3));
            assert!(v >= prev - 1e-9);
            prev = v;
        }
    }
}
