//! Run outputs: the line-delimited event log, the fixed-schema CSV summary,
//! and the human-readable report.

use crate::economics;
use crate::sim::{events_to_jsonl, ScenarioOutcome, SimMode};
use std::fs;
use std::io;
use std::path::Path;

/// Column order of `summary.csv`; pinned by tests.
pub const SUMMARY_HEADER: &str =
    "seed,k,d,gamma0,delta,epsilon,attacker_profit,honest_mean_utility,slashed_total";

/// One `summary.csv` row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub seed: u64,
    pub k: u64,
    pub d: f64,
    pub gamma0: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub attacker_profit: f64,
    pub honest_mean_utility: f64,
    pub slashed_total: f64,
}

impl SummaryRow {
    pub fn from_outcome(outcome: &ScenarioOutcome) -> Self {
        let config = &outcome.main.config;
        SummaryRow {
            seed: config.seed,
            k: config.params.k,
            d: config.params.d,
            gamma0: config.params.gamma0,
            delta: config.params.discount,
            epsilon: outcome.epsilon(),
            attacker_profit: outcome.attacker_profit(),
            honest_mean_utility: outcome.honest_mean_utility(),
            slashed_total: outcome.main.slashed_total,
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.k,
            self.d,
            self.gamma0,
            self.delta,
            self.epsilon,
            self.attacker_profit,
            self.honest_mean_utility,
            self.slashed_total
        )
    }
}

/// Renders the per-run report: realized vs predicted honest utility and,
/// when an attacker is configured, the attack economics.
pub fn render_report(outcome: &ScenarioOutcome) -> String {
    let run = &outcome.main;
    let config = &run.config;
    let params = &config.params;
    let mut out = String::new();

    out.push_str("run report\n");
    out.push_str(&format!(
        "  mode: {}, horizon: {} ({} rounds), seed: {}\n",
        match config.mode {
            SimMode::Discrete => "discrete",
            SimMode::Poisson => "poisson",
        },
        config.horizon,
        run.horizon_rounds,
        config.seed
    ));
    out.push_str(&format!(
        "  params: k={} d={} gamma0={} decay_growth={} alpha={} lambda={} delta_t={} discount={} reporter_share={}\n",
        params.k,
        params.d,
        params.gamma0,
        params.decay_growth,
        params.alpha,
        params.lambda,
        params.delta_t,
        params.discount,
        params.reporter_share
    ));
    if params.is_legacy() {
        out.push_str("  legacy mode: plain maturity delay, no decay, no startup work\n");
    }

    out.push_str("\nper-agent results\n");
    for agent in &run.agents {
        let realized = agent.realized_per_round_utility(params, run.horizon_rounds);
        let predicted = economics::per_round_utility(params, agent.power, agent.mining_cost, 0);
        let rel = if predicted != 0.0 {
            (realized - predicted).abs() / predicted.abs()
        } else {
            realized.abs()
        };
        out.push_str(&format!(
            "  {} [{}] power={:.6} blocks={} paid={:.6} discounted={:.6} per-round utility: realized={:.6} predicted={:.6} rel_err={:.4}\n",
            agent.name,
            agent.strategy,
            agent.power,
            agent.blocks_won,
            agent.paid_total,
            agent.discounted_payoff,
            realized,
            predicted,
            rel
        ));
    }

    let attackers: Vec<_> = run
        .agents
        .iter()
        .filter(|a| a.strategy.is_attacker())
        .collect();
    if let (Some(attacker), Some(_)) = (attackers.first(), &outcome.counterfactual) {
        if let crate::agents::StrategySpec::DoubleSpend { attack_round, epsilon } = attacker.strategy {
            out.push_str("\nattack analysis\n");
            out.push_str(&format!(
                "  attacker: {} attacks at round {} for epsilon {}\n",
                attacker.name, attack_round, epsilon
            ));
            match economics::value_at_risk(params, attacker.power, attack_round) {
                Ok(var) => {
                    let q = (attacker.power * params.lambda * params.delta_t).min(1.0);
                    let r_exp = economics::expected_startup_rounds(params.d, q).unwrap_or(0.0);
                    let var_startup = economics::value_at_risk_with_startup(
                        params,
                        attacker.power,
                        attack_round,
                        r_exp.round() as u64,
                    )
                    .unwrap_or(var);
                    let profit = outcome.attacker_profit();
                    out.push_str(&format!("  value at risk (no startup): {var:.6}\n"));
                    out.push_str(&format!(
                        "  expected startup rounds: {r_exp:.2}, break-even epsilon: {var_startup:.6}\n"
                    ));
                    out.push_str(&format!(
                        "  cost magnitude heuristic: {:.6}\n",
                        economics::attack_cost_magnitude(params, r_exp.round() as u64)
                    ));
                    out.push_str(&format!("  simulated attacker profit: {profit:.6}\n"));
                    out.push_str(&format!(
                        "  verdict: {}\n",
                        if epsilon >= var_startup {
                            "attack profitable (epsilon at or above break-even)"
                        } else {
                            "attack unprofitable (epsilon below break-even)"
                        }
                    ));
                }
                Err(err) => {
                    out.push_str(&format!("  attack economics unavailable: {err}\n"));
                }
            }
        }
    }

    out.push_str(&format!("\ntotal slashed: {:.6}\n", run.slashed_total));
    out
}

/// Writes `events.log`, `summary.csv`, and `report.txt` into `out_dir`,
/// creating the directory if needed.
pub fn write_run_outputs(outcome: &ScenarioOutcome, out_dir: &Path) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("events.log"), events_to_jsonl(&outcome.main.events))?;
    let row = SummaryRow::from_outcome(outcome);
    fs::write(
        out_dir.join("summary.csv"),
        format!("{SUMMARY_HEADER}\n{}\n", row.to_csv_line()),
    )?;
    fs::write(out_dir.join("report.txt"), render_report(outcome))?;
    Ok(())
}
