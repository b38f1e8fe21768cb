//! Seeded parameter sweeps over the simulator.
//!
//! A sweep takes a base scenario, a set of value grids over tunable
//! parameters, and a seed count; it runs the cartesian product of grid
//! points times seeds, each cell an isolated simulation plus its honest
//! counterfactual, and yields one row per cell. Cells share nothing
//! mutable, so with the `parallel` feature (default) they run across
//! threads; the sequential path produces identical rows in identical
//! order.

use crate::agents::StrategySpec;
use crate::economics;
use crate::output::SummaryRow;
use crate::sim::{run_with_counterfactual, SimConfig, SimError};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default number of seeds each grid point is averaged over.
pub const DEFAULT_SEEDS: u64 = 32;

/// Parameters a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepParam {
    K,
    D,
    Gamma0,
    Delta,
    Epsilon,
    AttackRound,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::D => "d",
            SweepParam::Gamma0 => "gamma0",
            SweepParam::Delta => "delta",
            SweepParam::Epsilon => "epsilon",
            SweepParam::AttackRound => "attack_round",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = SweepError;
    fn from_str(s: &str) -> Result<Self, SweepError> {
        match s {
            "k" => Ok(SweepParam::K),
            "d" => Ok(SweepParam::D),
            "gamma0" => Ok(SweepParam::Gamma0),
            "delta" => Ok(SweepParam::Delta),
            "epsilon" => Ok(SweepParam::Epsilon),
            "attack_round" => Ok(SweepParam::AttackRound),
            other => Err(SweepError::UnknownParameter(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("unknown sweep parameter `{0}` (expected k, d, gamma0, delta, epsilon, or attack_round)")]
    UnknownParameter(String),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep parameter `{param}` has an empty value list")]
    EmptyValues { param: &'static str },
    #[error("sweep parameter `{param}` needs whole-number values, got {value}")]
    NonIntegralValue { param: &'static str, value: f64 },
    #[error("sweeping `{0}` requires a double_spend entry in the roster")]
    NoAttacker(&'static str),
    #[error("seed count must be at least 1")]
    ZeroSeeds,
}

/// Grids to sweep, keyed by parameter, plus the per-point seed count.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub grids: BTreeMap<SweepParam, Vec<f64>>,
    pub seeds: u64,
}

impl SweepSpec {
    /// Builds a spec from string-keyed grids (the scenario-file form).
    pub fn from_named(
        grids: &BTreeMap<String, Vec<f64>>,
        seeds: Option<u64>,
    ) -> Result<Self, SweepError> {
        if grids.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        let mut typed = BTreeMap::new();
        for (name, values) in grids {
            let param: SweepParam = name.parse()?;
            if values.is_empty() {
                return Err(SweepError::EmptyValues { param: param.name() });
            }
            typed.insert(param, values.clone());
        }
        let seeds = seeds.unwrap_or(DEFAULT_SEEDS);
        if seeds == 0 {
            return Err(SweepError::ZeroSeeds);
        }
        Ok(SweepSpec { grids: typed, seeds })
    }
}

/// One simulation to run: the parameter assignment plus its seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub assignment: Vec<(SweepParam, f64)>,
    pub seed: u64,
}

/// Result row for one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub summary: SummaryRow,
    pub attack_round: u64,
    /// Break-even prize predicted by the closed forms at this cell's
    /// parameters, using the expected startup-round count.
    pub predicted_breakeven_eps: f64,
}

/// Column order of `sweep.csv`; pinned by tests.
pub const SWEEP_HEADER: &str = "seed,k,d,gamma0,delta,epsilon,attack_round,attacker_profit,honest_mean_utility,slashed_total,predicted_breakeven_eps";

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.seed,
            s.k,
            s.d,
            s.gamma0,
            s.delta,
            s.epsilon,
            self.attack_round,
            s.attacker_profit,
            s.honest_mean_utility,
            s.slashed_total,
            self.predicted_breakeven_eps
        )
    }
}

fn require_integral(param: SweepParam, value: f64) -> Result<u64, SweepError> {
    if value.fract() != 0.0 || value < 0.0 {
        return Err(SweepError::NonIntegralValue {
            param: param.name(),
            value,
        });
    }
    Ok(value as u64)
}

/// Applies one assignment to a copy of the base configuration.
pub fn apply_assignment(
    base: &SimConfig,
    assignment: &[(SweepParam, f64)],
    seed: u64,
) -> Result<SimConfig, SweepError> {
    let mut config = base.clone();
    config.seed = seed;
    for &(param, value) in assignment {
        match param {
            SweepParam::K => config.params.k = require_integral(param, value)?,
            SweepParam::D => config.params.d = value,
            SweepParam::Gamma0 => config.params.gamma0 = value,
            SweepParam::Delta => config.params.discount = value,
            SweepParam::Epsilon => {
                let mut found = false;
                for entry in &mut config.roster {
                    if let StrategySpec::DoubleSpend { epsilon, .. } = &mut entry.strategy {
                        *epsilon = value;
                        found = true;
                    }
                }
                if !found {
                    return Err(SweepError::NoAttacker("epsilon"));
                }
            }
            SweepParam::AttackRound => {
                let round = require_integral(param, value)?;
                let mut found = false;
                for entry in &mut config.roster {
                    if let StrategySpec::DoubleSpend { attack_round, .. } = &mut entry.strategy {
                        *attack_round = round;
                        found = true;
                    }
                }
                if !found {
                    return Err(SweepError::NoAttacker("attack_round"));
                }
            }
        }
    }
    Ok(config)
}

/// Expands the cartesian product of grids times seeds, in deterministic
/// order: grid points vary slowest-first by parameter name, seeds fastest.
pub fn expand_cells(base: &SimConfig, spec: &SweepSpec) -> Result<Vec<SweepCell>, SweepError> {
    if spec.grids.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    if spec.seeds == 0 {
        return Err(SweepError::ZeroSeeds);
    }
    let params: Vec<SweepParam> = spec.grids.keys().copied().collect();
    let mut assignments: Vec<Vec<(SweepParam, f64)>> = vec![Vec::new()];
    for &param in &params {
        let values = &spec.grids[&param];
        if values.is_empty() {
            return Err(SweepError::EmptyValues { param: param.name() });
        }
        let mut next = Vec::with_capacity(assignments.len() * values.len());
        for assignment in &assignments {
            for &value in values {
                let mut extended = assignment.clone();
                extended.push((param, value));
                next.push(extended);
            }
        }
        assignments = next;
    }
    let mut cells = Vec::with_capacity(assignments.len() * spec.seeds as usize);
    for assignment in assignments {
        for s in 0..spec.seeds {
            // Validate the assignment applies cleanly before running.
            apply_assignment(base, &assignment, 0)?;
            cells.push(SweepCell {
                assignment: assignment.clone(),
                seed: base.seed + s,
            });
        }
    }
    Ok(cells)
}

fn run_cell(base: &SimConfig, cell: &SweepCell) -> Result<SweepRow, SimError> {
    let config = apply_assignment(base, &cell.assignment, cell.seed)
        .expect("assignment validated during expansion");
    let outcome = run_with_counterfactual(&config)?;
    let summary = SummaryRow::from_outcome(&outcome);

    let attacker = config.roster.iter().find_map(|e| match e.strategy {
        StrategySpec::DoubleSpend { attack_round, .. } => Some((e, attack_round)),
        _ => None,
    });
    let (attack_round, predicted) = match attacker {
        Some((entry, attack_round)) => {
            let total: f64 = config.roster.iter().map(|e| e.power).sum();
            let p_v = entry.power / total;
            let q = (p_v * config.params.lambda * config.params.delta_t).min(1.0);
            let r = economics::expected_startup_rounds(config.params.d, q)
                .map(|r| r.round() as u64)
                .unwrap_or(0);
            let predicted =
                economics::value_at_risk_with_startup(&config.params, p_v, attack_round, r)
                    .unwrap_or(f64::NAN);
            (attack_round, predicted)
        }
        None => (0, f64::NAN),
    };
    Ok(SweepRow {
        summary,
        attack_round,
        predicted_breakeven_eps: predicted,
    })
}

/// Runs every cell on the current thread, in order.
pub fn run_cells_sequential(base: &SimConfig, cells: &[SweepCell]) -> Result<Vec<SweepRow>, SimError> {
    cells.iter().map(|cell| run_cell(base, cell)).collect()
}

/// Runs cells across the rayon pool; row order matches the cell order.
#[cfg(feature = "parallel")]
pub fn run_cells_parallel(base: &SimConfig, cells: &[SweepCell]) -> Result<Vec<SweepRow>, SimError> {
    cells.par_iter().map(|cell| run_cell(base, cell)).collect()
}

/// Runs cells with the best available executor: rayon when the `parallel`
/// feature is enabled, sequential otherwise.
pub fn run_cells(base: &SimConfig, cells: &[SweepCell]) -> Result<Vec<SweepRow>, SimError> {
    #[cfg(feature = "parallel")]
    {
        run_cells_parallel(base, cells)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_cells_sequential(base, cells)
    }
}

/// Expands and runs a whole sweep.
pub fn run_sweep(base: &SimConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepRunError> {
    let cells = expand_cells(base, spec)?;
    let rows = run_cells(base, &cells)?;
    Ok(rows)
}

#[derive(Debug, Error)]
pub enum SweepRunError {
    #[error(transparent)]
    Spec(#[from] SweepError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Renders rows as CSV with the pinned header.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Seed-averaged attacker profit per grid point, preserving grid order.
pub fn average_profit_by_point(rows: &[SweepRow], seeds: u64) -> Vec<f64> {
    rows.chunks(seeds as usize)
        .map(|chunk| {
            chunk.iter().map(|r| r.summary.attacker_profit).sum::<f64>() / chunk.len() as f64
        })
        .collect()
}
