//! Command-line front end: scenario runs, parameter sweeps, closed-form
//! attack analysis, and the coordination-game analyzer.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags,
//! unparseable or invalid scenarios, bad sweep specs), 1 for runtime
//! failures.

use clap::{Args, Parser, Subcommand};
use delayed_pow::agents::StrategySpec;
use delayed_pow::economics;
use delayed_pow::game::{
    is_k_resilient, is_nash, min_discount, payoff, resilience_ruled_out, CoordinationGame,
    MinDiscount, Profile,
};
use delayed_pow::output::{write_run_outputs, SummaryRow, SUMMARY_HEADER};
use delayed_pow::scenario::Scenario;
use delayed_pow::sim::{run_with_counterfactual, SimConfig, SimMode};
use delayed_pow::sweep::{apply_assignment, expand_cells, rows_to_csv, run_cells, SweepSpec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "delayed-pow", version, about = "Timelock-and-slash mining protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write events.log, summary.csv, and report.txt.
    Run(RunArgs),
    /// Run the sweep grids from the scenario file and write sweep.csv.
    Sweep(SweepArgs),
    /// Print the closed-form attack economics for the scenario (no simulation).
    Analyze(AnalyzeArgs),
    /// Analyze the n-player coordination game (no simulation).
    Game(GameArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SimMode>,
    /// Override the scenario horizon (rounds for discrete, time for poisson).
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file (JSON) with a `sweep` section.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the seeds-per-grid-point count.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Scenario file (JSON); the attacker entry supplies power and round.
    #[arg(long)]
    scenario: PathBuf,
    /// Attack round when the roster has no double_spend entry.
    #[arg(long)]
    attack_round: Option<u64>,
}

#[derive(Args)]
struct GameArgs {
    /// Number of players.
    #[arg(long, short = 'n', default_value_t = 3)]
    players: usize,
    /// Payoff to everyone under unanimous 0.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Payoff to each of exactly two 1-players.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Coalition size for the repeated-game threshold.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Punishment length in rounds.
    #[arg(long, default_value_t = 1)]
    t: u64,
}

fn parse_mode(s: &str) -> Result<SimMode, String> {
    match s {
        "discrete" => Ok(SimMode::Discrete),
        "poisson" => Ok(SimMode::Poisson),
        other => Err(format!("unknown mode `{other}` (expected discrete or poisson)")),
    }
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Game(args) => cmd_game(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn config_error(message: impl ToString) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.to_string(),
    }
}

fn runtime_error(message: impl ToString) -> CliError {
    CliError {
        code: EXIT_RUNTIME,
        message: message.to_string(),
    }
}

fn load_config(path: &Path) -> Result<(Scenario, SimConfig), CliError> {
    let scenario = Scenario::load(path).map_err(config_error)?;
    let config = scenario.sim_config();
    Ok((scenario, config))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (_, mut config) = load_config(&args.scenario)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    config.validate().map_err(config_error)?;

    let outcome = run_with_counterfactual(&config).map_err(runtime_error)?;
    write_run_outputs(&outcome, &args.out).map_err(runtime_error)?;

    let row = SummaryRow::from_outcome(&outcome);
    println!("{SUMMARY_HEADER}");
    println!("{}", row.to_csv_line());
    println!(
        "wrote {}, {}, {}",
        args.out.join("events.log").display(),
        args.out.join("summary.csv").display(),
        args.out.join("report.txt").display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let (scenario, config) = load_config(&args.scenario)?;
    let grids = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| config_error("scenario has no `sweep` section"))?;
    let seeds = args.seeds.or(scenario.seeds);
    let spec = SweepSpec::from_named(grids, seeds).map_err(config_error)?;
    let cells = expand_cells(&config, &spec).map_err(config_error)?;

    let rows = run_cells(&config, &cells).map_err(runtime_error)?;
    std::fs::create_dir_all(&args.out).map_err(runtime_error)?;
    let path = args.out.join("sweep.csv");
    std::fs::write(&path, rows_to_csv(&rows)).map_err(runtime_error)?;
    println!(
        "swept {} grid points x {} seeds = {} runs; wrote {}",
        cells.len() / spec.seeds as usize,
        spec.seeds,
        cells.len(),
        path.display()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let (scenario, config) = load_config(&args.scenario)?;

    // One analysis point per sweep assignment; a single point without a
    // sweep section.
    let assignments: Vec<Vec<_>> = match scenario.sweep.as_ref() {
        Some(grids) => {
            let spec = SweepSpec::from_named(grids, Some(1)).map_err(config_error)?;
            expand_cells(&config, &spec)
                .map_err(config_error)?
                .into_iter()
                .map(|cell| cell.assignment)
                .collect()
        }
        None => vec![Vec::new()],
    };

    println!("k,d,gamma0,delta,attack_round,p_v,epsilon,expected_startup_rounds,value_at_risk,breakeven_eps,cost_magnitude,verdict");
    for assignment in assignments {
        let cell_config = apply_assignment(&config, &assignment, config.seed).map_err(config_error)?;
        let params = &cell_config.params;
        let total: f64 = cell_config.roster.iter().map(|e| e.power).sum();
        let attacker = cell_config.roster.iter().find_map(|e| match e.strategy {
            StrategySpec::DoubleSpend { attack_round, epsilon } => {
                Some((e.power / total, attack_round, Some(epsilon)))
            }
            _ => None,
        });
        let (p_v, attack_round, epsilon) = match (attacker, args.attack_round) {
            (Some((p, l, eps)), override_l) => (p, override_l.unwrap_or(l), eps),
            (None, Some(l)) => {
                let best = cell_config
                    .roster
                    .iter()
                    .map(|e| e.power / total)
                    .fold(0.0f64, f64::max);
                (best, l, None)
            }
            (None, None) => {
                return Err(config_error(
                    "no double_spend entry in the roster; pass --attack-round to analyze anyway",
                ))
            }
        };

        let q = (p_v * params.lambda * params.delta_t).min(1.0);
        let r_exp = economics::expected_startup_rounds(params.d, q).map_err(config_error)?;
        let r = r_exp.round() as u64;
        let var = economics::value_at_risk(params, p_v, attack_round).map_err(config_error)?;
        let breakeven =
            economics::value_at_risk_with_startup(params, p_v, attack_round, r).map_err(config_error)?;
        let magnitude = economics::attack_cost_magnitude(params, r);
        let verdict = match epsilon {
            Some(eps) if eps >= breakeven => "profitable",
            Some(_) => "unprofitable",
            None => "-",
        };
        println!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            params.k,
            params.d,
            params.gamma0,
            params.discount,
            attack_round,
            p_v,
            epsilon.map_or("-".to_string(), |e| e.to_string()),
            r_exp,
            var,
            breakeven,
            magnitude,
            verdict
        );
    }
    Ok(())
}

fn cmd_game(args: GameArgs) -> Result<(), CliError> {
    let game = CoordinationGame::new(args.players, args.alpha, args.beta).map_err(config_error)?;
    let n = game.n;

    println!(
        "coordination game: n={} alpha={} beta={}",
        n, game.alpha, game.beta
    );
    if n <= 6 {
        println!("\npayoff table (profile -> per-player payoffs):");
        for bits in 0..(1u32 << n) {
            let profile = Profile(bits);
            let actions: String = (0..n).map(|i| char::from(b'0' + profile.action(i))).collect();
            let pays = payoff(&game, profile)
                .iter()
                .map(|p| format!("{p}"))
                .collect::<Vec<_>>()
                .join(",");
            println!("  ({actions}) -> [{pays}]");
        }
    }

    let zero = Profile::all_zero();
    println!(
        "\nall-zero profile is a Nash equilibrium: {}",
        is_nash(&game, zero).map_err(config_error)?
    );
    println!("\nresilience of the all-zero profile:");
    println!("  k,exhaustive_k_resilient,ruled_out_by_condition,disagreement");
    for k in 1..=n {
        let exhaustive = is_k_resilient(&game, zero, k).map_err(config_error)?;
        let ruled_out = resilience_ruled_out(game.alpha, game.beta, k);
        let disagreement = ruled_out && exhaustive;
        println!("  {k},{exhaustive},{ruled_out},{disagreement}{}",
            if disagreement { "  <- condition and search disagree" } else { "" });
    }

    println!(
        "\nrepeated game with coalition size k={} and punishment length t={}:",
        args.k, args.t
    );
    match min_discount(game.alpha, game.beta, args.k, args.t) {
        MinDiscount::Feasible(d) => println!("  minimum discount factor: {d:.9}"),
        MinDiscount::Infeasible => println!("  minimum discount factor: Infeasible"),
    }
    Ok(())
}
