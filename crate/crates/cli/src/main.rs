//! Command-line surface: scenario generation, planning, exact global
//! solving, Monte Carlo simulation, and the two experiment suites.
//!
//! Errors exit non-zero and print a machine-readable
//! `{"error": {"category", "message"}}` object on stderr; exit codes per
//! category are listed in the README.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use planner_core::error::Error;
use planner_core::experiment::{
    fit_power_law, quality_csv, run_quality_experiment, run_scaling_experiment, scaling_csv,
    QualityConfig, ScalingConfig,
};
use planner_core::global::{create_global_pomdp, DEFAULT_STATE_CAP};
use planner_core::planner::{plan, AttackPolicy, PlannerConfig};
use planner_core::policy::PolicyTable;
use planner_core::pomdp::{dump_model, solve_exact};
use planner_core::scenario::{generate_scenario, CompiledScenario, ScenarioFile, ScenarioParams};
use planner_core::sim::{
    simulate_attack_policy_mc, simulate_global_policy_mc, SimulationReport,
};

#[derive(Parser)]
#[command(name = "planner", about = "POMDP-based attack planning for logical networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark scenario file
    GenScenario(GenScenarioArgs),
    /// Run the four-level decomposition planner on a scenario
    Plan(PlanArgs),
    /// Solve the whole network as one explicit model (size-capped)
    SolveGlobal(SolveGlobalArgs),
    /// Monte Carlo simulation of a saved policy against a scenario
    Simulate(SimulateArgs),
    /// Quality-loss and scaling experiment suites
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args)]
struct GenScenarioArgs {
    #[arg(long)]
    machines: usize,
    #[arg(long)]
    exploits: usize,
    /// Days since the last pentest
    #[arg(long, default_value_t = 50)]
    days: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fan-out of the User subnet tree
    #[arg(long, default_value_t = 4)]
    fanout: usize,
    /// Machines packed per User subnet
    #[arg(long, default_value_t = 10)]
    subnet_capacity: usize,
    /// Drop the direct internet-to-sensitive edge (no biconnected cluster)
    #[arg(long)]
    no_triangle: bool,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Write the planning report (JSON) here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the assembled policy (JSON) here
    #[arg(long)]
    policy_out: Option<PathBuf>,
    /// Path-enumeration step cap per component
    #[arg(long, default_value_t = 1_000_000)]
    path_cap: u64,
}

#[derive(Args)]
struct SolveGlobalArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Refuse models with more states than this
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    cap_states: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    policy_out: Option<PathBuf>,
    /// Write the flat explicit model dump here
    #[arg(long)]
    dump_pomdp: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Policy file written by `plan --policy-out` or `solve-global --policy-out`
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 2000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Paired-simulation quality loss of the planner against the exact
    /// global baseline, over a (machines × exploits) grid
    Quality(QualityArgs),
    /// Planner wall-clock over growing machine counts
    Scaling(ScalingArgs),
}

#[derive(Args)]
struct QualityArgs {
    #[arg(long, default_value_t = 6)]
    max_machines: usize,
    #[arg(long, default_value_t = 7)]
    max_exploits: usize,
    #[arg(long, default_value_t = 50)]
    days: u32,
    #[arg(long, default_value_t = 2000)]
    runs: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    cap_states: u64,
    /// CSV output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    /// Comma-separated machine counts
    #[arg(long, value_delimiter = ',', default_values_t = vec![40, 80, 120, 160])]
    machines: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    exploits: usize,
    #[arg(long, default_value_t = 50)]
    days: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-cell wall-clock budget in seconds
    #[arg(long, default_value_t = 600)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Saved policy file: either an assembled hierarchical attack policy or a
/// whole-network policy table.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PolicyFile {
    Attack { policy: AttackPolicy },
    Global { policy: PolicyTable },
}

fn exit_code_for(err: &Error) -> u8 {
    match err.category() {
        "invalid-input" => 2,
        "model-error" => 3,
        "cap-exceeded" => 4,
        "path-explosion" => 5,
        "timeout" => 6,
        "model-too-large" => 7,
        "impossible-observation" | "harness-bug" => 8,
        _ => 9, // io
    }
}

fn fail(err: Error) -> ExitCode {
    let payload = serde_json::json!({
        "error": { "category": err.category(), "message": err.to_string() }
    });
    eprintln!("{payload}");
    ExitCode::from(exit_code_for(&err))
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, content).map_err(Error::from),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn load_scenario(path: &PathBuf) -> Result<CompiledScenario, Error> {
    let text = fs::read_to_string(path)?;
    ScenarioFile::from_json(&text)?.compile()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(err),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenScenario(args) => {
            let params = ScenarioParams {
                machines: args.machines,
                exploits: args.exploits,
                days: args.days,
                seed: args.seed,
                user_fanout: args.fanout,
                user_subnet_capacity: args.subnet_capacity,
                triangle: !args.no_triangle,
            };
            let file = generate_scenario(&params)?;
            write_or_print(&args.out, &file.to_json())
        }
        Command::Plan(args) => {
            let sc = load_scenario(&args.scenario)?;
            let cfg = PlannerConfig {
                path_cap: args.path_cap,
                ..PlannerConfig::default()
            };
            let outcome = plan(&sc, &cfg)?;
            println!(
                "value {:.6}  components {}  solves {}  cache hits {}",
                outcome.value,
                outcome.report.components.len(),
                outcome.report.cache.solves,
                outcome.report.cache.hits
            );
            if let Some(path) = &args.out {
                fs::write(path, serde_json::to_string_pretty(&outcome.report).unwrap())?;
            }
            if let Some(path) = &args.policy_out {
                let file = PolicyFile::Attack {
                    policy: outcome.policy,
                };
                fs::write(path, serde_json::to_string(&file).unwrap())?;
            }
            Ok(())
        }
        Command::SolveGlobal(args) => {
            let sc = load_scenario(&args.scenario)?;
            let model = create_global_pomdp(&sc, args.cap_states)?;
            let solution = solve_exact(&model)?;
            println!(
                "value {:.6}  states {}  actions {}",
                solution.value,
                model.n_states(),
                model.n_actions()
            );
            if let Some(path) = &args.dump_pomdp {
                fs::write(path, dump_model(&model)?)?;
            }
            if let Some(path) = &args.out {
                let report = serde_json::json!({
                    "value": solution.value,
                    "states": model.n_states(),
                    "actions": model.n_actions(),
                    "observations": model.n_obs(),
                });
                fs::write(path, serde_json::to_string_pretty(&report).unwrap())?;
            }
            if let Some(path) = &args.policy_out {
                let file = PolicyFile::Global {
                    policy: PolicyTable::from_model_policy(&model, &solution.policy),
                };
                fs::write(path, serde_json::to_string(&file).unwrap())?;
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let sc = load_scenario(&args.scenario)?;
            let text = fs::read_to_string(&args.policy)?;
            let policy: PolicyFile = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("policy file: {e}")))?;
            let report: SimulationReport = match &policy {
                PolicyFile::Attack { policy } => {
                    simulate_attack_policy_mc(&sc, policy, args.runs, args.seed)?
                }
                PolicyFile::Global { policy } => {
                    policy.validate()?;
                    simulate_global_policy_mc(&sc, policy, args.runs, args.seed)?
                }
            };
            let json = serde_json::to_string_pretty(&report).unwrap();
            write_or_print(&args.out, &json)
        }
        Command::Experiment(ExperimentCommand::Quality(args)) => {
            let cfg = QualityConfig {
                machine_counts: (1..=args.max_machines).collect(),
                exploit_counts: (1..=args.max_exploits).collect(),
                days: args.days,
                runs: args.runs,
                seed: args.seed,
                state_cap: args.cap_states,
            };
            let cells = run_quality_experiment(&cfg)?;
            let feasible: Vec<_> = cells.iter().filter(|c| c.feasible).collect();
            if !feasible.is_empty() {
                let mean = feasible.iter().map(|c| c.loss_pct).sum::<f64>() / feasible.len() as f64;
                let max = feasible.iter().map(|c| c.loss_pct).fold(f64::MIN, f64::max);
                eprintln!(
                    "feasible {}/{}  mean loss {mean:.3}%  max loss {max:.3}%",
                    feasible.len(),
                    cells.len()
                );
            }
            write_or_print(&args.out, &quality_csv(&cells))
        }
        Command::Experiment(ExperimentCommand::Scaling(args)) => {
            let cfg = ScalingConfig {
                machine_counts: args.machines,
                exploits: args.exploits,
                days: args.days,
                seed: args.seed,
                timeout: Some(Duration::from_secs(args.timeout_secs)),
                repeats: args.repeats,
            };
            let cells = run_scaling_experiment(&cfg)?;
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| !c.timed_out)
                .map(|c| (c.machines as f64, c.seconds))
                .collect();
            if pts.len() >= 2 {
                eprintln!("fitted runtime exponent: {:.3}", fit_power_law(&pts));
            }
            write_or_print(&args.out, &scaling_csv(&cells))
        }
    }
}
