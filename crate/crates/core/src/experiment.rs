//! Experiment orchestration: quality-loss and scaling curves over generated
//! scenarios, with plot-ready CSV output.
//!
//! Quality cells compare the decomposed planner against the exact global
//! baseline by matched-seed paired simulation; cells whose global state
//! space exceeds the cap are marked infeasible rather than failing the whole
//! grid. Scaling cells time the planner alone and report cache statistics.

use std::time::{Duration, Instant};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::global::create_global_pomdp;
use crate::planner::{plan, PlannerConfig};
use crate::policy::PolicyTable;
use crate::pomdp::solve_exact;
use crate::scenario::{generate_scenario, ScenarioParams};
use crate::sim::simulate_paired;

#[derive(Debug, Clone)]
pub struct QualityConfig {
    pub machine_counts: Vec<usize>,
    pub exploit_counts: Vec<usize>,
    pub days: u32,
    pub runs: u64,
    pub seed: u64,
    pub state_cap: u64,
}

impl QualityConfig {
    pub fn grid(max_machines: usize, max_exploits: usize) -> Self {
        QualityConfig {
            machine_counts: (1..=max_machines).collect(),
            exploit_counts: (1..=max_exploits).collect(),
            days: 50,
            runs: 2000,
            seed: 1,
            state_cap: crate::global::DEFAULT_STATE_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QualityCell {
    pub machines: usize,
    pub exploits: usize,
    pub days: u32,
    pub seed: u64,
    pub feasible: bool,
    pub global_states: u128,
    pub value_global: f64,
    pub value_4al: f64,
    pub mean_global: f64,
    pub ci95_global: f64,
    pub mean_4al: f64,
    pub ci95_4al: f64,
    /// `(quality(global) − quality(4AL)) / quality(global)` in percent; zero
    /// when neither policy earns anything.
    pub loss_pct: f64,
}

fn quality_cell(cfg: &QualityConfig, machines: usize, exploits: usize) -> Result<QualityCell> {
    let params = ScenarioParams::new(machines, exploits, cfg.days, cfg.seed);
    let sc = generate_scenario(&params)?.compile()?;
    let infeasible = |size: u128| QualityCell {
        machines,
        exploits,
        days: cfg.days,
        seed: cfg.seed,
        feasible: false,
        global_states: size,
        value_global: 0.0,
        value_4al: 0.0,
        mean_global: 0.0,
        ci95_global: 0.0,
        mean_4al: 0.0,
        ci95_4al: 0.0,
        loss_pct: 0.0,
    };
    let global_model = match create_global_pomdp(&sc, cfg.state_cap) {
        Ok(model) => model,
        Err(Error::CapExceeded { size, .. }) => return Ok(infeasible(size)),
        Err(e) => return Err(e),
    };
    let global_states = global_model.n_states() as u128;
    let global_solution = solve_exact(&global_model)?;
    let table = PolicyTable::from_model_policy(&global_model, &global_solution.policy);

    let outcome = plan(&sc, &PlannerConfig::default())?;
    let paired = simulate_paired(&sc, &outcome.policy, &table, cfg.runs, cfg.seed)?;

    let loss_pct = if paired.global.mean.abs() <= 1e-9 {
        0.0
    } else {
        100.0 * (paired.global.mean - paired.attack.mean) / paired.global.mean
    };
    Ok(QualityCell {
        machines,
        exploits,
        days: cfg.days,
        seed: cfg.seed,
        feasible: true,
        global_states,
        value_global: global_solution.value,
        value_4al: outcome.value,
        mean_global: paired.global.mean,
        ci95_global: paired.global.ci_half_width,
        mean_4al: paired.attack.mean,
        ci95_4al: paired.attack.ci_half_width,
        loss_pct,
    })
}

/// One cell per `(machines, exploits)` pair of the grid, in row-major order.
pub fn run_quality_experiment(cfg: &QualityConfig) -> Result<Vec<QualityCell>> {
    let cells: Vec<(usize, usize)> = cfg
        .machine_counts
        .iter()
        .flat_map(|&m| cfg.exploit_counts.iter().map(move |&e| (m, e)))
        .collect();
    #[cfg(feature = "parallel")]
    {
        cells
            .par_iter()
            .map(|&(m, e)| quality_cell(cfg, m, e))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells
            .iter()
            .map(|&(m, e)| quality_cell(cfg, m, e))
            .collect()
    }
}

pub const QUALITY_CSV_HEADER: &str = "machines,exploits,days,seed,feasible,global_states,value_global,value_4al,mean_global,ci95_global,mean_4al,ci95_4al,loss_pct";

pub fn quality_csv(cells: &[QualityCell]) -> String {
    let mut out = String::from(QUALITY_CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.machines,
            c.exploits,
            c.days,
            c.seed,
            c.feasible,
            c.global_states,
            c.value_global,
            c.value_4al,
            c.mean_global,
            c.ci95_global,
            c.mean_4al,
            c.ci95_4al,
            c.loss_pct
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub machine_counts: Vec<usize>,
    pub exploits: usize,
    pub days: u32,
    pub seed: u64,
    /// Per-cell wall-clock budget.
    pub timeout: Option<Duration>,
    /// Runs per cell; the median time is reported.
    pub repeats: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            machine_counts: vec![40, 80, 120, 160],
            exploits: 20,
            days: 50,
            seed: 1,
            timeout: Some(Duration::from_secs(600)),
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingCell {
    pub machines: usize,
    pub exploits: usize,
    pub days: u32,
    pub seed: u64,
    /// Median planning wall-clock over the repeats, in seconds.
    pub seconds: f64,
    pub value: f64,
    pub pomdp_solves: u64,
    pub cache_hits: u64,
    pub timed_out: bool,
}

/// Times the planner alone (scenario generation and belief building are
/// excluded) on growing machine counts at a fixed exploit count.
pub fn run_scaling_experiment(cfg: &ScalingConfig) -> Result<Vec<ScalingCell>> {
    let mut cells = Vec::new();
    for &m in &cfg.machine_counts {
        let params = ScenarioParams::new(m, cfg.exploits, cfg.days, cfg.seed);
        let sc = generate_scenario(&params)?.compile()?;
        let mut times = Vec::new();
        let mut cell = ScalingCell {
            machines: m,
            exploits: cfg.exploits,
            days: cfg.days,
            seed: cfg.seed,
            seconds: 0.0,
            value: 0.0,
            pomdp_solves: 0,
            cache_hits: 0,
            timed_out: false,
        };
        for _ in 0..cfg.repeats.max(1) {
            let planner_cfg = PlannerConfig {
                deadline: cfg.timeout.map(|t| Instant::now() + t),
                ..PlannerConfig::default()
            };
            let started = Instant::now();
            match plan(&sc, &planner_cfg) {
                Ok(outcome) => {
                    times.push(started.elapsed().as_secs_f64());
                    cell.value = outcome.value;
                    cell.pomdp_solves = outcome.report.cache.solves;
                    cell.cache_hits = outcome.report.cache.hits;
                }
                Err(Error::Timeout) => {
                    cell.timed_out = true;
                    times.push(started.elapsed().as_secs_f64());
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cell.seconds = times[times.len() / 2];
        cells.push(cell);
    }
    Ok(cells)
}

pub const SCALING_CSV_HEADER: &str =
    "machines,exploits,days,seed,seconds,value,pomdp_solves,cache_hits,timed_out";

pub fn scaling_csv(cells: &[ScalingCell]) -> String {
    let mut out = String::from(SCALING_CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.machines,
            c.exploits,
            c.days,
            c.seed,
            c.seconds,
            c.value,
            c.pomdp_solves,
            c.cache_hits,
            c.timed_out
        ));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`: the fitted polynomial
/// degree of a runtime curve. Times are clamped to a microsecond so that
/// timer noise on near-instant cells cannot dominate.
pub fn fit_power_law(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.max(1e-6).ln()))
        .collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = logs.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let var: f64 = logs.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    if var == 0.0 {
        return 0.0;
    }
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_quality_grid_stays_conservative() {
        let mut cfg = QualityConfig::grid(2, 2);
        cfg.runs = 300;
        let cells = run_quality_experiment(&cfg).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert!(c.feasible);
            assert!(
                c.value_4al <= c.value_global + 1e-6,
                "cell ({}, {}): {} vs {}",
                c.machines,
                c.exploits,
                c.value_4al,
                c.value_global
            );
        }
        let csv = quality_csv(&cells);
        assert!(csv.starts_with(QUALITY_CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn infeasible_cells_are_marked_not_fatal() {
        let mut cfg = QualityConfig::grid(3, 2);
        cfg.state_cap = 4;
        cfg.runs = 10;
        let cells = run_quality_experiment(&cfg).unwrap();
        assert!(cells.iter().all(|c| !c.feasible));
        assert!(cells.iter().all(|c| c.global_states > 4));
    }

    #[test]
    fn scaling_experiment_reports_times() {
        let cfg = ScalingConfig {
            machine_counts: vec![5, 10],
            exploits: 4,
            days: 20,
            seed: 2,
            timeout: Some(Duration::from_secs(60)),
            repeats: 1,
        };
        let cells = run_scaling_experiment(&cfg).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells.iter().all(|c| !c.timed_out));
        assert!(cells.iter().all(|c| c.seconds >= 0.0));
        let csv = scaling_csv(&cells);
        assert!(csv.starts_with(SCALING_CSV_HEADER));
    }

    #[test]
    fn power_law_fit_recovers_known_exponents() {
        let quadratic: Vec<(f64, f64)> = [40.0, 80.0, 120.0, 160.0]
            .iter()
            .map(|&x| (x, 3e-6 * x * x))
            .collect();
        let got = fit_power_law(&quadratic);
        assert!((got - 2.0).abs() < 1e-6, "{got}");
        let constant: Vec<(f64, f64)> = [40.0, 80.0].iter().map(|&x| (x, 0.5)).collect();
        assert!(fit_power_law(&constant).abs() < 1e-9);
    }
}
