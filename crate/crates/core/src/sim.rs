//! Monte Carlo policy evaluation.
//!
//! A run samples one true configuration per machine from the initial
//! beliefs, then executes a policy against it; with deterministic action
//! outcomes the run is a plain walk. Per-run randomness comes from a
//! counter-mode stream of the base seed, so results are identical whether
//! runs execute sequentially or in parallel, and paired comparisons execute
//! both policies against the same sampled worlds.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::global::usable_through;
use crate::machine::{
    apply_action, ActionEffect, ActionSpec, ACTION_TERMINATE, OBS_CRASHED, OBS_FAILED, OBS_NONE,
    OBS_SUCCEEDED,
};
use crate::planner::AttackPolicy;
use crate::policy::PolicyTable;
use crate::pomdp::{rollout_policy, PolicyNode, PomdpModel};
use crate::scenario::{CompiledMachine, CompiledScenario};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub runs: u64,
    pub mean: f64,
    /// Sample standard deviation (n−1 denominator).
    pub std_dev: f64,
    /// 95% confidence half-width, `1.96·σ/√n`.
    pub ci_half_width: f64,
    pub seed: u64,
}

impl SimulationReport {
    pub fn from_rewards(rewards: &[f64], seed: u64) -> SimulationReport {
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let var = if rewards.len() > 1 {
            rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        SimulationReport {
            runs: rewards.len() as u64,
            mean,
            std_dev,
            ci_half_width: 1.96 * std_dev / n.sqrt(),
            seed,
        }
    }
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// One sampled true configuration per machine.
pub type World = BTreeMap<String, Vec<u8>>;

pub fn sample_world(sc: &CompiledScenario, rng: &mut ChaCha8Rng) -> World {
    sc.machines
        .values()
        .map(|cm| (cm.id.clone(), cm.belief.sample(rng).to_vec()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MachineStatus {
    Fresh,
    Controlled,
    Crashed,
    GivenUp,
}

struct Episode<'a> {
    sc: &'a CompiledScenario,
    configs: World,
    status: BTreeMap<String, MachineStatus>,
    controlled_subnets: BTreeSet<String>,
    total: f64,
}

impl<'a> Episode<'a> {
    fn new(sc: &'a CompiledScenario, world: &World) -> Episode<'a> {
        Episode {
            sc,
            configs: world.clone(),
            status: sc
                .machines
                .keys()
                .map(|m| (m.clone(), MachineStatus::Fresh))
                .collect(),
            controlled_subnets: [sc.net.root().clone()].into(),
            total: 0.0,
        }
    }

    fn find_action<'m>(cm: &'m CompiledMachine, name: &str) -> Result<&'m ActionSpec> {
        cm.actions.iter().find(|a| a.name == name).ok_or_else(|| {
            Error::HarnessBug(format!(
                "policy plays '{name}', which does not target machine '{}'",
                cm.id
            ))
        })
    }

    /// Effect of one action on one machine, mirroring the model semantics:
    /// controlled and crashed machines return fixed observations, costs are
    /// always paid, and a take-over collects the machine's own value.
    fn step(&mut self, machine: &str, action: &ActionSpec) -> Result<String> {
        let cm = self.sc.machine(machine)?;
        self.total += action.time_cost + action.detect_cost;
        let obs = match self.status[machine] {
            MachineStatus::Controlled => OBS_NONE.to_string(),
            MachineStatus::Crashed => OBS_CRASHED.to_string(),
            _ => {
                let cfg = self.configs.get_mut(machine).expect("world covers machines");
                match apply_action(&cm.programs, cfg, action)? {
                    ActionEffect::Exploited => {
                        self.total += cm.value;
                        self.status.insert(machine.to_string(), MachineStatus::Controlled);
                        self.controlled_subnets.insert(cm.subnet.clone());
                        OBS_SUCCEEDED.to_string()
                    }
                    ActionEffect::ExploitFailed => OBS_FAILED.to_string(),
                    ActionEffect::MachineCrashed => {
                        self.status.insert(machine.to_string(), MachineStatus::Crashed);
                        OBS_CRASHED.to_string()
                    }
                    ActionEffect::ProgramCrashed { new_cfg } => {
                        *cfg = new_cfg;
                        OBS_CRASHED.to_string()
                    }
                    ActionEffect::Observed(obs) => obs,
                }
            }
        };
        Ok(obs)
    }

    /// Walks one machine policy to termination. The machine ends controlled,
    /// crashed, or given up.
    fn run_machine_policy(&mut self, machine: &str, table: &PolicyTable) -> Result<()> {
        let cm = self.sc.machine(machine)?;
        let mut node = table.node(table.root)?;
        loop {
            if node.action == ACTION_TERMINATE {
                break;
            }
            let action = Self::find_action(cm, &node.action)?;
            let obs = self.step(machine, action)?;
            if self.status[machine] == MachineStatus::Controlled
                || self.status[machine] == MachineStatus::Crashed
            {
                break;
            }
            match table.child_of(node, &obs) {
                Some(next) => node = table.node(next)?,
                None => {
                    return Err(Error::HarnessBug(format!(
                        "machine '{machine}': no policy branch for observation '{obs}' after '{}'",
                        node.action
                    )))
                }
            }
        }
        if self.status[machine] == MachineStatus::Fresh {
            self.status.insert(machine.to_string(), MachineStatus::GivenUp);
        }
        Ok(())
    }

    fn subnet_controlled(&self, subnet: &str) -> bool {
        self.sc
            .net
            .machines_of(subnet)
            .iter()
            .any(|m| self.status[m] == MachineStatus::Controlled)
    }
}

/// Executes the assembled hierarchical policy against one sampled world.
///
/// Component plans run root-down once their parent subnet is controlled;
/// within a component each path runs hop by hop and is abandoned at the
/// first failure to enter a subnet; entering a subnet runs the chosen first
/// machine's policy through the hop firewall and, on success, the residual
/// machines' policies behind it.
pub fn run_attack_policy(sc: &CompiledScenario, policy: &AttackPolicy, world: &World) -> Result<f64> {
    let mut ep = Episode::new(sc, world);
    for comp in &policy.components {
        let parent_open = comp.parent_subnet == *sc.net.root()
            || ep.subnet_controlled(&comp.parent_subnet);
        if !parent_open {
            continue;
        }
        for path in &comp.paths {
            'hops: for hop in &path.hops {
                if ep.subnet_controlled(&hop.subnet) {
                    continue; // already inside from an earlier path
                }
                let Some(entry) = &hop.entry else { break 'hops };
                match ep.status[&entry.machine] {
                    MachineStatus::Crashed | MachineStatus::GivenUp => break 'hops,
                    MachineStatus::Controlled => {}
                    MachineStatus::Fresh => {
                        ep.run_machine_policy(&entry.machine, &entry.policy)?;
                        if ep.status[&entry.machine] != MachineStatus::Controlled {
                            break 'hops;
                        }
                        for residual in &hop.residuals {
                            if ep.status[&residual.machine] == MachineStatus::Fresh {
                                ep.run_machine_policy(&residual.machine, &residual.policy)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ep.total)
}

/// Executes a whole-network policy (actions named `machine:action`) against
/// one sampled world, mirroring the global model's usability rule: actions
/// on unreached machines are observationless no-ops that still pay costs.
pub fn run_global_policy(sc: &CompiledScenario, table: &PolicyTable, world: &World) -> Result<f64> {
    let mut ep = Episode::new(sc, world);
    let mut node = table.node(table.root)?;
    for _ in 0..table.nodes.len() + 1 {
        if node.action == ACTION_TERMINATE {
            return Ok(ep.total);
        }
        let (machine, action_name) = node.action.split_once(':').ok_or_else(|| {
            Error::HarnessBug(format!("malformed global action '{}'", node.action))
        })?;
        let cm = ep.sc.machine(machine)?;
        let action = Episode::find_action(cm, action_name)?;
        let reached = usable_through(
            &ep.sc.net,
            &ep.controlled_subnets,
            &cm.subnet,
            action.port(&cm.programs),
        );
        let obs = if !reached && ep.status[machine] == MachineStatus::Fresh {
            ep.total += action.time_cost + action.detect_cost;
            OBS_NONE.to_string()
        } else {
            ep.step(machine, action)?
        };
        match table.child_of(node, &obs) {
            Some(next) => node = table.node(next)?,
            None => {
                return Err(Error::HarnessBug(format!(
                    "global policy: no branch for observation '{obs}' after '{}'",
                    node.action
                )))
            }
        }
    }
    Err(Error::HarnessBug(
        "global policy walk exceeded the node budget".into(),
    ))
}

fn collect_rewards_seq<F>(runs: u64, run_one: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..runs).map(run_one).collect()
}

#[cfg(feature = "parallel")]
fn collect_rewards_par<F>(runs: u64, run_one: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..runs).into_par_iter().map(run_one).collect()
}

fn collect_rewards<F>(runs: u64, run_one: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        collect_rewards_par(runs, run_one)
    }
    #[cfg(not(feature = "parallel"))]
    {
        collect_rewards_seq(runs, run_one)
    }
}

fn validate_runs(runs: u64) -> Result<()> {
    if runs == 0 {
        return Err(Error::InvalidInput("need at least one simulation run".into()));
    }
    Ok(())
}

/// Monte Carlo estimate of an assembled attack policy's value.
pub fn simulate_attack_policy_mc(
    sc: &CompiledScenario,
    policy: &AttackPolicy,
    runs: u64,
    seed: u64,
) -> Result<SimulationReport> {
    validate_runs(runs)?;
    let rewards = collect_rewards(runs, |run| {
        let world = sample_world(sc, &mut run_rng(seed, run));
        run_attack_policy(sc, policy, &world)
    })?;
    Ok(SimulationReport::from_rewards(&rewards, seed))
}

/// Sequential twin of [`simulate_attack_policy_mc`]; identical output.
pub fn simulate_attack_policy_mc_seq(
    sc: &CompiledScenario,
    policy: &AttackPolicy,
    runs: u64,
    seed: u64,
) -> Result<SimulationReport> {
    validate_runs(runs)?;
    let rewards = collect_rewards_seq(runs, |run| {
        let world = sample_world(sc, &mut run_rng(seed, run));
        run_attack_policy(sc, policy, &world)
    })?;
    Ok(SimulationReport::from_rewards(&rewards, seed))
}

/// Monte Carlo estimate of a whole-network policy's value.
pub fn simulate_global_policy_mc(
    sc: &CompiledScenario,
    table: &PolicyTable,
    runs: u64,
    seed: u64,
) -> Result<SimulationReport> {
    validate_runs(runs)?;
    let rewards = collect_rewards(runs, |run| {
        let world = sample_world(sc, &mut run_rng(seed, run));
        run_global_policy(sc, table, &world)
    })?;
    Ok(SimulationReport::from_rewards(&rewards, seed))
}

/// Monte Carlo estimate over a solved model directly: the true state is
/// sampled from the model's initial belief and the policy tree is walked.
pub fn simulate_model_policy_mc(
    model: &PomdpModel,
    policy: &PolicyNode,
    runs: u64,
    seed: u64,
) -> Result<SimulationReport> {
    validate_runs(runs)?;
    let rewards = collect_rewards(runs, |run| {
        let state = model.initial_belief.sample(&mut run_rng(seed, run));
        rollout_policy(model, policy, state as usize)
    })?;
    Ok(SimulationReport::from_rewards(&rewards, seed))
}

/// Sequential twin of [`simulate_model_policy_mc`]; identical output.
pub fn simulate_model_policy_mc_seq(
    model: &PomdpModel,
    policy: &PolicyNode,
    runs: u64,
    seed: u64,
) -> Result<SimulationReport> {
    validate_runs(runs)?;
    let rewards = collect_rewards_seq(runs, |run| {
        let state = model.initial_belief.sample(&mut run_rng(seed, run));
        rollout_policy(model, policy, state as usize)
    })?;
    Ok(SimulationReport::from_rewards(&rewards, seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedComparison {
    pub attack: SimulationReport,
    pub global: SimulationReport,
    /// Mean of the per-run differences `global − attack`.
    pub mean_diff: f64,
}

/// Paired estimator: both policies run against the same sampled worlds, so
/// their difference is estimated with far less variance than two
/// independent simulations.
pub fn simulate_paired(
    sc: &CompiledScenario,
    attack: &AttackPolicy,
    global: &PolicyTable,
    runs: u64,
    seed: u64,
) -> Result<PairedComparison> {
    validate_runs(runs)?;
    let pairs: Vec<(f64, f64)> = collect_rewards_pairs(sc, attack, global, runs, seed)?;
    let attack_rewards: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
    let global_rewards: Vec<f64> = pairs.iter().map(|(_, g)| *g).collect();
    let mean_diff =
        pairs.iter().map(|(a, g)| g - a).sum::<f64>() / runs as f64;
    Ok(PairedComparison {
        attack: SimulationReport::from_rewards(&attack_rewards, seed),
        global: SimulationReport::from_rewards(&global_rewards, seed),
        mean_diff,
    })
}

fn collect_rewards_pairs(
    sc: &CompiledScenario,
    attack: &AttackPolicy,
    global: &PolicyTable,
    runs: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let run_one = |run: u64| -> Result<(f64, f64)> {
        let world = sample_world(sc, &mut run_rng(seed, run));
        Ok((
            run_attack_policy(sc, attack, &world)?,
            run_global_policy(sc, global, &world)?,
        ))
    };
    #[cfg(feature = "parallel")]
    {
        (0..runs).into_par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..runs).map(run_one).collect()
    }
}
