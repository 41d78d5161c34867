//! Single-machine attack POMDP factory.
//!
//! `create_machine_pomdp(request, ...)` turns one machine — its belief over
//! configurations, the firewall in front of it, and a break-in reward — into
//! an explicit [`PomdpModel`]. Action outcomes are deterministic functions of
//! the configuration; [`apply_action`] holds those semantics and is shared
//! with the global encoder and the simulator, so the three never disagree.
//!
//! Actions whose port the firewall blocks are removed from the action set by
//! default: a cost-bearing no-op is strictly dominated, so removal preserves
//! the value. `BuildOptions::blocked_as_noops` keeps them as observationless
//! no-ops instead, for fidelity testing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Firewall;
use crate::pomdp::{Belief, Outcome, PomdpModel};
use crate::update::MachineBelief;

pub const ACTION_TERMINATE: &str = "terminate";
pub const OBS_NONE: &str = "none";
pub const OBS_SUCCEEDED: &str = "succeeded";
pub const OBS_FAILED: &str = "failed";
pub const OBS_CRASHED: &str = "crashed";
pub const OBS_OPEN: &str = "open";
pub const OBS_CLOSED: &str = "closed";
pub const OBS_OS_UNKNOWN: &str = "os_unknown";

/// Per-version flags of a program on a machine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VersionSpec {
    pub name: String,
    /// The program is installed and its port listens in this version.
    pub present: bool,
    pub vulnerable: bool,
    /// A failed exploit against this version crashes its target.
    pub crash_on_failed_exploit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramSpec {
    pub id: String,
    pub port: u16,
    pub versions: Vec<VersionSpec>,
}

impl ProgramSpec {
    pub fn version_names(&self) -> impl Iterator<Item = &str> {
        self.versions.iter().map(|v| v.name.as_str())
    }
}

/// Gating condition: the exploit works only while the named program runs one
/// of the allowed versions. A machine without the program is not protected
/// by it, and neither is a crashed instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gate {
    pub program: String,
    pub allowed_versions: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CrashScope {
    /// A crash takes the whole machine down: every later scan and exploit on
    /// it is a dead end.
    #[default]
    Machine,
    /// Only the target program dies; it then looks absent to scans and
    /// exploits against it.
    Program,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ActionKind {
    PortScan {
        port: u16,
    },
    OsDetect {
        program: String,
        /// Version name → observation class.
        classes: BTreeMap<String, String>,
    },
    Exploit {
        program: String,
        requires: Vec<Gate>,
        crash_scope: CrashScope,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    pub kind: ActionKind,
    /// Duration cost, non-positive.
    pub time_cost: f64,
    /// Detection-risk cost, non-positive.
    pub detect_cost: f64,
}

impl ActionSpec {
    /// Port the action needs through a firewall, if any. OS detection and
    /// terminate pass firewalls freely.
    pub fn port(&self, programs: &[ProgramSpec]) -> Option<u16> {
        match &self.kind {
            ActionKind::PortScan { port } => Some(*port),
            ActionKind::Exploit { program, .. } => programs
                .iter()
                .find(|p| p.id == *program)
                .map(|p| p.port),
            ActionKind::OsDetect { .. } => None,
        }
    }

    /// Whether the action targets anything that exists on a machine with the
    /// given programs.
    pub fn relevant_to(&self, programs: &[ProgramSpec]) -> bool {
        match &self.kind {
            ActionKind::PortScan { port } => programs.iter().any(|p| p.port == *port),
            ActionKind::OsDetect { program, .. } | ActionKind::Exploit { program, .. } => {
                programs.iter().any(|p| p.id == *program)
            }
        }
    }
}

/// A program's slot in a configuration vector equal to its version count
/// means the program has crashed.
pub fn crashed_slot(program: &ProgramSpec) -> u8 {
    program.versions.len() as u8
}

fn version_of<'a>(programs: &'a [ProgramSpec], cfg: &[u8], idx: usize) -> Option<&'a VersionSpec> {
    programs[idx].versions.get(cfg[idx] as usize)
}

/// Deterministic effect of an action on a machine configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionEffect {
    /// Take-over: the machine becomes controlled.
    Exploited,
    ExploitFailed,
    MachineCrashed,
    /// The target program crashed; the configuration moves to `new_cfg`.
    ProgramCrashed { new_cfg: Vec<u8> },
    /// State unchanged; the named observation comes back.
    Observed(String),
}

/// Shared outcome semantics. `cfg` indexes each program's versions, with the
/// crashed slot past the end. `programs` must be sorted by id.
pub fn apply_action(programs: &[ProgramSpec], cfg: &[u8], action: &ActionSpec) -> Result<ActionEffect> {
    match &action.kind {
        ActionKind::PortScan { port } => {
            let open = programs.iter().enumerate().any(|(i, p)| {
                p.port == *port && version_of(programs, cfg, i).is_some_and(|v| v.present)
            });
            Ok(Observed(if open { OBS_OPEN } else { OBS_CLOSED }.to_string()))
        }
        ActionKind::OsDetect { program, classes } => {
            let idx = program_index(programs, program)
                .ok_or_else(|| unknown_program(&action.name, program))?;
            let obs = match version_of(programs, cfg, idx) {
                Some(v) => match classes.get(&v.name) {
                    Some(class) => format!("os_{class}"),
                    None => OBS_OS_UNKNOWN.to_string(),
                },
                None => OBS_OS_UNKNOWN.to_string(),
            };
            Ok(Observed(obs))
        }
        ActionKind::Exploit {
            program,
            requires,
            crash_scope,
        } => {
            let idx = program_index(programs, program)
                .ok_or_else(|| unknown_program(&action.name, program))?;
            let target = version_of(programs, cfg, idx);
            let gates_pass = requires.iter().all(|gate| {
                match program_index(programs, &gate.program) {
                    // a missing or crashed gate program protects nothing
                    None => true,
                    Some(g) => match version_of(programs, cfg, g) {
                        None => true,
                        Some(v) => gate.allowed_versions.contains(&v.name),
                    },
                }
            });
            let success = target.is_some_and(|v| v.present && v.vulnerable) && gates_pass;
            if success {
                return Ok(ActionEffect::Exploited);
            }
            let crashes = target.is_some_and(|v| v.crash_on_failed_exploit);
            if !crashes {
                return Ok(ActionEffect::ExploitFailed);
            }
            match crash_scope {
                CrashScope::Machine => Ok(ActionEffect::MachineCrashed),
                CrashScope::Program => {
                    let mut new_cfg = cfg.to_vec();
                    new_cfg[idx] = crashed_slot(&programs[idx]);
                    Ok(ActionEffect::ProgramCrashed { new_cfg })
                }
            }
        }
    }
}

use ActionEffect::Observed;

fn program_index(programs: &[ProgramSpec], id: &str) -> Option<usize> {
    programs.iter().position(|p| p.id == id)
}

fn unknown_program(action: &str, program: &str) -> Error {
    Error::ModelConstruction(format!(
        "action '{action}' references unknown program '{program}'"
    ))
}

/// Inputs of the Level-4 model factory: which machine, through which
/// firewall, for what total break-in reward, starting from which belief.
#[derive(Debug, Clone)]
pub struct MachinePomdpRequest<'a> {
    pub machine: &'a str,
    pub firewall: &'a Firewall,
    /// Break-in reward: the machine's own value plus whatever the caller
    /// adds for pivoting and onward paths. Must be non-negative.
    pub reward: f64,
    pub belief: &'a MachineBelief,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Keep firewall-blocked actions as observationless no-ops instead of
    /// removing them.
    pub blocked_as_noops: bool,
}

pub fn create_machine_pomdp(
    req: &MachinePomdpRequest,
    programs: &[ProgramSpec],
    actions: &[ActionSpec],
    opts: &BuildOptions,
) -> Result<PomdpModel> {
    if req.reward < 0.0 {
        return Err(Error::InvalidInput(format!(
            "machine '{}': break-in reward must be non-negative",
            req.machine
        )));
    }
    validate_programs(req.machine, req.belief, programs)?;
    for action in actions {
        if action.name == ACTION_TERMINATE {
            return Err(Error::ModelConstruction(
                "action name 'terminate' is reserved".into(),
            ));
        }
        if action.time_cost > 0.0 || action.detect_cost > 0.0 {
            return Err(Error::ModelConstruction(format!(
                "action '{}': costs must be non-positive",
                action.name
            )));
        }
        if let ActionKind::Exploit { program, .. } | ActionKind::OsDetect { program, .. } =
            &action.kind
        {
            if program_index(programs, program).is_none() {
                return Err(unknown_program(&action.name, program));
            }
        }
    }

    // Partition by the firewall; blocked actions vanish or become no-ops.
    let mut included: Vec<(&ActionSpec, bool)> = Vec::new(); // (spec, blocked)
    for action in actions {
        let blocked = action
            .port(programs)
            .is_some_and(|port| req.firewall.blocks(port));
        if !blocked || opts.blocked_as_noops {
            included.push((action, blocked));
        }
    }
    included.sort_by(|(a, _), (b, _)| a.name.cmp(&b.name));
    if included.iter().zip(included.iter().skip(1)).any(|((a, _), (b, _))| a.name == b.name) {
        return Err(Error::ModelConstruction("duplicate action name".into()));
    }

    // Configurations: belief support closed under program-crash transitions.
    let mut configs: BTreeSet<Vec<u8>> =
        req.belief.entries.iter().map(|(c, _)| c.clone()).collect();
    let mut frontier: Vec<Vec<u8>> = configs.iter().cloned().collect();
    let mut machine_crash_reachable = false;
    while let Some(cfg) = frontier.pop() {
        for (action, blocked) in &included {
            if *blocked {
                continue;
            }
            match apply_action(programs, &cfg, action)? {
                ActionEffect::MachineCrashed => machine_crash_reachable = true,
                ActionEffect::ProgramCrashed { new_cfg } => {
                    if configs.insert(new_cfg.clone()) {
                        frontier.push(new_cfg);
                    }
                }
                _ => {}
            }
        }
    }
    let configs: Vec<Vec<u8>> = configs.into_iter().collect();
    let cfg_index: BTreeMap<&[u8], usize> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_slice(), i + 2))
        .collect();

    let mut state_names = vec!["terminal".to_string(), "controlled".to_string()];
    for cfg in &configs {
        state_names.push(config_name(programs, cfg));
    }
    let crashed_state = if machine_crash_reachable {
        state_names.push("crashed".to_string());
        Some(state_names.len() - 1)
    } else {
        None
    };
    let n_states = state_names.len();

    let obs_names = observation_alphabet(included.iter().map(|(a, _)| *a));
    let obs_of = |name: &str| -> u16 {
        obs_names
            .iter()
            .position(|o| o == name)
            .expect("alphabet covers every emitted observation") as u16
    };

    let mut action_names: Vec<String> = included.iter().map(|(a, _)| a.name.clone()).collect();
    action_names.push(ACTION_TERMINATE.to_string());
    let terminate = action_names.len() - 1;
    let mut time_cost: Vec<f64> = included.iter().map(|(a, _)| a.time_cost).collect();
    time_cost.push(0.0);
    let mut detect_cost: Vec<f64> = included.iter().map(|(a, _)| a.detect_cost).collect();
    detect_cost.push(0.0);

    let noop = |state: usize, obs: &str| Outcome {
        next: state as u32,
        obs: obs_of(obs),
        gain: 0.0,
    };
    let mut outcomes: Vec<Vec<Outcome>> = Vec::with_capacity(action_names.len());
    for (action, blocked) in &included {
        let mut per_state = Vec::with_capacity(n_states);
        for s in 0..n_states {
            let out = if s == 0 {
                noop(0, OBS_NONE)
            } else if *blocked {
                noop(s, OBS_NONE)
            } else if s == 1 {
                noop(1, OBS_NONE)
            } else if Some(s) == crashed_state {
                noop(s, OBS_CRASHED)
            } else {
                let cfg = &configs[s - 2];
                match apply_action(programs, cfg, action)? {
                    ActionEffect::Exploited => Outcome {
                        next: 1,
                        obs: obs_of(OBS_SUCCEEDED),
                        gain: req.reward,
                    },
                    ActionEffect::ExploitFailed => noop(s, OBS_FAILED),
                    ActionEffect::MachineCrashed => Outcome {
                        next: crashed_state.expect("crash reachability precomputed") as u32,
                        obs: obs_of(OBS_CRASHED),
                        gain: 0.0,
                    },
                    ActionEffect::ProgramCrashed { new_cfg } => Outcome {
                        next: cfg_index[new_cfg.as_slice()] as u32,
                        obs: obs_of(OBS_CRASHED),
                        gain: 0.0,
                    },
                    ActionEffect::Observed(obs) => noop(s, &obs),
                }
            };
            per_state.push(out);
        }
        outcomes.push(per_state);
    }
    outcomes.push((0..n_states).map(|_| noop(0, OBS_NONE)).collect());

    let mut controlled_rank = vec![0u32; n_states];
    controlled_rank[1] = 1;

    let belief_entries: Vec<(u32, f64)> = req
        .belief
        .entries
        .iter()
        .map(|(cfg, p)| (cfg_index[cfg.as_slice()] as u32, *p))
        .collect();

    PomdpModel::new(
        state_names,
        action_names,
        obs_names,
        0,
        terminate,
        controlled_rank,
        outcomes,
        time_cost,
        detect_cost,
        Belief::new(belief_entries)?,
    )
}

fn validate_programs(machine: &str, belief: &MachineBelief, programs: &[ProgramSpec]) -> Result<()> {
    if belief.programs.len() != programs.len()
        || belief
            .programs
            .iter()
            .zip(programs)
            .any(|(b, p)| *b != p.id)
    {
        return Err(Error::ModelConstruction(format!(
            "machine '{machine}': program list does not match the belief's programs"
        )));
    }
    let mut ports = BTreeSet::new();
    for p in programs {
        if !ports.insert(p.port) {
            return Err(Error::ModelConstruction(format!(
                "machine '{machine}': port {} assigned to more than one program",
                p.port
            )));
        }
        if p.versions.is_empty() {
            return Err(Error::ModelConstruction(format!(
                "machine '{machine}': program '{}' has no versions",
                p.id
            )));
        }
    }
    Ok(())
}

fn config_name(programs: &[ProgramSpec], cfg: &[u8]) -> String {
    let parts: Vec<String> = programs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let ver = p
                .versions
                .get(cfg[i] as usize)
                .map(|v| v.name.as_str())
                .unwrap_or("crashed");
            format!("{}={ver}", p.id)
        })
        .collect();
    parts.join(",")
}

/// Fixed base alphabet plus the OS classes any detection action can emit.
pub(crate) fn observation_alphabet<'a>(
    actions: impl Iterator<Item = &'a ActionSpec>,
) -> Vec<String> {
    let mut names: Vec<String> = [
        OBS_NONE,
        OBS_SUCCEEDED,
        OBS_FAILED,
        OBS_CRASHED,
        OBS_OPEN,
        OBS_CLOSED,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut classes = BTreeSet::new();
    for action in actions {
        if let ActionKind::OsDetect { classes: map, .. } = &action.kind {
            classes.insert(OBS_OS_UNKNOWN.to_string());
            for class in map.values() {
                classes.insert(format!("os_{class}"));
            }
        }
    }
    names.extend(classes);
    names
}

/// Merges states whose rows agree across every action — same rewards, same
/// observations, and successors that are themselves merged. Belief mass is
/// summed; the solve value is preserved exactly.
pub fn merge_indistinguishable_states(model: &PomdpModel) -> Result<(PomdpModel, Vec<usize>)> {
    let n = model.n_states();
    let n_actions = model.n_actions();

    // initial partition: per-state behavioral signature
    let mut class: Vec<usize> = {
        let mut sig_to_class: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut class = vec![0usize; n];
        for s in 0..n {
            let mut sig: Vec<u64> = vec![model.controlled_rank[s] as u64];
            for a in 0..n_actions {
                sig.push(model.reward(s, a).to_bits());
                sig.push(model.outcome(s, a).obs as u64);
            }
            let next_id = sig_to_class.len();
            class[s] = *sig_to_class.entry(sig).or_insert(next_id);
        }
        class
    };

    loop {
        let mut sig_to_class: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut refined = vec![0usize; n];
        for s in 0..n {
            let mut sig = vec![class[s]];
            for a in 0..n_actions {
                sig.push(class[model.outcome(s, a).next as usize]);
            }
            let next_id = sig_to_class.len();
            refined[s] = *sig_to_class.entry(sig).or_insert(next_id);
        }
        if refined == class {
            break;
        }
        class = refined;
    }

    // canonical ids ordered by first occurrence, so terminal and controlled
    // keep their slots
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut mapping = vec![0usize; n];
    for s in 0..n {
        let next_id = remap.len();
        let id = *remap.entry(class[s]).or_insert(next_id);
        mapping[s] = id;
    }
    let m = remap.len();

    let mut rep = vec![usize::MAX; m];
    for s in 0..n {
        if rep[mapping[s]] == usize::MAX {
            rep[mapping[s]] = s;
        }
    }
    let state_names: Vec<String> = rep.iter().map(|&s| model.state_names[s].clone()).collect();
    let controlled_rank: Vec<u32> = rep.iter().map(|&s| model.controlled_rank[s]).collect();
    let mut outcomes = Vec::with_capacity(n_actions);
    for a in 0..n_actions {
        let per_state: Vec<Outcome> = rep
            .iter()
            .map(|&s| {
                let o = model.outcome(s, a);
                Outcome {
                    next: mapping[o.next as usize] as u32,
                    obs: o.obs,
                    gain: o.gain,
                }
            })
            .collect();
        outcomes.push(per_state);
    }
    let mut belief_mass = vec![0.0f64; m];
    for &(s, p) in model.initial_belief.entries() {
        belief_mass[mapping[s as usize]] += p;
    }
    let belief_entries: Vec<(u32, f64)> = belief_mass
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(s, p)| (s as u32, *p))
        .collect();

    let merged = PomdpModel::new(
        state_names,
        model.action_names.clone(),
        model.obs_names.clone(),
        mapping[model.terminal],
        model.terminate,
        controlled_rank,
        outcomes,
        model.time_cost.clone(),
        model.detect_cost.clone(),
        Belief::new(belief_entries)?,
    )?;
    Ok((merged, mapping))
}
