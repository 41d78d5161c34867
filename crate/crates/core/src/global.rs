//! Whole-network baseline: the entire scenario encoded as one flat POMDP.
//!
//! States are tuples of per-machine locals (configuration, controlled, or
//! crashed) plus one global terminal state, so the state count is the product
//! of the per-machine local counts — this exists for exactness testing at
//! desk scale, not to be scaled. Reached-ness is not stored: it is derived
//! from the controlled set, and every support state of a reachable belief
//! agrees on it because take-overs are always observed.
//!
//! An action targets one machine and is usable when some controlled vantage
//! reaches it: a controlled cohabitant in its subnet, or an edge from a
//! controlled subnet whose firewall passes the action's port. Unusable
//! actions are observationless no-ops that still cost their duration, which
//! the solver prunes as dominated.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::machine::{
    apply_action, observation_alphabet, ActionEffect, ActionSpec, ACTION_TERMINATE, OBS_CRASHED,
    OBS_FAILED, OBS_NONE, OBS_SUCCEEDED,
};
use crate::net::{LogicalNetwork, SubnetId};
use crate::pomdp::{Belief, Outcome, PomdpModel};
use crate::scenario::{CompiledMachine, CompiledScenario};

pub const DEFAULT_STATE_CAP: u64 = 100_000;

/// One hop from a controlled machine, per the reached-machine definition: a
/// machine is attackable if its subnet holds a controlled machine, or an edge
/// from a subnet with a controlled vantage (the root counts) leads to it and
/// the edge's firewall passes the required port.
pub fn usable_through(
    net: &LogicalNetwork,
    controlled_subnets: &BTreeSet<SubnetId>,
    target_subnet: &str,
    port: Option<u16>,
) -> bool {
    if controlled_subnets.contains(target_subnet) {
        return true;
    }
    net.in_edges(target_subnet).iter().any(|(from, fw)| {
        controlled_subnets.contains(*from) && port.map(|p| !fw.blocks(p)).unwrap_or(true)
    })
}

struct MachineSlot<'a> {
    machine: &'a CompiledMachine,
    configs: Vec<Vec<u8>>,
    controlled_local: usize,
    crashed_local: Option<usize>,
    locals: usize,
    actions: Vec<&'a ActionSpec>,
}

impl MachineSlot<'_> {
    fn config_local(&self, cfg: &[u8]) -> usize {
        self.configs
            .iter()
            .position(|c| c.as_slice() == cfg)
            .expect("closure covers every reachable configuration")
    }
}

fn build_slot<'a>(net: &LogicalNetwork, cm: &'a CompiledMachine) -> Result<MachineSlot<'a>> {
    // statically dead actions: blocked on every in-edge and no cohabitant
    // could ever offer an unfirewalled vantage
    let has_cohabitants = net.machines_of(&cm.subnet).len() > 1;
    let mut actions: Vec<&ActionSpec> = cm
        .actions
        .iter()
        .filter(|a| {
            if has_cohabitants {
                return true;
            }
            match a.port(&cm.programs) {
                None => true,
                Some(port) => net
                    .in_edges(&cm.subnet)
                    .iter()
                    .any(|(_, fw)| !fw.blocks(port)),
            }
        })
        .collect();
    actions.sort_by(|a, b| a.name.cmp(&b.name));

    // configurations: belief support closed under program-crash transitions
    let mut configs: BTreeSet<Vec<u8>> =
        cm.belief.entries.iter().map(|(c, _)| c.clone()).collect();
    let mut frontier: Vec<Vec<u8>> = configs.iter().cloned().collect();
    let mut crash_reachable = false;
    while let Some(cfg) = frontier.pop() {
        for action in &actions {
            match apply_action(&cm.programs, &cfg, action)? {
                ActionEffect::MachineCrashed => crash_reachable = true,
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
    let controlled_local = configs.len();
    let crashed_local = crash_reachable.then_some(configs.len() + 1);
    let locals = configs.len() + 1 + usize::from(crash_reachable);
    Ok(MachineSlot {
        machine: cm,
        configs,
        controlled_local,
        crashed_local,
        locals,
        actions,
    })
}

/// Encodes the whole scenario as one explicit POMDP, refusing when the
/// product state space exceeds `cap`.
pub fn create_global_pomdp(sc: &CompiledScenario, cap: u64) -> Result<PomdpModel> {
    let slots: Vec<MachineSlot> = sc
        .machines
        .values()
        .map(|cm| build_slot(&sc.net, cm))
        .collect::<Result<_>>()?;

    let mut size: u128 = 1;
    for slot in &slots {
        size = size.saturating_mul(slot.locals as u128);
    }
    size = size.saturating_add(1); // terminal
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    let n_states = size as usize;
    let terminal = n_states - 1;

    let strides: Vec<usize> = {
        let mut strides = vec![0usize; slots.len()];
        let mut acc = 1usize;
        for (i, slot) in slots.iter().enumerate() {
            strides[i] = acc;
            acc *= slot.locals;
        }
        strides
    };
    let decode = |state: usize| -> Vec<usize> {
        slots
            .iter()
            .enumerate()
            .map(|(i, slot)| state / strides[i] % slot.locals)
            .collect()
    };

    let mut state_names = Vec::with_capacity(n_states);
    for s in 0..terminal {
        let locals = decode(s);
        let parts: Vec<String> = slots
            .iter()
            .zip(&locals)
            .map(|(slot, &l)| {
                let desc = if l == slot.controlled_local {
                    "controlled".to_string()
                } else if Some(l) == slot.crashed_local {
                    "crashed".to_string()
                } else {
                    slot.configs[l]
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(".")
                };
                format!("{}[{desc}]", slot.machine.id)
            })
            .collect();
        state_names.push(parts.join("|"));
    }
    state_names.push("terminal".to_string());

    let obs_names =
        observation_alphabet(slots.iter().flat_map(|slot| slot.actions.iter().copied()));
    let obs_of = |name: &str| -> u16 {
        obs_names
            .iter()
            .position(|o| o == name)
            .expect("alphabet covers emitted observations") as u16
    };

    let mut action_names: Vec<String> = Vec::new();
    let mut action_owner: Vec<(usize, &ActionSpec)> = Vec::new();
    let mut time_cost = Vec::new();
    let mut detect_cost = Vec::new();
    for (i, slot) in slots.iter().enumerate() {
        for action in &slot.actions {
            action_names.push(format!("{}:{}", slot.machine.id, action.name));
            action_owner.push((i, action));
            time_cost.push(action.time_cost);
            detect_cost.push(action.detect_cost);
        }
    }
    action_names.push(ACTION_TERMINATE.to_string());
    time_cost.push(0.0);
    detect_cost.push(0.0);
    let terminate = action_names.len() - 1;

    let mut controlled_rank = vec![0u32; n_states];
    for (s, rank) in controlled_rank.iter_mut().enumerate().take(terminal) {
        let locals = decode(s);
        *rank = slots
            .iter()
            .zip(&locals)
            .filter(|(slot, &l)| l == slot.controlled_local)
            .count() as u32;
    }

    let mut outcomes: Vec<Vec<Outcome>> = Vec::with_capacity(action_names.len());
    let none_obs = obs_of(OBS_NONE);
    for &(mi, action) in &action_owner {
        let mut per_state = Vec::with_capacity(n_states);
        for s in 0..n_states {
            if s == terminal {
                per_state.push(Outcome { next: terminal as u32, obs: none_obs, gain: 0.0 });
                continue;
            }
            let locals = decode(s);
            let slot = &slots[mi];
            let local = locals[mi];
            let out = if local == slot.controlled_local {
                Outcome { next: s as u32, obs: none_obs, gain: 0.0 }
            } else if Some(local) == slot.crashed_local {
                Outcome { next: s as u32, obs: obs_of(OBS_CRASHED), gain: 0.0 }
            } else {
                let controlled_subnets: BTreeSet<SubnetId> = std::iter::once(sc.net.root().clone())
                    .chain(slots.iter().zip(&locals).filter_map(|(sl, &l)| {
                        (l == sl.controlled_local).then(|| sl.machine.subnet.clone())
                    }))
                    .collect();
                let port = action.port(&slot.machine.programs);
                if !usable_through(&sc.net, &controlled_subnets, &slot.machine.subnet, port) {
                    Outcome { next: s as u32, obs: none_obs, gain: 0.0 }
                } else {
                    let cfg = &slot.configs[local];
                    match apply_action(&slot.machine.programs, cfg, action)? {
                        ActionEffect::Exploited => Outcome {
                            next: (s + (slot.controlled_local - local) * strides[mi]) as u32,
                            obs: obs_of(OBS_SUCCEEDED),
                            gain: slot.machine.value,
                        },
                        ActionEffect::ExploitFailed => {
                            Outcome { next: s as u32, obs: obs_of(OBS_FAILED), gain: 0.0 }
                        }
                        ActionEffect::MachineCrashed => {
                            let crashed = slot.crashed_local.expect("crash precomputed");
                            Outcome {
                                next: (s + (crashed - local) * strides[mi]) as u32,
                                obs: obs_of(OBS_CRASHED),
                                gain: 0.0,
                            }
                        }
                        ActionEffect::ProgramCrashed { new_cfg } => {
                            let to = slot.config_local(&new_cfg);
                            let next = s - local * strides[mi] + to * strides[mi];
                            Outcome { next: next as u32, obs: obs_of(OBS_CRASHED), gain: 0.0 }
                        }
                        ActionEffect::Observed(obs) => {
                            Outcome { next: s as u32, obs: obs_of(&obs), gain: 0.0 }
                        }
                    }
                }
            };
            per_state.push(out);
        }
        outcomes.push(per_state);
    }
    outcomes.push(
        (0..n_states)
            .map(|_| Outcome { next: terminal as u32, obs: none_obs, gain: 0.0 })
            .collect(),
    );

    // initial belief: product of the per-machine beliefs
    let mut entries: Vec<(u32, f64)> = vec![(0, 1.0)];
    for (i, slot) in slots.iter().enumerate() {
        let mut next = Vec::with_capacity(entries.len() * slot.machine.belief.entries.len());
        for &(base, mass) in &entries {
            for (cfg, p) in &slot.machine.belief.entries {
                let local = slot.config_local(cfg);
                next.push((base + (local * strides[i]) as u32, mass * p));
            }
        }
        entries = next;
    }

    PomdpModel::new(
        state_names,
        action_names,
        obs_names,
        terminal,
        terminate,
        controlled_rank,
        outcomes,
        time_cost,
        detect_cost,
        Belief::new(entries)?,
    )
}
