//! Explicit finite POMDP with deterministic per-state action outcomes.
//!
//! The problem class solved here is narrower than a general POMDP: every
//! `(state, action)` pair has exactly one successor state and one
//! observation, rewards are undiscounted, a `terminate` action leads to an
//! absorbing zero-reward terminal state, and repeating an action never pays
//! (deterministic outcomes make repeats uninformative). Those restrictions
//! make exact solving practical; see [`solve::solve_exact`].
//!
//! Rewards decompose as `gain + time_cost + detect_cost`: the gain is the
//! value of a break-in and is positive only on transitions that increase the
//! number of controlled machines; the two cost terms are per-action and
//! non-positive. No reward of any kind accrues in the terminal state.

mod brute;
mod dump;
mod solve;

pub use brute::brute_force_value;
pub use dump::{dump_model, parse_model};
pub use solve::{solve_exact, Solution, SOLVER_ACTION_LIMIT};

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Outcome of one `(state, action)` pair: deterministic successor,
/// observation, and break-in gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub next: u32,
    pub obs: u16,
    pub gain: f64,
}

#[derive(Debug, Clone)]
pub struct PomdpModel {
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
    pub obs_names: Vec<String>,
    pub terminal: usize,
    pub terminate: usize,
    /// Number of controlled machines represented by each state.
    pub controlled_rank: Vec<u32>,
    /// Per-action, per-state outcomes: `outcomes[action][state]`.
    outcomes: Vec<Vec<Outcome>>,
    /// Per-action duration cost, non-positive.
    pub time_cost: Vec<f64>,
    /// Per-action detection-risk cost, non-positive.
    pub detect_cost: Vec<f64>,
    pub initial_belief: Belief,
}

impl PomdpModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<String>,
        obs_names: Vec<String>,
        terminal: usize,
        terminate: usize,
        controlled_rank: Vec<u32>,
        outcomes: Vec<Vec<Outcome>>,
        time_cost: Vec<f64>,
        detect_cost: Vec<f64>,
        initial_belief: Belief,
    ) -> Result<Self> {
        let model = PomdpModel {
            state_names,
            action_names,
            obs_names,
            terminal,
            terminate,
            controlled_rank,
            outcomes,
            time_cost,
            detect_cost,
            initial_belief,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.obs_names.len()
    }

    pub fn outcome(&self, state: usize, action: usize) -> Outcome {
        self.outcomes[action][state]
    }

    /// Total reward of applying `action` in `state`. Nothing accrues in the
    /// terminal state.
    pub fn reward(&self, state: usize, action: usize) -> f64 {
        if state == self.terminal {
            0.0
        } else {
            self.outcomes[action][state].gain + self.time_cost[action] + self.detect_cost[action]
        }
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|a| a == name)
    }

    pub fn obs_index(&self, name: &str) -> Option<usize> {
        self.obs_names.iter().position(|o| o == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        let a = self.n_actions();
        let check = |cond: bool, msg: &str| -> Result<()> {
            if cond {
                Ok(())
            } else {
                Err(Error::ModelConstruction(msg.to_string()))
            }
        };
        check(n > 0 && a > 0, "model needs at least one state and action")?;
        check(self.terminal < n, "terminal state out of range")?;
        check(self.terminate < a, "terminate action out of range")?;
        check(self.controlled_rank.len() == n, "controlled_rank length mismatch")?;
        check(
            self.outcomes.len() == a && self.outcomes.iter().all(|per| per.len() == n),
            "outcome table shape mismatch",
        )?;
        check(
            self.time_cost.len() == a && self.detect_cost.len() == a,
            "cost table length mismatch",
        )?;
        for (ai, name) in self.action_names.iter().enumerate() {
            if self.time_cost[ai] > 0.0 || self.detect_cost[ai] > 0.0 {
                return Err(Error::ModelConstruction(format!(
                    "action '{name}': costs must be non-positive"
                )));
            }
            for s in 0..n {
                let o = self.outcomes[ai][s];
                if o.next as usize >= n || o.obs as usize >= self.n_obs() {
                    return Err(Error::ModelConstruction(format!(
                        "action '{name}' in state {s}: outcome out of range"
                    )));
                }
                if o.gain < 0.0 {
                    return Err(Error::ModelConstruction(format!(
                        "action '{name}' in state {s}: negative gain"
                    )));
                }
                if o.gain > 0.0
                    && self.controlled_rank[o.next as usize] <= self.controlled_rank[s]
                {
                    return Err(Error::ModelConstruction(format!(
                        "action '{name}' in state {s}: gain without entering a controlled state"
                    )));
                }
            }
            // terminal state is absorbing with all-zero rewards
            let term = self.outcomes[ai][self.terminal];
            check(
                term.next as usize == self.terminal && term.gain == 0.0,
                "terminal state must be absorbing with zero gain",
            )?;
        }
        // terminate maps every state to terminal at zero reward
        check(
            self.time_cost[self.terminate] == 0.0 && self.detect_cost[self.terminate] == 0.0,
            "terminate must have zero costs",
        )?;
        for s in 0..n {
            let o = self.outcomes[self.terminate][s];
            check(
                o.next as usize == self.terminal && o.gain == 0.0,
                "terminate must map every state to terminal with zero gain",
            )?;
        }
        for &(s, p) in self.initial_belief.entries() {
            check((s as usize) < n, "belief state out of range")?;
            check(p >= 0.0, "belief probabilities must be non-negative")?;
        }
        check(
            (self.initial_belief.total() - 1.0).abs() < 1e-9,
            "initial belief must sum to 1",
        )?;
        Ok(())
    }
}

/// Mass below this threshold is pruned when beliefs are normalized.
pub const BELIEF_PRUNE_EPS: f64 = 1e-12;

/// Sparse probability distribution over states, sorted by state index.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    entries: Vec<(u32, f64)>,
}

impl Belief {
    /// Normalizes, sorts, merges duplicates, and prunes near-zero mass.
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.iter().any(|(_, p)| *p < 0.0) {
            return Err(Error::InvalidInput("negative belief mass".into()));
        }
        entries.sort_by_key(|(s, _)| *s);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            match merged.last_mut() {
                Some((last, mass)) if *last == s => *mass += p,
                _ => merged.push((s, p)),
            }
        }
        let total: f64 = merged.iter().map(|(_, p)| p).sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("belief has zero total mass".into()));
        }
        let mut normalized: Vec<(u32, f64)> = merged
            .into_iter()
            .map(|(s, p)| (s, p / total))
            .filter(|(_, p)| *p >= BELIEF_PRUNE_EPS)
            .collect();
        let total: f64 = normalized.iter().map(|(_, p)| p).sum();
        for (_, p) in &mut normalized {
            *p /= total;
        }
        Ok(Belief { entries: normalized })
    }

    pub fn point(state: u32) -> Self {
        Belief {
            entries: vec![(state, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn prob(&self, state: u32) -> f64 {
        self.entries
            .binary_search_by_key(&state, |(s, _)| *s)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let mut draw = rng.gen::<f64>() * self.total();
        for (s, p) in &self.entries {
            draw -= p;
            if draw <= 0.0 {
                return *s;
            }
        }
        self.entries.last().expect("non-empty belief").0
    }
}

/// Bayes filter step: condition on having taken `action` and observed `obs`.
pub fn belief_update(
    belief: &Belief,
    action: usize,
    obs: usize,
    model: &PomdpModel,
) -> Result<Belief> {
    let mut posterior: Vec<(u32, f64)> = Vec::new();
    for &(s, p) in belief.entries() {
        let o = model.outcome(s as usize, action);
        if o.obs as usize == obs {
            posterior.push((o.next, p));
        }
    }
    if posterior.iter().map(|(_, p)| p).sum::<f64>() <= 0.0 {
        return Err(Error::ImpossibleObservation {
            action: model.action_names[action].clone(),
            observation: model.obs_names[obs].clone(),
        });
    }
    Belief::new(posterior)
}

/// Conditional plan node: an action plus one child per observation. A node
/// whose action is `terminate` is a leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNode {
    pub action: usize,
    children: Vec<(u16, Arc<PolicyNode>)>,
}

impl PolicyNode {
    pub fn leaf(action: usize) -> Self {
        PolicyNode {
            action,
            children: Vec::new(),
        }
    }

    pub fn with_children(action: usize, mut children: Vec<(u16, Arc<PolicyNode>)>) -> Self {
        children.sort_by_key(|(o, _)| *o);
        PolicyNode { action, children }
    }

    pub fn child(&self, obs: u16) -> Option<&Arc<PolicyNode>> {
        self.children
            .binary_search_by_key(&obs, |(o, _)| *o)
            .ok()
            .map(|i| &self.children[i].1)
    }

    pub fn children(&self) -> &[(u16, Arc<PolicyNode>)] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// True iff no action repeats on any root-to-leaf path.
    pub fn respects_no_repeat(&self) -> bool {
        fn walk(node: &PolicyNode, used: &mut Vec<usize>) -> bool {
            if used.contains(&node.action) {
                return false;
            }
            used.push(node.action);
            let ok = node.children.iter().all(|(_, c)| walk(c, used));
            used.pop();
            ok
        }
        walk(self, &mut Vec::new())
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.node_count())
            .sum::<usize>()
    }
}

/// Exact expected total reward of a policy: forward enumeration over the
/// initial belief's support, following the deterministic outcome tables.
pub fn evaluate_policy(model: &PomdpModel, policy: &PolicyNode) -> Result<f64> {
    let mut value = 0.0;
    for &(s0, p) in model.initial_belief.entries() {
        value += p * rollout_policy(model, policy, s0 as usize)?;
    }
    Ok(value)
}

/// Total reward of running the policy from one concrete state; deterministic
/// outcomes make this a plain walk down the tree.
pub fn rollout_policy(model: &PomdpModel, policy: &PolicyNode, start: usize) -> Result<f64> {
    let mut state = start;
    let mut node = policy;
    let mut total = 0.0;
    for _ in 0..=model.n_actions() + 1 {
        let a = node.action;
        total += model.reward(state, a);
        if a == model.terminate {
            return Ok(total);
        }
        let out = model.outcome(state, a);
        state = out.next as usize;
        match node.child(out.obs) {
            Some(next) => node = next,
            None => {
                return Err(Error::HarnessBug(format!(
                    "policy has no branch for observation '{}' after action '{}'",
                    model.obs_names[out.obs as usize], model.action_names[a]
                )))
            }
        }
    }
    Err(Error::HarnessBug(
        "policy rollout exceeded the action budget; repeated actions?".into(),
    ))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Tiny model: one exploit succeeding on a `vulnerable` state with
    /// probability baked into the belief. Value is `max(0, p*gain - cost)`.
    pub fn one_exploit_model(p: f64, gain: f64, cost: f64) -> PomdpModel {
        let states = vec![
            "terminal".to_string(),
            "controlled".to_string(),
            "vulnerable".to_string(),
            "safe".to_string(),
        ];
        let actions = vec!["exploit".to_string(), "terminate".to_string()];
        let obs = vec!["none".to_string(), "succeeded".to_string(), "failed".to_string()];
        let exploit = vec![
            Outcome { next: 0, obs: 0, gain: 0.0 },
            Outcome { next: 1, obs: 0, gain: 0.0 },
            Outcome { next: 1, obs: 1, gain },
            Outcome { next: 3, obs: 2, gain: 0.0 },
        ];
        let terminate = (0..4).map(|_| Outcome { next: 0, obs: 0, gain: 0.0 }).collect();
        PomdpModel::new(
            states,
            actions,
            obs,
            0,
            1,
            vec![0, 1, 0, 0],
            vec![exploit, terminate],
            vec![-cost, 0.0],
            vec![0.0, 0.0],
            Belief::new(vec![(2, p), (3, 1.0 - p)]).unwrap(),
        )
        .unwrap()
    }
}
