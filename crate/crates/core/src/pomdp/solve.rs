//! Exact solver: AND/OR search over the belief tree with memoization.
//!
//! Branches on actions (OR) and observations (AND). The available-action set
//! shrinks by the taken action along every branch, which bounds the tree
//! depth by the number of actions; with deterministic outcomes, repeating an
//! action through the same firewall yields no new effect or information, so
//! the restriction loses nothing.
//!
//! Beliefs are kept *unnormalized* during the search: deterministic
//! observations act as 0/1 filters, so a node's weights are exact sums of
//! initial-belief entries and are bit-identical no matter in which order the
//! actions were applied. That makes the memo key — the support with raw
//! weight bits, plus the available-action mask — canonical across action
//! orderings. Keys are stored as 128-bit content hashes.

use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{PolicyNode, PomdpModel};

/// Hard bound on the action count; the available-action set is a `u128` mask.
pub const SOLVER_ACTION_LIMIT: usize = 128;

#[derive(Debug, Clone)]
pub struct Solution {
    pub value: f64,
    pub policy: Arc<PolicyNode>,
}

/// Optimal expected total reward over no-repeat conditional plans, with an
/// optimal policy. Ties between equal-valued actions break lexicographically
/// by action name; giving up wins ties against acting.
pub fn solve_exact(model: &PomdpModel) -> Result<Solution> {
    let n_actions = model.n_actions();
    if n_actions > SOLVER_ACTION_LIMIT {
        return Err(Error::TooManyActions {
            count: n_actions,
            limit: SOLVER_ACTION_LIMIT,
        });
    }
    let mut order: Vec<usize> = (0..n_actions).filter(|&a| a != model.terminate).collect();
    order.sort_by(|&a, &b| model.action_names[a].cmp(&model.action_names[b]));

    let root: Vec<(u32, f64)> = model
        .initial_belief
        .entries()
        .iter()
        .map(|&(s, p)| (s, p))
        .collect();

    // Permanently drop actions that are observationless no-ops on every state
    // reachable from the initial support: they can never act or inform.
    let reachable = reachable_states(model, &root);
    let mut avail: u128 = 0;
    for &a in &order {
        let mut shared_obs = None;
        let useless = reachable.iter().all(|&s| {
            let o = model.outcome(s as usize, a);
            if o.next != s || o.gain != 0.0 {
                return false;
            }
            match shared_obs {
                None => {
                    shared_obs = Some(o.obs);
                    true
                }
                Some(prev) => prev == o.obs,
            }
        });
        if !useless {
            avail |= 1 << a;
        }
    }

    let mut solver = Solver {
        model,
        order,
        memo: HashMap::new(),
    };
    let solved = solver.solve(root, avail);
    Ok(Solution {
        value: solved.value,
        policy: solved.policy,
    })
}

fn reachable_states(model: &PomdpModel, support: &[(u32, f64)]) -> Vec<u32> {
    let mut seen = vec![false; model.n_states()];
    let mut stack: Vec<u32> = support.iter().map(|&(s, _)| s).collect();
    for &s in &stack {
        seen[s as usize] = true;
    }
    while let Some(s) = stack.pop() {
        for a in 0..model.n_actions() {
            let next = model.outcome(s as usize, a).next;
            if !seen[next as usize] {
                seen[next as usize] = true;
                stack.push(next);
            }
        }
    }
    (0..model.n_states() as u32)
        .filter(|&s| seen[s as usize])
        .collect()
}

#[derive(Clone)]
struct Solved {
    value: f64,
    policy: Arc<PolicyNode>,
}

struct Solver<'m> {
    model: &'m PomdpModel,
    /// Non-terminate actions sorted by name, for deterministic tie-breaking.
    order: Vec<usize>,
    memo: HashMap<(u64, u64), Solved>,
}

impl Solver<'_> {
    fn solve(&mut self, support: Vec<(u32, f64)>, avail: u128) -> Solved {
        let key = fingerprint(&support, avail);
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }

        let mass: f64 = support.iter().map(|(_, w)| w).sum();
        let mut best_value = 0.0;
        let mut best: Option<(usize, Vec<(u16, Arc<PolicyNode>)>)> = None;

        for idx in 0..self.order.len() {
            let a = self.order[idx];
            if avail & (1 << a) == 0 {
                continue;
            }
            // Playing a support-wide no-op now is weakly dominated by playing
            // it later (it stays available below), so don't branch on it here.
            if self.noop_on_support(&support, a) {
                continue;
            }
            let mut immediate = 0.0;
            // observation buckets keep the support's canonical order
            let mut buckets: Vec<(u16, Vec<(u32, f64)>)> = Vec::new();
            for &(s, w) in &support {
                immediate += w * self.model.reward(s as usize, a);
                let out = self.model.outcome(s as usize, a);
                match buckets.iter_mut().find(|(o, _)| *o == out.obs) {
                    Some((_, list)) => list.push((out.next, w)),
                    None => buckets.push((out.obs, vec![(out.next, w)])),
                }
            }
            buckets.sort_by_key(|(o, _)| *o);

            let mut q = immediate / mass;
            let mut children = Vec::with_capacity(buckets.len());
            for (obs, mut list) in buckets {
                // merge entries that moved to the same state, stably
                list.sort_by_key(|(s, _)| *s);
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(list.len());
                for (s, w) in list {
                    match merged.last_mut() {
                        Some((last, acc)) if *last == s => *acc += w,
                        _ => merged.push((s, w)),
                    }
                }
                let branch_mass: f64 = merged.iter().map(|(_, w)| w).sum();
                let child = self.solve(merged, avail & !(1 << a));
                q += (branch_mass / mass) * child.value;
                children.push((obs, child.policy));
            }
            if q > best_value {
                best_value = q;
                best = Some((a, children));
            }
        }

        let policy = match best {
            Some((action, children)) => Arc::new(PolicyNode::with_children(action, children)),
            None => Arc::new(PolicyNode::leaf(self.model.terminate)),
        };
        let solved = Solved {
            value: best_value,
            policy,
        };
        self.memo.insert(key, solved.clone());
        solved
    }

    /// No state change, no gain, and one shared observation across the whole
    /// support: the action neither acts nor informs at this node.
    fn noop_on_support(&self, support: &[(u32, f64)], a: usize) -> bool {
        let mut first_obs = None;
        for &(s, _) in support {
            let o = self.model.outcome(s as usize, a);
            if o.next != s || o.gain != 0.0 {
                return false;
            }
            match first_obs {
                None => first_obs = Some(o.obs),
                Some(prev) if prev != o.obs => return false,
                _ => {}
            }
        }
        true
    }
}

/// 128-bit content hash of a search node. A collision would corrupt the memo,
/// but at well under 2^30 nodes per solve the chance is negligible.
fn fingerprint(support: &[(u32, f64)], avail: u128) -> (u64, u64) {
    let mut lo = std::collections::hash_map::DefaultHasher::new();
    let mut hi = std::collections::hash_map::DefaultHasher::new();
    hi.write_u64(0x9e3779b97f4a7c15);
    lo.write_u128(avail);
    hi.write_u128(avail);
    for &(s, w) in support {
        lo.write_u32(s);
        lo.write_u64(w.to_bits());
        hi.write_u64(w.to_bits().rotate_left(17));
        hi.write_u32(s ^ 0xa5a5_a5a5);
    }
    (lo.finish(), hi.finish())
}

#[cfg(test)]
mod tests {
    use super::super::testutil::one_exploit_model;
    use super::super::{evaluate_policy, Belief, Outcome, PomdpModel};
    use super::*;

    #[test]
    fn terminate_only_value_is_zero() {
        let model = PomdpModel::new(
            vec!["terminal".into(), "s".into()],
            vec!["terminate".into()],
            vec!["none".into()],
            0,
            0,
            vec![0, 0],
            vec![vec![
                Outcome { next: 0, obs: 0, gain: 0.0 },
                Outcome { next: 0, obs: 0, gain: 0.0 },
            ]],
            vec![0.0],
            vec![0.0],
            Belief::point(1),
        )
        .unwrap();
        let sol = solve_exact(&model).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.policy.action, model.terminate);
    }

    #[test]
    fn one_step_analytic_value() {
        // p = 0.2, R = 1000, c = 10 ⇒ value 190
        let model = one_exploit_model(0.2, 1000.0, 10.0);
        let sol = solve_exact(&model).unwrap();
        assert!((sol.value - 190.0).abs() < 1e-9);
        // and with a hopeless exploit the solver gives up at 0
        let bad = one_exploit_model(0.005, 1000.0, 10.0);
        let sol = solve_exact(&bad).unwrap();
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn policy_value_matches_solver_value() {
        let model = one_exploit_model(0.37, 800.0, 25.0);
        let sol = solve_exact(&model).unwrap();
        let eval = evaluate_policy(&model, &sol.policy).unwrap();
        assert!((eval - sol.value).abs() < 1e-9);
        assert!(sol.policy.respects_no_repeat());
    }

    /// Rebuilds a model without the named action.
    fn drop_action(model: &PomdpModel, name: &str) -> PomdpModel {
        let victim = model.action_index(name).unwrap();
        assert_ne!(victim, model.terminate);
        let keep: Vec<usize> = (0..model.n_actions()).filter(|&a| a != victim).collect();
        let terminate = keep.iter().position(|&a| a == model.terminate).unwrap();
        PomdpModel::new(
            model.state_names.clone(),
            keep.iter().map(|&a| model.action_names[a].clone()).collect(),
            model.obs_names.clone(),
            model.terminal,
            terminate,
            model.controlled_rank.clone(),
            keep.iter()
                .map(|&a| (0..model.n_states()).map(|s| model.outcome(s, a)).collect())
                .collect(),
            keep.iter().map(|&a| model.time_cost[a]).collect(),
            keep.iter().map(|&a| model.detect_cost[a]).collect(),
            model.initial_belief.clone(),
        )
        .unwrap()
    }

    #[test]
    fn removing_an_action_never_raises_the_value() {
        // two-exploit model: dropping either exploit can only hurt
        let model = two_exploit_model();
        let full = solve_exact(&model).unwrap().value;
        for name in ["exploit_a", "exploit_b"] {
            let shrunk = drop_action(&model, name);
            let v = solve_exact(&shrunk).unwrap().value;
            assert!(v <= full + 1e-12, "dropping {name}: {v} > {full}");
        }
        let bare = drop_action(&drop_action(&model, "exploit_a"), "exploit_b");
        assert_eq!(solve_exact(&bare).unwrap().value, 0.0);
    }

    fn two_exploit_model() -> PomdpModel {
        // states: terminal, controlled, both-vulnerable, only-b, neither
        let outcome = |next: u32, obs: u16, gain: f64| Outcome { next, obs, gain };
        PomdpModel::new(
            vec![
                "terminal".into(),
                "controlled".into(),
                "both".into(),
                "only_b".into(),
                "neither".into(),
            ],
            vec!["exploit_a".into(), "exploit_b".into(), "terminate".into()],
            vec!["none".into(), "succeeded".into(), "failed".into()],
            0,
            2,
            vec![0, 1, 0, 0, 0],
            vec![
                vec![
                    outcome(0, 0, 0.0),
                    outcome(1, 0, 0.0),
                    outcome(1, 1, 700.0),
                    outcome(3, 2, 0.0),
                    outcome(4, 2, 0.0),
                ],
                vec![
                    outcome(0, 0, 0.0),
                    outcome(1, 0, 0.0),
                    outcome(1, 1, 700.0),
                    outcome(1, 1, 700.0),
                    outcome(4, 2, 0.0),
                ],
                vec![outcome(0, 0, 0.0); 5],
            ],
            vec![-25.0, -40.0, 0.0],
            vec![0.0, 0.0, 0.0],
            Belief::new(vec![(2, 0.3), (3, 0.3), (4, 0.4)]).unwrap(),
        )
        .unwrap()
    }
}
