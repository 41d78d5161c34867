//! Brute-force oracle: exhaustive expectimax over all observation-contingent
//! no-repeat plans, with dense beliefs and no memoization or pruning. Kept
//! deliberately independent of the solver's data structures so the two can
//! cross-check each other.

use crate::error::{Error, Result};

use super::PomdpModel;

const ACTION_GUARD: usize = 7;

/// Maximum expected total reward over all no-repeat plans. Refuses models
/// with more than seven actions; the recursion has no shortcuts by design.
pub fn brute_force_value(model: &PomdpModel) -> Result<f64> {
    if model.n_actions() > ACTION_GUARD {
        return Err(Error::BruteForceGuard {
            count: model.n_actions(),
            guard: ACTION_GUARD,
        });
    }
    let mut belief = vec![0.0; model.n_states()];
    for &(s, p) in model.initial_belief.entries() {
        belief[s as usize] = p;
    }
    let mut used = vec![false; model.n_actions()];
    used[model.terminate] = true;
    Ok(enumerate(model, &belief, &mut used))
}

fn enumerate(model: &PomdpModel, belief: &[f64], used: &mut [bool]) -> f64 {
    let mut best = 0.0; // terminate
    for a in 0..model.n_actions() {
        if used[a] {
            continue;
        }
        let mut q = 0.0;
        for (s, &p) in belief.iter().enumerate() {
            if p > 0.0 {
                q += p * model.reward(s, a);
            }
        }
        for o in 0..model.n_obs() {
            let mut p_obs = 0.0;
            let mut next = vec![0.0; model.n_states()];
            for (s, &p) in belief.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let out = model.outcome(s, a);
                if out.obs as usize == o {
                    p_obs += p;
                    next[out.next as usize] += p;
                }
            }
            if p_obs > 0.0 {
                for x in &mut next {
                    *x /= p_obs;
                }
                used[a] = true;
                q += p_obs * enumerate(model, &next, used);
                used[a] = false;
            }
        }
        if q > best {
            best = q;
        }
    }
    best
}
