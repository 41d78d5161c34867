//! Flat explicit dump of a model, for debugging and round-trip checks.
//!
//! Line-oriented text:
//!
//! ```text
//! pomdp 1
//! states <N>
//! <name> <controlled_rank>        (N lines)
//! actions <M>
//! <name> <time_cost> <detect_cost> (M lines)
//! observations <K>
//! <name>                           (K lines)
//! terminal <index>
//! terminate <index>
//! transitions
//! <state> <action> <next> <obs> <gain>   (N*M lines)
//! belief <L>
//! <state> <probability>            (L lines)
//! end
//! ```
//!
//! Floats print in Rust's shortest round-trip form, so `parse_model ∘
//! dump_model` reproduces every value bit-exactly. Names must be free of
//! whitespace.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{Belief, Outcome, PomdpModel};

pub fn dump_model(model: &PomdpModel) -> Result<String> {
    for name in model
        .state_names
        .iter()
        .chain(&model.action_names)
        .chain(&model.obs_names)
    {
        if name.chars().any(char::is_whitespace) || name.is_empty() {
            return Err(Error::InvalidInput(format!(
                "cannot dump name containing whitespace: '{name}'"
            )));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "pomdp 1");
    let _ = writeln!(out, "states {}", model.n_states());
    for (s, name) in model.state_names.iter().enumerate() {
        let _ = writeln!(out, "{name} {}", model.controlled_rank[s]);
    }
    let _ = writeln!(out, "actions {}", model.n_actions());
    for (a, name) in model.action_names.iter().enumerate() {
        let _ = writeln!(out, "{name} {} {}", model.time_cost[a], model.detect_cost[a]);
    }
    let _ = writeln!(out, "observations {}", model.n_obs());
    for name in &model.obs_names {
        let _ = writeln!(out, "{name}");
    }
    let _ = writeln!(out, "terminal {}", model.terminal);
    let _ = writeln!(out, "terminate {}", model.terminate);
    let _ = writeln!(out, "transitions");
    for s in 0..model.n_states() {
        for a in 0..model.n_actions() {
            let o = model.outcome(s, a);
            let _ = writeln!(out, "{s} {a} {} {} {}", o.next, o.obs, o.gain);
        }
    }
    let _ = writeln!(out, "belief {}", model.initial_belief.entries().len());
    for &(s, p) in model.initial_belief.entries() {
        let _ = writeln!(out, "{s} {p}");
    }
    let _ = writeln!(out, "end");
    Ok(out)
}

pub fn parse_model(text: &str) -> Result<PomdpModel> {
    let mut lines = text.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Parse(format!("unexpected end of dump, expected {what}")))
    };
    let fail = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));

    let (ln, header) = next_line("header")?;
    if header.trim() != "pomdp 1" {
        return Err(fail(ln, "expected header 'pomdp 1'"));
    }

    fn counted(line: usize, text: &str, key: &str) -> Result<usize> {
        let mut it = text.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(n), None) if k == key => n
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad {key} count"))),
            _ => Err(Error::Parse(format!("line {line}: expected '{key} <n>'"))),
        }
    }

    let (ln, l) = next_line("states")?;
    let n_states = counted(ln, l, "states")?;
    let mut state_names = Vec::with_capacity(n_states);
    let mut controlled_rank = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let (ln, l) = next_line("state")?;
        let mut it = l.split_whitespace();
        let name = it.next().ok_or_else(|| fail(ln, "missing state name"))?;
        let rank: u32 = it
            .next()
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| fail(ln, "missing controlled rank"))?;
        state_names.push(name.to_string());
        controlled_rank.push(rank);
    }

    let (ln, l) = next_line("actions")?;
    let n_actions = counted(ln, l, "actions")?;
    let mut action_names = Vec::with_capacity(n_actions);
    let mut time_cost = Vec::with_capacity(n_actions);
    let mut detect_cost = Vec::with_capacity(n_actions);
    for _ in 0..n_actions {
        let (ln, l) = next_line("action")?;
        let mut it = l.split_whitespace();
        let name = it.next().ok_or_else(|| fail(ln, "missing action name"))?;
        let tc: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| fail(ln, "missing time cost"))?;
        let dc: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| fail(ln, "missing detect cost"))?;
        action_names.push(name.to_string());
        time_cost.push(tc);
        detect_cost.push(dc);
    }

    let (ln, l) = next_line("observations")?;
    let n_obs = counted(ln, l, "observations")?;
    let mut obs_names = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let (ln, l) = next_line("observation")?;
        let name = l.trim();
        if name.is_empty() {
            return Err(fail(ln, "empty observation name"));
        }
        obs_names.push(name.to_string());
    }

    let (ln, l) = next_line("terminal")?;
    let terminal = counted(ln, l, "terminal")?;
    let (ln, l) = next_line("terminate")?;
    let terminate = counted(ln, l, "terminate")?;

    let (ln, l) = next_line("transitions")?;
    if l.trim() != "transitions" {
        return Err(fail(ln, "expected 'transitions'"));
    }
    let mut outcomes =
        vec![vec![Outcome { next: 0, obs: 0, gain: 0.0 }; n_states]; n_actions];
    for _ in 0..n_states * n_actions {
        let (ln, l) = next_line("transition")?;
        let mut it = l.split_whitespace();
        let mut field = |what: &str| -> Result<&str> {
            it.next().ok_or_else(|| fail(ln, what))
        };
        let s: usize = field("state")?.parse().map_err(|_| fail(ln, "bad state"))?;
        let a: usize = field("action")?.parse().map_err(|_| fail(ln, "bad action"))?;
        let next: u32 = field("next")?.parse().map_err(|_| fail(ln, "bad next"))?;
        let obs: u16 = field("obs")?.parse().map_err(|_| fail(ln, "bad obs"))?;
        let gain: f64 = field("gain")?.parse().map_err(|_| fail(ln, "bad gain"))?;
        if s >= n_states || a >= n_actions {
            return Err(fail(ln, "transition index out of range"));
        }
        outcomes[a][s] = Outcome { next, obs, gain };
    }

    let (ln, l) = next_line("belief")?;
    let n_belief = counted(ln, l, "belief")?;
    let mut entries = Vec::with_capacity(n_belief);
    for _ in 0..n_belief {
        let (ln, l) = next_line("belief entry")?;
        let mut it = l.split_whitespace();
        let s: u32 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| fail(ln, "bad belief state"))?;
        let p: f64 = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| fail(ln, "bad belief probability"))?;
        entries.push((s, p));
    }
    let (ln, l) = next_line("end")?;
    if l.trim() != "end" {
        return Err(fail(ln, "expected 'end'"));
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

#[cfg(test)]
mod tests {
    use super::super::testutil::one_exploit_model;
    use super::*;

    fn models_equal(a: &PomdpModel, b: &PomdpModel) -> bool {
        a.state_names == b.state_names
            && a.action_names == b.action_names
            && a.obs_names == b.obs_names
            && a.terminal == b.terminal
            && a.terminate == b.terminate
            && a.controlled_rank == b.controlled_rank
            && a.time_cost.iter().zip(&b.time_cost).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.detect_cost.iter().zip(&b.detect_cost).all(|(x, y)| x.to_bits() == y.to_bits())
            && (0..a.n_states()).all(|s| {
                (0..a.n_actions()).all(|act| {
                    let (x, y) = (a.outcome(s, act), b.outcome(s, act));
                    x.next == y.next && x.obs == y.obs && x.gain.to_bits() == y.gain.to_bits()
                })
            })
            && a.initial_belief
                .entries()
                .iter()
                .zip(b.initial_belief.entries())
                .all(|((s, p), (t, q))| s == t && p.to_bits() == q.to_bits())
    }

    #[test]
    fn round_trip_is_bit_exact() {
        // awkward probabilities exercise the shortest-float printing
        let model = one_exploit_model(0.1 + 0.2 / 3.0, 997.25, 9.99999999);
        let text = dump_model(&model).unwrap();
        let back = parse_model(&text).unwrap();
        assert!(models_equal(&model, &back));
        // a second trip is a fixed point
        assert_eq!(text, dump_model(&back).unwrap());
    }

    #[test]
    fn truncated_dump_errors() {
        let model = one_exploit_model(0.5, 10.0, 1.0);
        let text = dump_model(&model).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(parse_model(cut).is_err());
    }
}
