//! Software-update model: per-program Markov chains filtered through a
//! dependency DAG, yielding the initial belief over machine configurations.
//!
//! Each program evolves independently by a daily Markov chain over its
//! versions. A compatibility predicate restricts which child versions can
//! coexist with given parent versions; the chain distribution is renormalized
//! over the compatible set per parent assignment. Propagating every chain for
//! the number of days since the last known snapshot gives an exact joint
//! distribution, enumerated program by program in dependency order.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass below this threshold is dropped from enumerated joint distributions.
pub const BELIEF_PRUNE_EPS: f64 = 1e-12;

/// Daily update chain over a program's versions. Rows are source versions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramChain {
    pub program: String,
    pub versions: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

impl ProgramChain {
    pub fn new(program: impl Into<String>, versions: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let chain = ProgramChain {
            program: program.into(),
            versions,
            matrix,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.versions.len();
        if n == 0 {
            return Err(Error::InvalidInput(format!(
                "chain '{}' has no versions",
                self.program
            )));
        }
        if self.matrix.len() != n {
            return Err(Error::InvalidInput(format!(
                "chain '{}': expected {n} matrix rows, got {}",
                self.program,
                self.matrix.len()
            )));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "chain '{}' row '{}': expected {n} entries",
                    self.program, self.versions[i]
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!(
                    "chain '{}' row '{}': probability outside [0,1]",
                    self.program, self.versions[i]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "chain '{}' row '{}': row sums to {sum}, not 1",
                    self.program, self.versions[i]
                )));
            }
        }
        Ok(())
    }

    pub fn version_index(&self, version: &str) -> Result<usize> {
        self.versions
            .iter()
            .position(|v| v == version)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "chain '{}' has no version '{version}'",
                    self.program
                ))
            })
    }
}

/// Exact distribution over versions after `days` daily steps from `start`.
/// Zero days returns a point mass on the start version.
pub fn propagate_chain(chain: &ProgramChain, start: &str, days: u32) -> Result<Vec<f64>> {
    let idx = chain.version_index(start)?;
    let n = chain.versions.len();
    let mut dist = vec![0.0; n];
    dist[idx] = 1.0;
    for _ in 0..days {
        let mut next = vec![0.0; n];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in chain.matrix[i].iter().enumerate() {
                next[j] += p * q;
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// Compatible child versions for one exact assignment of parent versions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatRule {
    pub parents: BTreeMap<String, String>,
    pub allowed: BTreeSet<String>,
}

/// Chains plus the dependency DAG and compatibility tables.
#[derive(Debug, Clone, Default)]
pub struct UpdateModel {
    chains: BTreeMap<String, ProgramChain>,
    parents: BTreeMap<String, Vec<String>>,
    compat: BTreeMap<String, Vec<CompatRule>>,
}

impl UpdateModel {
    pub fn new(
        chains: Vec<ProgramChain>,
        parents: BTreeMap<String, Vec<String>>,
        compat: BTreeMap<String, Vec<CompatRule>>,
    ) -> Result<Self> {
        let model = UpdateModel {
            chains: chains.into_iter().map(|c| (c.program.clone(), c)).collect(),
            parents,
            compat,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn chain(&self, program: &str) -> Option<&ProgramChain> {
        self.chains.get(program)
    }

    pub fn parents_of(&self, program: &str) -> &[String] {
        self.parents.get(program).map(Vec::as_slice).unwrap_or(&[])
    }

    fn validate(&self) -> Result<()> {
        for chain in self.chains.values() {
            chain.validate()?;
        }
        for (child, ps) in &self.parents {
            if !self.chains.contains_key(child) {
                return Err(Error::InvalidInput(format!(
                    "dependency child '{child}' has no chain"
                )));
            }
            for p in ps {
                if !self.chains.contains_key(p) {
                    return Err(Error::InvalidInput(format!(
                        "dependency parent '{p}' of '{child}' has no chain"
                    )));
                }
            }
        }
        for (child, rules) in &self.compat {
            let chain = self.chains.get(child).ok_or_else(|| {
                Error::InvalidInput(format!("compatibility child '{child}' has no chain"))
            })?;
            let ps = self.parents_of(child);
            for rule in rules {
                for v in &rule.allowed {
                    chain.version_index(v)?;
                }
                for (p, v) in &rule.parents {
                    if !ps.contains(p) {
                        return Err(Error::InvalidInput(format!(
                            "compatibility rule for '{child}' names '{p}', which is not a parent"
                        )));
                    }
                    self.chains[p].version_index(v)?;
                }
            }
        }
        self.topo_order(self.chains.keys().cloned().collect())?;
        Ok(())
    }

    /// Topological order over the given programs (parents before children).
    pub fn topo_order(&self, programs: BTreeSet<String>) -> Result<Vec<String>> {
        let mut order = Vec::new();
        let mut mark: BTreeMap<&str, u8> = BTreeMap::new(); // 1 = visiting, 2 = done
        fn visit<'a>(
            model: &'a UpdateModel,
            programs: &BTreeSet<String>,
            p: &'a str,
            mark: &mut BTreeMap<&'a str, u8>,
            order: &mut Vec<String>,
        ) -> Result<()> {
            match mark.get(p) {
                Some(2) => return Ok(()),
                Some(1) => {
                    return Err(Error::InvalidInput(format!(
                        "dependency cycle through program '{p}'"
                    )))
                }
                _ => {}
            }
            mark.insert(p, 1);
            for parent in model.parents_of(p) {
                if !programs.contains(parent) {
                    return Err(Error::InvalidInput(format!(
                        "program '{p}' depends on '{parent}', which is not covered"
                    )));
                }
                visit(model, programs, parent, mark, order)?;
            }
            mark.insert(p, 2);
            order.push(p.to_string());
            Ok(())
        }
        let names: Vec<&str> = programs.iter().map(|s| s.as_str()).collect();
        for p in names {
            visit(self, &programs, p, &mut mark, &mut order)?;
        }
        Ok(order)
    }

    fn allowed_versions(&self, child: &str, assignment: &BTreeMap<&str, &str>) -> Option<&BTreeSet<String>> {
        let rules = self.compat.get(child)?;
        rules
            .iter()
            .find(|rule| {
                rule.parents
                    .iter()
                    .all(|(p, v)| assignment.get(p.as_str()) == Some(&v.as_str()))
            })
            .map(|rule| &rule.allowed)
    }
}

/// Last-pentest knowledge for a machine: exact versions at day zero plus the
/// days elapsed since.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotConfig {
    pub versions: BTreeMap<String, String>,
    pub days: u32,
}

/// Exact joint distribution over a machine's configurations.
///
/// `programs` is sorted; each entry pairs per-program version indices
/// (aligned with `programs` and the chains' version lists) with a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineBelief {
    pub programs: Vec<String>,
    pub entries: Vec<(Vec<u8>, f64)>,
}

impl MachineBelief {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &[u8] {
        let total = self.total_mass();
        let mut draw = rng.gen::<f64>() * total;
        for (cfg, p) in &self.entries {
            draw -= p;
            if draw <= 0.0 {
                return cfg;
            }
        }
        &self.entries.last().expect("non-empty belief").0
    }

    pub fn program_index(&self, program: &str) -> Option<usize> {
        self.programs.iter().position(|p| p == program)
    }
}

/// Forward inference through the dependency DAG: each program's propagated
/// chain distribution is restricted to versions compatible with its parents
/// and renormalized, then the joint is enumerated exactly.
pub fn build_initial_belief(model: &UpdateModel, snapshot: &SnapshotConfig) -> Result<MachineBelief> {
    let covered: BTreeSet<String> = snapshot.versions.keys().cloned().collect();
    for p in &covered {
        if model.chain(p).is_none() {
            return Err(Error::InvalidInput(format!(
                "snapshot program '{p}' has no chain"
            )));
        }
    }
    let topo = model.topo_order(covered.clone())?;

    // Per-program propagated marginals, in topo order.
    let mut marginals: Vec<(&str, Vec<f64>)> = Vec::with_capacity(topo.len());
    for p in &topo {
        let chain = model.chain(p).expect("validated above");
        let start = &snapshot.versions[p];
        marginals.push((p.as_str(), propagate_chain(chain, start, snapshot.days)?));
    }

    let canonical: Vec<String> = {
        let mut v: Vec<String> = topo.clone();
        v.sort();
        v
    };
    let topo_to_canonical: Vec<usize> = topo
        .iter()
        .map(|p| canonical.iter().position(|c| c == p).unwrap())
        .collect();

    let mut entries: Vec<(Vec<u8>, f64)> = Vec::new();
    let mut partial: Vec<u8> = vec![0; topo.len()];
    enumerate(
        model,
        &topo,
        &marginals,
        0,
        1.0,
        &mut partial,
        &topo_to_canonical,
        &mut entries,
    )?;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(MachineBelief {
        programs: canonical,
        entries,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    model: &UpdateModel,
    topo: &[String],
    marginals: &[(&str, Vec<f64>)],
    depth: usize,
    mass: f64,
    partial: &mut Vec<u8>,
    topo_to_canonical: &[usize],
    out: &mut Vec<(Vec<u8>, f64)>,
) -> Result<()> {
    if depth == topo.len() {
        if mass >= BELIEF_PRUNE_EPS {
            let mut cfg = vec![0u8; topo.len()];
            for (t, &c) in topo_to_canonical.iter().enumerate() {
                cfg[c] = partial[t];
            }
            out.push((cfg, mass));
        }
        return Ok(());
    }
    let program = &topo[depth];
    let chain = model.chain(program).expect("validated");
    let (_, dist) = &marginals[depth];

    let assignment: BTreeMap<&str, &str> = (0..depth)
        .map(|i| {
            let p = topo[i].as_str();
            let ver = model.chain(p).unwrap().versions[partial[i] as usize].as_str();
            (p, ver)
        })
        .collect();
    let allowed = model.allowed_versions(program, &assignment);

    let mut filtered: Vec<(usize, f64)> = dist
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            **p > 0.0
                && allowed
                    .map(|set| set.contains(&chain.versions[*i]))
                    .unwrap_or(true)
        })
        .map(|(i, p)| (i, *p))
        .collect();
    let norm: f64 = filtered.iter().map(|(_, p)| p).sum();
    if norm <= 0.0 {
        let described: Vec<String> = assignment
            .iter()
            .filter(|(p, _)| model.parents_of(program).iter().any(|q| q == **p))
            .map(|(p, v)| format!("{p}={v}"))
            .collect();
        return Err(Error::IncompatibleAssignment {
            child: program.clone(),
            assignment: format!("{{{}}}", described.join(", ")),
        });
    }
    for (_, p) in &mut filtered {
        *p /= norm;
    }

    for (version, p) in filtered {
        partial[depth] = version as u8;
        enumerate(
            model,
            topo,
            marginals,
            depth + 1,
            mass * p,
            partial,
            topo_to_canonical,
            out,
        )?;
    }
    Ok(())
}
