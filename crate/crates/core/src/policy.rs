//! Name-based, serializable form of a solved policy.
//!
//! Solver policies are index-based trees sharing subtrees through `Arc`. For
//! files and for executing against scenario semantics they are flattened
//! into a node table keyed by action and observation names, with shared
//! subtrees stored once.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{PolicyNode, PomdpModel};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyTableNode {
    pub action: String,
    /// Observation name → node index.
    #[serde(default)]
    pub children: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyTable {
    pub nodes: Vec<PolicyTableNode>,
    pub root: usize,
}

impl PolicyTable {
    pub fn from_model_policy(model: &PomdpModel, policy: &Arc<PolicyNode>) -> PolicyTable {
        let mut nodes = Vec::new();
        let mut seen: HashMap<*const PolicyNode, usize> = HashMap::new();
        let root = intern(model, policy, &mut nodes, &mut seen);
        PolicyTable { nodes, root }
    }

    pub fn terminate_only() -> PolicyTable {
        PolicyTable {
            nodes: vec![PolicyTableNode {
                action: crate::machine::ACTION_TERMINATE.to_string(),
                children: Vec::new(),
            }],
            root: 0,
        }
    }

    pub fn node(&self, id: usize) -> Result<&PolicyTableNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::HarnessBug(format!("policy node {id} out of range")))
    }

    pub fn child_of(&self, node: &PolicyTableNode, obs: &str) -> Option<usize> {
        node.children
            .iter()
            .find(|(o, _)| o == obs)
            .map(|(_, id)| *id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.root >= self.nodes.len() {
            return Err(Error::InvalidInput("policy root out of range".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for (_, child) in &node.children {
                if *child >= self.nodes.len() {
                    return Err(Error::InvalidInput(format!(
                        "policy node {i} points past the table"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn intern(
    model: &PomdpModel,
    node: &Arc<PolicyNode>,
    nodes: &mut Vec<PolicyTableNode>,
    seen: &mut HashMap<*const PolicyNode, usize>,
) -> usize {
    let key = Arc::as_ptr(node);
    if let Some(&id) = seen.get(&key) {
        return id;
    }
    let children: Vec<(String, usize)> = node
        .children()
        .iter()
        .map(|(obs, child)| {
            (
                model.obs_names[*obs as usize].clone(),
                intern(model, child, nodes, seen),
            )
        })
        .collect();
    let id = nodes.len();
    nodes.push(PolicyTableNode {
        action: model.action_names[node.action].clone(),
        children,
    });
    seen.insert(key, id);
    id
}
