//! Scenario files: schema, validation, compilation, and generation.
//!
//! A scenario file is a single JSON document holding the logical network,
//! the program inventory (versions, flags, update chains, dependencies and
//! compatibility tables), per-machine snapshots with values, and the action
//! bank. [`ScenarioFile::from_json`] parses and validates it with
//! entity-level error messages; [`ScenarioFile::compile`] builds the beliefs
//! and per-machine action sets everything downstream consumes.
//!
//! [`generate_scenario`] builds the benchmark family: attack starts from an
//! internet node, three zones — Exposed and Sensitive as single fully
//! connected subnets, User as a tree of subnets behind empty firewalls — two
//! rewarded machines (9000 in Sensitive, 5000 in a User leaf), port scans
//! and exploits costing 10, OS detection costing 50, machines distributed
//! 1 Exposed / 1 Sensitive / 38 User per block of 40, and exploits drawn
//! from the 13-template bank in `fixtures/templates.json`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{ActionKind, ActionSpec, CrashScope, Gate, ProgramSpec, VersionSpec};
use crate::net::{Firewall, LogicalNetwork, MachineId, SubnetId, Subnetwork};
use crate::update::{
    build_initial_belief, CompatRule, MachineBelief, ProgramChain, SnapshotConfig, UpdateModel,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub elapsed_days: u32,
    pub network: NetworkSpec,
    pub programs: Vec<ProgramFileSpec>,
    pub machines: Vec<MachineSpec>,
    pub actions: Vec<ActionFileSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub root: String,
    pub subnets: Vec<SubnetSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubnetSpec {
    pub id: String,
    #[serde(default)]
    pub machines: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub blocked_ports: Vec<u16>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgramFileSpec {
    pub id: String,
    pub port: u16,
    pub versions: Vec<VersionSpec>,
    /// Row-stochastic daily update matrix over `versions`.
    pub chain: Vec<Vec<f64>>,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub compatibility: Vec<CompatFileSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatFileSpec {
    pub parents: BTreeMap<String, String>,
    pub allowed: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineSpec {
    pub id: String,
    #[serde(default)]
    pub value: f64,
    /// Program → version at the time of the last pentest.
    pub snapshot: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionFileSpec {
    pub name: String,
    /// "exploit", "port_scan", or "os_detect".
    pub kind: String,
    #[serde(default)]
    pub program: Option<String>,
    #[serde(default)]
    pub port: Option<u16>,
    #[serde(default)]
    pub requires: Vec<GateSpec>,
    #[serde(default)]
    pub classes: BTreeMap<String, String>,
    #[serde(default)]
    pub crash_scope: Option<String>,
    pub time_cost: f64,
    #[serde(default)]
    pub detect_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateSpec {
    pub program: String,
    pub versions: Vec<String>,
}

/// One machine, ready for model building: its subnet, value, sorted program
/// specs aligned with the belief, and the actions that target it.
#[derive(Debug, Clone)]
pub struct CompiledMachine {
    pub id: MachineId,
    pub subnet: SubnetId,
    pub value: f64,
    pub programs: Vec<ProgramSpec>,
    pub belief: MachineBelief,
    pub actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub net: LogicalNetwork,
    pub days: u32,
    pub machines: BTreeMap<MachineId, CompiledMachine>,
}

impl CompiledScenario {
    pub fn machine(&self, id: &str) -> Result<&CompiledMachine> {
        self.machines
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown machine '{id}'")))
    }

    pub fn total_reward_available(&self) -> f64 {
        self.machines.values().map(|m| m.value).sum()
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    fn validate(&self) -> Result<()> {
        let mut program_ids = BTreeSet::new();
        for p in &self.programs {
            if !program_ids.insert(p.id.as_str()) {
                return Err(Error::InvalidInput(format!("program '{}': duplicate id", p.id)));
            }
            if p.versions.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "program '{}': needs at least one version",
                    p.id
                )));
            }
            if p.port == 0 {
                return Err(Error::InvalidInput(format!(
                    "program '{}': port must be positive",
                    p.id
                )));
            }
            let names: BTreeSet<&str> = p.versions.iter().map(|v| v.name.as_str()).collect();
            if names.len() != p.versions.len() {
                return Err(Error::InvalidInput(format!(
                    "program '{}': duplicate version name",
                    p.id
                )));
            }
            for parent in &p.parents {
                if !self.programs.iter().any(|q| q.id == *parent) {
                    return Err(Error::InvalidInput(format!(
                        "program '{}': unknown parent '{parent}'",
                        p.id
                    )));
                }
            }
        }
        let program = |id: &str| self.programs.iter().find(|p| p.id == id);

        let mut machine_ids = BTreeSet::new();
        for m in &self.machines {
            if !machine_ids.insert(m.id.as_str()) {
                return Err(Error::InvalidInput(format!("machine '{}': duplicate id", m.id)));
            }
            if m.value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "machine '{}': value must be non-negative",
                    m.id
                )));
            }
            let mut ports = BTreeSet::new();
            for (prog, ver) in &m.snapshot {
                let Some(p) = program(prog) else {
                    return Err(Error::InvalidInput(format!(
                        "machine '{}': snapshot names unknown program '{prog}'",
                        m.id
                    )));
                };
                if !p.versions.iter().any(|v| v.name == *ver) {
                    return Err(Error::InvalidInput(format!(
                        "machine '{}': program '{prog}' has no version '{ver}'",
                        m.id
                    )));
                }
                if !ports.insert(p.port) {
                    return Err(Error::InvalidInput(format!(
                        "machine '{}': two programs share port {}",
                        m.id, p.port
                    )));
                }
            }
        }

        let mut listed = BTreeSet::new();
        for sn in &self.network.subnets {
            for mid in &sn.machines {
                if !machine_ids.contains(mid.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "subnet '{}': lists machine '{mid}' with no machine entry",
                        sn.id
                    )));
                }
                listed.insert(mid.as_str());
            }
        }
        for m in &self.machines {
            if !listed.contains(m.id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "machine '{}': not placed in any subnet",
                    m.id
                )));
            }
        }

        let mut action_names = BTreeSet::new();
        for a in &self.actions {
            if !action_names.insert(a.name.as_str()) {
                return Err(Error::InvalidInput(format!("action '{}': duplicate name", a.name)));
            }
            if a.time_cost > 0.0 || a.detect_cost > 0.0 {
                return Err(Error::InvalidInput(format!(
                    "action '{}': costs must be non-positive",
                    a.name
                )));
            }
            match a.kind.as_str() {
                "port_scan" => {
                    if a.port.unwrap_or(0) == 0 {
                        return Err(Error::InvalidInput(format!(
                            "action '{}': port scans need a positive port",
                            a.name
                        )));
                    }
                }
                "exploit" | "os_detect" => {
                    let Some(target) = a.program.as_deref() else {
                        return Err(Error::InvalidInput(format!(
                            "action '{}': missing target program",
                            a.name
                        )));
                    };
                    let Some(p) = program(target) else {
                        return Err(Error::InvalidInput(format!(
                            "action '{}': unknown program '{target}'",
                            a.name
                        )));
                    };
                    if a.kind == "os_detect" {
                        for ver in a.classes.keys() {
                            if !p.versions.iter().any(|v| v.name == *ver) {
                                return Err(Error::InvalidInput(format!(
                                    "action '{}': class for unknown version '{ver}'",
                                    a.name
                                )));
                            }
                        }
                    }
                    for gate in &a.requires {
                        let Some(g) = program(&gate.program) else {
                            return Err(Error::InvalidInput(format!(
                                "action '{}': gate names unknown program '{}'",
                                a.name, gate.program
                            )));
                        };
                        for ver in &gate.versions {
                            if !g.versions.iter().any(|v| v.name == *ver) {
                                return Err(Error::InvalidInput(format!(
                                    "action '{}': gate version '{ver}' not in program '{}'",
                                    a.name, gate.program
                                )));
                            }
                        }
                    }
                    if let Some(scope) = a.crash_scope.as_deref() {
                        if scope != "machine" && scope != "program" {
                            return Err(Error::InvalidInput(format!(
                                "action '{}': crash_scope must be 'machine' or 'program'",
                                a.name
                            )));
                        }
                    }
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "action '{}': unknown kind '{other}'",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn to_action_spec(&self, a: &ActionFileSpec) -> ActionSpec {
        let kind = match a.kind.as_str() {
            "port_scan" => ActionKind::PortScan {
                port: a.port.expect("validated"),
            },
            "os_detect" => ActionKind::OsDetect {
                program: a.program.clone().expect("validated"),
                classes: a.classes.clone(),
            },
            "exploit" => ActionKind::Exploit {
                program: a.program.clone().expect("validated"),
                requires: a
                    .requires
                    .iter()
                    .map(|g| Gate {
                        program: g.program.clone(),
                        allowed_versions: g.versions.iter().cloned().collect(),
                    })
                    .collect(),
                crash_scope: match a.crash_scope.as_deref() {
                    Some("program") => CrashScope::Program,
                    _ => CrashScope::Machine,
                },
            },
            _ => unreachable!("validated kinds"),
        };
        ActionSpec {
            name: a.name.clone(),
            kind,
            time_cost: a.time_cost,
            detect_cost: a.detect_cost,
        }
    }

    /// Builds the network, per-machine beliefs, and per-machine action sets.
    pub fn compile(&self) -> Result<CompiledScenario> {
        let net = LogicalNetwork::new(
            self.network.root.clone(),
            self.network
                .subnets
                .iter()
                .map(|s| Subnetwork {
                    id: s.id.clone(),
                    machines: s.machines.clone(),
                })
                .collect(),
            self.network
                .edges
                .iter()
                .map(|e| {
                    (
                        e.from.clone(),
                        e.to.clone(),
                        Firewall::new(e.blocked_ports.iter().copied()),
                    )
                })
                .collect(),
        )?;

        let chains: Vec<ProgramChain> = self
            .programs
            .iter()
            .map(|p| {
                ProgramChain::new(
                    p.id.clone(),
                    p.versions.iter().map(|v| v.name.clone()).collect(),
                    p.chain.clone(),
                )
            })
            .collect::<Result<_>>()?;
        let parents: BTreeMap<String, Vec<String>> = self
            .programs
            .iter()
            .filter(|p| !p.parents.is_empty())
            .map(|p| (p.id.clone(), p.parents.clone()))
            .collect();
        let compat: BTreeMap<String, Vec<CompatRule>> = self
            .programs
            .iter()
            .filter(|p| !p.compatibility.is_empty())
            .map(|p| {
                (
                    p.id.clone(),
                    p.compatibility
                        .iter()
                        .map(|c| CompatRule {
                            parents: c.parents.clone(),
                            allowed: c.allowed.iter().cloned().collect(),
                        })
                        .collect(),
                )
            })
            .collect();
        let update = UpdateModel::new(chains, parents, compat)?;

        let all_actions: Vec<ActionSpec> =
            self.actions.iter().map(|a| self.to_action_spec(a)).collect();
        let subnet_of: BTreeMap<&str, &str> = self
            .network
            .subnets
            .iter()
            .flat_map(|s| s.machines.iter().map(move |m| (m.as_str(), s.id.as_str())))
            .collect();

        let mut machines = BTreeMap::new();
        for m in &self.machines {
            let snapshot = SnapshotConfig {
                versions: m.snapshot.clone(),
                days: self.elapsed_days,
            };
            let belief = build_initial_belief(&update, &snapshot)?;
            let programs: Vec<ProgramSpec> = belief
                .programs
                .iter()
                .map(|id| {
                    let spec = self.programs.iter().find(|p| p.id == *id).expect("validated");
                    ProgramSpec {
                        id: spec.id.clone(),
                        port: spec.port,
                        versions: spec.versions.clone(),
                    }
                })
                .collect();
            let actions: Vec<ActionSpec> = all_actions
                .iter()
                .filter(|a| a.relevant_to(&programs))
                .cloned()
                .collect();
            machines.insert(
                m.id.clone(),
                CompiledMachine {
                    id: m.id.clone(),
                    subnet: subnet_of[m.id.as_str()].to_string(),
                    value: m.value,
                    programs,
                    belief,
                    actions,
                },
            );
        }

        Ok(CompiledScenario {
            net,
            days: self.elapsed_days,
            machines,
        })
    }
}

/// Parameters of the generated benchmark family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub machines: usize,
    pub exploits: usize,
    pub days: u32,
    pub seed: u64,
    /// Fan-out of the User subnet tree.
    pub user_fanout: usize,
    /// Machines packed per User subnet.
    pub user_subnet_capacity: usize,
    /// Add the direct internet → sensitive edge, forming the one biconnected
    /// cluster of size 3.
    pub triangle: bool,
}

impl ScenarioParams {
    pub fn new(machines: usize, exploits: usize, days: u32, seed: u64) -> Self {
        ScenarioParams {
            machines,
            exploits,
            days,
            seed,
            user_fanout: 4,
            user_subnet_capacity: 10,
            triangle: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.machines == 0 || self.exploits == 0 {
            return Err(Error::InvalidInput(
                "scenario needs at least one machine and one exploit".into(),
            ));
        }
        if self.user_fanout == 0 || self.user_subnet_capacity == 0 {
            return Err(Error::InvalidInput(
                "user tree fan-out and capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

const TEMPLATE_COUNT: usize = 13;
const SVC_PORT_BASE: u16 = 3000;

#[derive(Debug, Clone, Deserialize)]
struct TemplateSpec {
    id: usize,
    stay_vulnerable: f64,
    vuln_to_patched: f64,
    patched_to_absent: f64,
    #[serde(default)]
    gate_daily_on: Option<f64>,
    #[serde(default)]
    dep_daily_drift: Option<f64>,
    #[serde(default)]
    os_daily_flip: Option<f64>,
    #[serde(default)]
    crash_on_patched: bool,
    #[serde(default)]
    crash_scope: Option<String>,
}

fn template_bank() -> Vec<TemplateSpec> {
    serde_json::from_str(include_str!("../fixtures/templates.json"))
        .expect("embedded template bank parses")
}

/// The running example: one machine behind an empty firewall, two exploits
/// gated by a protection mechanism, and scans on their two ports.
pub fn running_example_json() -> &'static str {
    include_str!("../fixtures/running_example.json")
}

pub fn load_running_example() -> Result<CompiledScenario> {
    ScenarioFile::from_json(running_example_json())?.compile()
}

fn zone_of(index: usize) -> &'static str {
    match index % 40 {
        0 => "exposed",
        1 => "sensitive",
        _ => "user",
    }
}

/// Deterministic per-seed benchmark scenario; see the module docs for its
/// shape. Identical parameters produce a byte-identical file.
pub fn generate_scenario(params: &ScenarioParams) -> Result<ScenarioFile> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bank = template_bank();
    assert_eq!(bank.len(), TEMPLATE_COUNT);

    // template → exploit list, round-robin
    let mut exploits_of_template: Vec<Vec<usize>> = vec![Vec::new(); TEMPLATE_COUNT];
    for e in 0..params.exploits {
        exploits_of_template[e % TEMPLATE_COUNT].push(e);
    }

    // machine → zone and template; user templates are shuffled by the seed
    let machine_id = |k: usize| format!("m{k:03}");
    let mut user_machines = Vec::new();
    let mut template_of: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..params.machines {
        if zone_of(k) == "user" {
            user_machines.push(k);
        } else {
            template_of.insert(k, k % TEMPLATE_COUNT);
        }
    }
    let mut user_templates: Vec<usize> = user_machines.iter().map(|k| k % TEMPLATE_COUNT).collect();
    user_templates.shuffle(&mut rng);
    for (k, t) in user_machines.iter().zip(user_templates) {
        template_of.insert(*k, t);
    }

    // program definitions, one service per exploit plus per-template helpers
    let mut programs: Vec<ProgramFileSpec> = Vec::new();
    let svc_id = |e: usize| format!("svc{e:02}");
    let service_versions = |crash_on_patched: bool| {
        vec![
            VersionSpec {
                name: "vulnerable".into(),
                present: true,
                vulnerable: true,
                crash_on_failed_exploit: false,
            },
            VersionSpec {
                name: "patched".into(),
                present: true,
                vulnerable: false,
                crash_on_failed_exploit: crash_on_patched,
            },
            VersionSpec {
                name: "absent".into(),
                present: false,
                vulnerable: false,
                crash_on_failed_exploit: false,
            },
        ]
    };
    let hidden = |name: &str| VersionSpec {
        name: name.into(),
        present: false,
        vulnerable: false,
        crash_on_failed_exploit: false,
    };
    for e in 0..params.exploits {
        let t = &bank[e % TEMPLATE_COUNT];
        let to_absent = 1.0 - t.stay_vulnerable - t.vuln_to_patched;
        let mut spec = ProgramFileSpec {
            id: svc_id(e),
            port: SVC_PORT_BASE + e as u16,
            versions: service_versions(t.crash_on_patched),
            chain: vec![
                vec![t.stay_vulnerable, t.vuln_to_patched, to_absent],
                vec![0.0, 1.0 - t.patched_to_absent, t.patched_to_absent],
                vec![0.0, 0.0, 1.0],
            ],
            parents: Vec::new(),
            compatibility: Vec::new(),
        };
        if t.dep_daily_drift.is_some() {
            let lib = format!("lib{:02}", t.id);
            spec.parents = vec![lib.clone()];
            // a migrated runtime cannot keep the vulnerable build
            spec.compatibility = vec![
                CompatFileSpec {
                    parents: [(lib.clone(), "v2".into())].into(),
                    allowed: vec!["patched".into(), "absent".into()],
                },
                CompatFileSpec {
                    parents: [(lib, "v1".into())].into(),
                    allowed: vec!["vulnerable".into(), "patched".into(), "absent".into()],
                },
            ];
        }
        programs.push(spec);
    }
    for t in &bank {
        // helper programs exist whenever some exploit references them,
        // whether or not a machine of this template is in play
        if exploits_of_template[t.id].is_empty() {
            continue;
        }
        if let Some(rate) = t.gate_daily_on {
            programs.push(ProgramFileSpec {
                id: format!("guard{:02}", t.id),
                port: 4200 + t.id as u16,
                versions: vec![hidden("off"), hidden("on")],
                chain: vec![vec![1.0 - rate, rate], vec![0.0, 1.0]],
                parents: Vec::new(),
                compatibility: Vec::new(),
            });
        }
        if let Some(rate) = t.dep_daily_drift {
            programs.push(ProgramFileSpec {
                id: format!("lib{:02}", t.id),
                port: 4400 + t.id as u16,
                versions: vec![hidden("v1"), hidden("v2")],
                chain: vec![vec![1.0 - rate, rate], vec![0.0, 1.0]],
                parents: Vec::new(),
                compatibility: Vec::new(),
            });
        }
        if let Some(rate) = t.os_daily_flip {
            programs.push(ProgramFileSpec {
                id: format!("os{:02}", t.id),
                port: 4600 + t.id as u16,
                versions: vec![hidden("class_a"), hidden("class_b")],
                chain: vec![vec![1.0 - rate, rate], vec![rate, 1.0 - rate]],
                parents: Vec::new(),
                compatibility: Vec::new(),
            });
        }
    }

    // actions derived from the bank
    let mut actions: Vec<ActionFileSpec> = Vec::new();
    for e in 0..params.exploits {
        let t = &bank[e % TEMPLATE_COUNT];
        let mut requires = Vec::new();
        if t.gate_daily_on.is_some() {
            requires.push(GateSpec {
                program: format!("guard{:02}", t.id),
                versions: vec!["off".into()],
            });
        }
        if t.os_daily_flip.is_some() {
            requires.push(GateSpec {
                program: format!("os{:02}", t.id),
                versions: vec!["class_a".into()],
            });
        }
        actions.push(ActionFileSpec {
            name: format!("exploit_{}", svc_id(e)),
            kind: "exploit".into(),
            program: Some(svc_id(e)),
            port: None,
            requires,
            classes: BTreeMap::new(),
            crash_scope: t.crash_scope.clone(),
            time_cost: -10.0,
            detect_cost: 0.0,
        });
        actions.push(ActionFileSpec {
            name: format!("scan_port_{}", SVC_PORT_BASE + e as u16),
            kind: "port_scan".into(),
            program: None,
            port: Some(SVC_PORT_BASE + e as u16),
            requires: Vec::new(),
            classes: BTreeMap::new(),
            crash_scope: None,
            time_cost: -10.0,
            detect_cost: 0.0,
        });
    }
    for t in &bank {
        if t.os_daily_flip.is_some() && programs.iter().any(|p| p.id == format!("os{:02}", t.id)) {
            actions.push(ActionFileSpec {
                name: format!("detect_os{:02}", t.id),
                kind: "os_detect".into(),
                program: Some(format!("os{:02}", t.id)),
                port: None,
                requires: Vec::new(),
                classes: [
                    ("class_a".to_string(), "a".to_string()),
                    ("class_b".to_string(), "b".to_string()),
                ]
                .into(),
                crash_scope: None,
                time_cost: -50.0,
                detect_cost: 0.0,
            });
        }
    }

    // machines with snapshots: everything starts vulnerable and unprotected
    let mut machine_specs = Vec::new();
    for k in 0..params.machines {
        let t = &bank[template_of[&k]];
        let mut snapshot = BTreeMap::new();
        for &e in &exploits_of_template[t.id] {
            snapshot.insert(svc_id(e), "vulnerable".to_string());
        }
        if !exploits_of_template[t.id].is_empty() {
            if t.gate_daily_on.is_some() {
                snapshot.insert(format!("guard{:02}", t.id), "off".into());
            }
            if t.dep_daily_drift.is_some() {
                snapshot.insert(format!("lib{:02}", t.id), "v1".into());
            }
            if t.os_daily_flip.is_some() {
                snapshot.insert(format!("os{:02}", t.id), "class_a".into());
            }
        }
        machine_specs.push(MachineSpec {
            id: machine_id(k),
            value: 0.0,
            snapshot,
        });
    }

    // rewards: 9000 in Sensitive, 5000 in a User leaf; with a single machine
    // the 9000 falls back to it, and without a User zone the 5000 is absent
    let sensitive_target = (0..params.machines)
        .find(|&k| zone_of(k) == "sensitive")
        .unwrap_or(0);
    machine_specs[sensitive_target].value = 9000.0;
    if let Some(k) = (0..params.machines).rev().find(|&k| zone_of(k) == "user") {
        machine_specs[k].value = 5000.0;
    }

    // zones: exposed and sensitive are single subnets; user is a tree of
    // subnets, filled breadth-first with `user_subnet_capacity` machines each
    let mut exposed = Vec::new();
    let mut sensitive = Vec::new();
    let mut user_pool = Vec::new();
    for k in 0..params.machines {
        match zone_of(k) {
            "exposed" => exposed.push(machine_id(k)),
            "sensitive" => sensitive.push(machine_id(k)),
            _ => user_pool.push(machine_id(k)),
        }
    }
    let user_subnet_count = user_pool.len().div_ceil(params.user_subnet_capacity).max(1);
    let mut subnets = vec![
        SubnetSpec {
            id: "internet".into(),
            machines: vec![],
        },
        SubnetSpec {
            id: "exposed".into(),
            machines: exposed,
        },
        SubnetSpec {
            id: "sensitive".into(),
            machines: sensitive,
        },
    ];
    let mut edges = vec![
        EdgeSpec {
            from: "internet".into(),
            to: "exposed".into(),
            blocked_ports: vec![],
        },
        EdgeSpec {
            from: "exposed".into(),
            to: "sensitive".into(),
            blocked_ports: (0..params.exploits)
                .filter(|e| e % 5 == 2)
                .map(|e| SVC_PORT_BASE + e as u16)
                .collect(),
        },
    ];
    if params.triangle {
        edges.push(EdgeSpec {
            from: "internet".into(),
            to: "sensitive".into(),
            blocked_ports: (0..params.exploits)
                .filter(|e| e % TEMPLATE_COUNT != 1)
                .map(|e| SVC_PORT_BASE + e as u16)
                .collect(),
        });
    }
    if !user_pool.is_empty() {
        for (i, chunk) in user_pool.chunks(params.user_subnet_capacity).enumerate() {
            subnets.push(SubnetSpec {
                id: format!("user{i:02}"),
                machines: chunk.to_vec(),
            });
        }
        edges.push(EdgeSpec {
            from: "exposed".into(),
            to: "user00".into(),
            blocked_ports: (0..params.exploits)
                .filter(|e| e % 7 == 3)
                .map(|e| SVC_PORT_BASE + e as u16)
                .collect(),
        });
        for i in 1..user_subnet_count {
            let parent = (i - 1) / params.user_fanout;
            edges.push(EdgeSpec {
                from: format!("user{parent:02}"),
                to: format!("user{i:02}"),
                blocked_ports: vec![],
            });
        }
    }

    let file = ScenarioFile {
        name: Some(format!(
            "generated-m{}-e{}-t{}-s{}",
            params.machines, params.exploits, params.days, params.seed
        )),
        elapsed_days: params.days,
        network: NetworkSpec {
            root: "internet".into(),
            subnets,
            edges,
        },
        programs,
        machines: machine_specs,
        actions,
    };
    file.validate()?;
    Ok(file)
}
