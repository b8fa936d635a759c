//! JSON scenario documents.
//!
//! ```json
//! {
//!   "name": "split",
//!   "universe": [1, 2, 3, 4],
//!   "slices": {"1": [[1, 2], [1, 4]], "2": [[1, 2]], "3": [[1, 3]], "4": [[3, 4]]},
//!   "views": {"2": {"3": [[2, 3]]}},
//!   "faulty": [3],
//!   "client": {"split": {"1": "a", "2": "a", "4": "b"}},
//!   "variant": "stellar",
//!   "adversary": [{"at_step": 0, "send": {"from": 3, "kind": "ECHO", "value": "a", "to": [1, 2]}}],
//!   "scheduler": {"mode": "fifo", "seed": 0},
//!   "bounds": {"max_steps": 10000, "max_in_flight": 10000}
//! }
//! ```
//!
//! Either `slices` or `dqs` (explicit quorums and fail-prone sets) gives the
//! structure; `views` overrides faulty servers' slices per correct reader.
//! Unknown fields are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{NodeId, NodeSet};
use crate::protocol::{MessageKind, Value, VariantTag};
use crate::quorum::{Dqs, FailProneSystem, FailureScenario, Fbqs, QuorumSystem};
use crate::sim::{
    Action, AdversaryScript, Bounds, ClientSpec, MessagePattern, Scenario, ScenarioStructure,
    SchedulerMode, SchedulerPolicy, ScriptedAction, Trigger,
};
use crate::subjective::SubjectiveFbqs;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub universe: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<BTreeMap<u32, Vec<Vec<u32>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<BTreeMap<u32, BTreeMap<u32, Vec<Vec<u32>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dqs: Option<DqsFile>,
    #[serde(default)]
    pub faulty: Vec<u32>,
    pub client: ClientFile,
    pub variant: VariantTag,
    #[serde(default, skip_serializing_if = "is_false")]
    pub disable_ready_blocking: bool,
    #[serde(default)]
    pub adversary: Vec<ActionFile>,
    #[serde(default)]
    pub scheduler: SchedulerFile,
    #[serde(default)]
    pub bounds: Bounds,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqsFile {
    pub quorums: Vec<Vec<u32>>,
    pub fail_prone: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ClientFile {
    /// Correct client.
    #[serde(rename = "value")]
    Value(Value),
    /// Faulty client; `null` means the server gets no BCAST.
    #[serde(rename = "split")]
    Split(BTreeMap<u32, Option<Value>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<MessagePattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send: Option<SendFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silence: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SendFile {
    pub from: u32,
    pub kind: MessageKind,
    pub value: Value,
    pub to: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerFile {
    pub mode: SchedulerMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SchedulerFile {
    fn default() -> Self {
        SchedulerFile {
            mode: SchedulerMode::Fifo,
            seed: 0,
        }
    }
}

fn at(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Parse(format!("{field}: {e}"))
}

fn id(field: &str, v: u32) -> Result<NodeId> {
    NodeId::new(v).map_err(at(field))
}

fn set(field: &str, ids: &[u32]) -> Result<NodeSet> {
    NodeSet::try_from_ids(ids.iter().copied()).map_err(at(field))
}

fn family(field: &str, sets: &[Vec<u32>]) -> Result<Vec<NodeSet>> {
    sets.iter().map(|s| set(field, s)).collect()
}

fn slice_map(field: &str, raw: &BTreeMap<u32, Vec<Vec<u32>>>) -> Result<BTreeMap<NodeId, Vec<NodeSet>>> {
    raw.iter()
        .map(|(k, v)| Ok((id(field, *k)?, family(field, v)?)))
        .collect()
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_scenario()
}

impl ScenarioFile {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let universe = set("universe", &self.universe)?;
        let faulty = set("faulty", &self.faulty)?;
        if !faulty.is_subset(universe) {
            return Err(Error::Parse(format!(
                "faulty: {} is not inside the universe",
                faulty.difference(universe)
            )));
        }
        let failure = FailureScenario::new(universe, faulty).map_err(at("faulty"))?;

        let structure = match (&self.slices, &self.dqs) {
            (Some(raw), None) => {
                let base = Fbqs::new(universe, slice_map("slices", raw)?).map_err(at("slices"))?;
                match &self.views {
                    None => ScenarioStructure::Slices(base),
                    Some(views) => {
                        let overrides = views
                            .iter()
                            .map(|(viewer, table)| Ok((id("views", *viewer)?, slice_map("views", table)?)))
                            .collect::<Result<BTreeMap<_, _>>>()?;
                        ScenarioStructure::Views(
                            SubjectiveFbqs::from_shared(&base, failure, &overrides).map_err(at("views"))?,
                        )
                    }
                }
            }
            (None, Some(d)) => {
                if self.views.is_some() {
                    return Err(Error::Parse("views: only allowed together with slices".into()));
                }
                let quorums = QuorumSystem::new(family("dqs.quorums", &d.quorums)?);
                if !quorums.support().is_subset(universe) {
                    return Err(Error::Parse("dqs.quorums: mentions a server outside the universe".into()));
                }
                let fail_prone = FailProneSystem::new(family("dqs.fail_prone", &d.fail_prone)?)
                    .map_err(at("dqs.fail_prone"))?;
                ScenarioStructure::Dqs(Dqs::new(quorums, fail_prone))
            }
            (Some(_), Some(_)) => return Err(Error::Parse("slices and dqs are mutually exclusive".into())),
            (None, None) => return Err(Error::Parse("one of slices or dqs is required".into())),
        };

        let client = match &self.client {
            ClientFile::Value(v) => ClientSpec::Correct(*v),
            ClientFile::Split(map) => ClientSpec::Split(
                map.iter()
                    .map(|(k, v)| Ok((id("client.split", *k)?, *v)))
                    .collect::<Result<_>>()?,
            ),
        };

        let mut script = AdversaryScript::default();
        for (i, a) in self.adversary.iter().enumerate() {
            let field = format!("adversary[{i}]");
            let trigger = match (a.at_step, &a.after) {
                (Some(n), None) => Trigger::AtStep(n),
                (None, Some(p)) => Trigger::AfterReceive(p.clone()),
                (None, None) => Trigger::AtStep(0),
                (Some(_), Some(_)) => {
                    return Err(Error::Parse(format!("{field}: at_step and after are exclusive")))
                }
            };
            let action = match (&a.send, a.silence) {
                (Some(s), None) => Action::Send {
                    from: id(&field, s.from)?,
                    kind: s.kind,
                    value: s.value,
                    to: set(&field, &s.to)?,
                },
                (None, Some(n)) => Action::Silence { server: id(&field, n)? },
                _ => return Err(Error::Parse(format!("{field}: exactly one of send or silence"))),
            };
            script.actions.push(ScriptedAction { trigger, action });
        }

        let mut scenario = Scenario::with_universe(
            self.name.clone(),
            universe,
            structure,
            faulty,
            client,
            self.variant,
        )?
        .with_adversary(script)?
        .with_scheduler(SchedulerPolicy {
            mode: self.scheduler.mode,
            seed: self.scheduler.seed,
        })
        .with_bounds(self.bounds);
        if self.disable_ready_blocking {
            scenario = scenario.without_ready_amplification();
        }
        Ok(scenario)
    }

    /// The document describing `scenario`. Subjective views are written as
    /// the lowest correct server's view plus per-reader differences.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let ids = |s: NodeSet| -> Vec<u32> { s.iter().map(NodeId::get).collect() };
        let fam = |f: &[NodeSet]| -> Vec<Vec<u32>> { f.iter().map(|s| ids(*s)).collect() };
        let smap = |m: &BTreeMap<NodeId, Vec<NodeSet>>| -> BTreeMap<u32, Vec<Vec<u32>>> {
            m.iter().map(|(k, v)| (k.get(), fam(v))).collect()
        };
        let (slices, views, dqs) = match &scenario.structure {
            ScenarioStructure::Slices(f) => (Some(smap(f.slice_map())), None, None),
            ScenarioStructure::Dqs(d) => {
                let q: Vec<NodeSet> = d.quorum_system.quorums().collect();
                let dqs = DqsFile {
                    quorums: fam(&q),
                    fail_prone: fam(d.fail_prone.sets()),
                };
                (None, None, Some(dqs))
            }
            ScenarioStructure::Views(s) => {
                let base = s.views().values().next().expect("views keyed by correct servers");
                let mut views = BTreeMap::new();
                for (viewer, f) in s.views() {
                    let diff: BTreeMap<u32, Vec<Vec<u32>>> = f
                        .slice_map()
                        .iter()
                        .filter(|(k, v)| base.slice_map().get(k) != Some(v))
                        .map(|(k, v)| (k.get(), fam(v)))
                        .collect();
                    if !diff.is_empty() {
                        views.insert(viewer.get(), diff);
                    }
                }
                (Some(smap(base.slice_map())), Some(views), None)
            }
        };
        let client = match &scenario.client {
            ClientSpec::Correct(v) => ClientFile::Value(*v),
            ClientSpec::Split(m) => ClientFile::Split(m.iter().map(|(k, v)| (k.get(), *v)).collect()),
        };
        let adversary = scenario
            .adversary
            .actions
            .iter()
            .map(|a| {
                let (at_step, after) = match &a.trigger {
                    Trigger::AtStep(n) => (Some(*n), None),
                    Trigger::AfterReceive(p) => (None, Some(p.clone())),
                };
                let (send, silence) = match &a.action {
                    Action::Send { from, kind, value, to } => (
                        Some(SendFile {
                            from: from.get(),
                            kind: *kind,
                            value: *value,
                            to: ids(*to),
                        }),
                        None,
                    ),
                    Action::Silence { server } => (None, Some(server.get())),
                };
                ActionFile {
                    at_step,
                    after,
                    send,
                    silence,
                }
            })
            .collect();
        ScenarioFile {
            name: scenario.name.clone(),
            universe: ids(scenario.universe()),
            slices,
            views,
            dqs,
            faulty: ids(scenario.faulty()),
            client,
            variant: scenario.variant(),
            disable_ready_blocking: !scenario.protocol.amplification_enabled(),
            adversary,
            scheduler: SchedulerFile {
                mode: scenario.scheduler.mode,
                seed: scenario.scheduler.seed,
            },
            bounds: scenario.bounds,
        }
    }
}

/// Pretty-printed JSON for `scenario`.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(&ScenarioFile::from_scenario(scenario))
        .expect("scenario documents always serialize");
    s.push('\n');
    s
}
