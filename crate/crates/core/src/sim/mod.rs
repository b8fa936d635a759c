//! Deterministic discrete-event execution of broadcast scenarios.
//!
//! A [`Scenario`] fixes the universe, the faulty servers, the client's
//! behaviour, the structure and protocol variant, and a script for the faulty
//! servers. [`run`] executes one schedule; [`explore`] enumerates all of them;
//! [`build_equiv_execution`] translates a run of one protocol into a run of
//! its observationally equivalent counterpart.
//!
//! Faulty servers never execute the protocol. They receive messages (so
//! their BCAST receptions appear in histories) and otherwise only act as
//! their script says. Messages addressed to faulty servers are received in
//! the same step they are sent; they have no effect on anything else.

mod engine;
mod equiv;
mod explore;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{NodeId, NodeSet};
use crate::protocol::{Endpoint, Message, MessageKind, ProtocolVariant, Value, VariantTag};
use crate::quorum::{Dqs, FailureScenario, Fbqs};
use crate::subjective::SubjectiveFbqs;

pub use engine::run;
pub use equiv::{build_equiv_execution, Direction};
pub use explore::{explore, explore_with, Exploration, ExploreOptions};
pub use trace::{extract_history, Event, History, HistoryEvent, Trace, TraceStatus};

/// What the broadcasting client does.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClientSpec {
    /// Correct client broadcasting one value to every server.
    Correct(Value),
    /// Faulty client: each listed server gets the given BCAST (or nothing).
    Split(BTreeMap<NodeId, Option<Value>>),
}

impl ClientSpec {
    pub fn is_correct(&self) -> bool {
        matches!(self, ClientSpec::Correct(_))
    }

    pub fn correct_value(&self) -> Option<Value> {
        match self {
            ClientSpec::Correct(v) => Some(*v),
            ClientSpec::Split(_) => None,
        }
    }

    /// Initial BCAST messages in id order.
    pub fn initial_sends(&self, universe: NodeSet) -> Vec<(NodeId, Message)> {
        match self {
            ClientSpec::Correct(v) => crate::protocol::client_broadcast(*v, universe),
            ClientSpec::Split(map) => map
                .iter()
                .filter_map(|(n, v)| v.map(|v| (*n, Message::bcast(v))))
                .collect(),
        }
    }
}

/// The quorum structure a scenario declares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScenarioStructure {
    /// An explicit dissemination quorum system.
    Dqs(Dqs),
    /// One slice function shared by everyone.
    Slices(Fbqs),
    /// Per-correct-server views of the slices.
    Views(SubjectiveFbqs),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct MessagePattern {
    pub from: EndpointSpec,
    pub to: NodeId,
    pub kind: MessageKind,
    pub value: Value,
}

/// Serialized endpoint: a node id or the string `"client"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EndpointSpec {
    Server(NodeId),
    Client(ClientTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientTag {
    Client,
}

impl From<EndpointSpec> for Endpoint {
    fn from(e: EndpointSpec) -> Endpoint {
        match e {
            EndpointSpec::Server(n) => Endpoint::Server(n),
            EndpointSpec::Client(_) => Endpoint::Client,
        }
    }
}

impl MessagePattern {
    pub fn matches(&self, dst: NodeId, msg: &Message) -> bool {
        self.to == dst
            && self.kind == msg.kind
            && self.value == msg.value
            && Endpoint::from(self.from) == msg.sender
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    /// Once at least this many receptions have happened (or the system is
    /// otherwise idle).
    AtStep(usize),
    /// Once a matching message has been received.
    AfterReceive(MessagePattern),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// Faulty `from` sends `kind(value)` to each server in `to`. BCAST
    /// messages are attributed to the client.
    Send {
        from: NodeId,
        kind: MessageKind,
        value: Value,
        to: NodeSet,
    },
    /// Faulty `server` performs no further scripted sends.
    Silence { server: NodeId },
}

impl Action {
    pub fn actor(&self) -> NodeId {
        match self {
            Action::Send { from, .. } => *from,
            Action::Silence { server } => *server,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptedAction {
    pub trigger: Trigger,
    pub action: Action,
}

/// Actions fire in list order: an action is considered only after every
/// earlier one has fired.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdversaryScript {
    pub actions: Vec<ScriptedAction>,
}

/// Maximum number of scripted actions (trigger bookkeeping uses a bitmask).
pub const MAX_SCRIPT_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerMode {
    /// Always deliver the oldest in-flight message.
    Fifo,
    /// Deliver a uniformly random in-flight message.
    Random,
    /// Enumerate every schedule (explore); `run` falls back to random.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchedulerPolicy {
    pub mode: SchedulerMode,
    pub seed: u64,
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        SchedulerPolicy {
            mode: SchedulerMode::Fifo,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub max_steps: usize,
    pub max_in_flight: usize,
    pub max_states: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_steps: 10_000,
            max_in_flight: 10_000,
            max_states: 4_000_000,
        }
    }
}

/// A fully validated run description.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub failure: FailureScenario,
    pub structure: ScenarioStructure,
    pub client: ClientSpec,
    pub protocol: ProtocolVariant,
    pub adversary: AdversaryScript,
    pub scheduler: SchedulerPolicy,
    pub bounds: Bounds,
    intact: NodeSet,
    covering: bool,
}

impl Scenario {
    /// Validates referential integrity and compiles the protocol. Fails
    /// before any step is taken if the structure does not satisfy what the
    /// variant needs.
    pub fn new(
        name: impl Into<String>,
        structure: ScenarioStructure,
        faulty: NodeSet,
        client: ClientSpec,
        variant: VariantTag,
    ) -> Result<Self> {
        let universe = match &structure {
            ScenarioStructure::Dqs(d) => d.quorum_system.support(),
            ScenarioStructure::Slices(f) => f.universe(),
            ScenarioStructure::Views(s) => s.universe(),
        };
        Self::with_universe(name, universe, structure, faulty, client, variant)
    }

    pub fn with_universe(
        name: impl Into<String>,
        universe: NodeSet,
        structure: ScenarioStructure,
        faulty: NodeSet,
        client: ClientSpec,
        variant: VariantTag,
    ) -> Result<Self> {
        let failure = FailureScenario::new(universe, faulty).map_err(|e| Error::Config(e.to_string()))?;
        if let ClientSpec::Split(map) = &client {
            if let Some(n) = map.keys().find(|n| !universe.contains(**n)) {
                return Err(Error::Config(format!("client split names unknown server {n}")));
            }
        }
        match &structure {
            ScenarioStructure::Slices(f) if f.universe() != universe => {
                return Err(Error::Config("slice universe differs from scenario universe".into()))
            }
            ScenarioStructure::Views(s) if s.scenario() != &failure => {
                return Err(Error::Config(
                    "views must be keyed by exactly the correct servers".into(),
                ))
            }
            _ => {}
        }
        let protocol = compile(universe, &structure, &failure, variant)?;
        let (intact, covering) = hypotheses(&structure, &failure)?;
        Ok(Scenario {
            name: name.into(),
            failure,
            structure,
            client,
            protocol,
            adversary: AdversaryScript::default(),
            scheduler: SchedulerPolicy::default(),
            bounds: Bounds::default(),
            intact,
            covering,
        })
    }

    pub fn with_adversary(mut self, script: AdversaryScript) -> Result<Self> {
        if script.actions.len() > MAX_SCRIPT_LEN {
            return Err(Error::Config(format!(
                "adversary script has more than {MAX_SCRIPT_LEN} actions"
            )));
        }
        for (i, a) in script.actions.iter().enumerate() {
            let actor = a.action.actor();
            if !self.failure.bad().contains(actor) {
                return Err(Error::Config(format!(
                    "adversary action {i} is performed by {actor}, which is not faulty"
                )));
            }
            if let Action::Send { to, .. } = &a.action {
                if !to.is_subset(self.universe()) {
                    return Err(Error::Config(format!(
                        "adversary action {i} addresses servers outside the universe"
                    )));
                }
            }
            if let Trigger::AfterReceive(p) = &a.trigger {
                if !self.universe().contains(p.to) {
                    return Err(Error::Config(format!(
                        "adversary trigger {i} waits for a message to unknown server {}",
                        p.to
                    )));
                }
            }
        }
        self.adversary = script;
        Ok(self)
    }

    pub fn with_scheduler(mut self, scheduler: SchedulerPolicy) -> Self {
        self.scheduler = scheduler;
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Removes the READY amplification handler (test-only counterexamples).
    pub fn without_ready_amplification(mut self) -> Self {
        self.protocol = self.protocol.without_ready_amplification();
        self
    }

    /// The same scenario run under another protocol variant.
    pub fn with_variant(&self, variant: VariantTag) -> Result<Scenario> {
        let mut s = Scenario::with_universe(
            self.name.clone(),
            self.universe(),
            self.structure.clone(),
            self.faulty(),
            self.client.clone(),
            variant,
        )?
        .with_adversary(self.adversary.clone())?
        .with_scheduler(self.scheduler)
        .with_bounds(self.bounds);
        if !self.protocol.amplification_enabled() {
            s = s.without_ready_amplification();
        }
        Ok(s)
    }

    pub fn universe(&self) -> NodeSet {
        self.failure.universe()
    }

    pub fn faulty(&self) -> NodeSet {
        self.failure.bad()
    }

    pub fn correct(&self) -> NodeSet {
        self.failure.ok()
    }

    pub fn variant(&self) -> VariantTag {
        self.protocol.tag()
    }

    /// Intact servers for federated structures; empty when the structure is
    /// an explicit DQS (the notion does not apply) or lacks intersection.
    pub fn intact(&self) -> NodeSet {
        self.intact
    }

    /// Some fail-prone element contains every faulty server (per view, for
    /// subjective systems). Always false for Stellar variants' own structure
    /// check, which instead relies on [`intact`](Self::intact).
    pub fn covering_fail_prone(&self) -> bool {
        self.covering
    }

    /// Whether the variant is guaranteed correct for this failure pattern.
    pub fn hypothesis_holds(&self) -> bool {
        match self.variant() {
            VariantTag::Bracha | VariantTag::BrachaSubjective | VariantTag::EchoDeliver => self.covering,
            VariantTag::Stellar | VariantTag::StellarOpen | VariantTag::StellarSubjective => {
                !self.intact.is_empty()
            }
        }
    }

    /// The servers whose READY messages the READY invariants quantify over:
    /// correct servers for DQS-based variants, intact ones otherwise.
    pub fn trusted_servers(&self) -> NodeSet {
        if self.variant().is_federated() {
            self.intact
        } else {
            self.correct()
        }
    }
}

fn compile(
    universe: NodeSet,
    structure: &ScenarioStructure,
    failure: &FailureScenario,
    variant: VariantTag,
) -> Result<ProtocolVariant> {
    use ScenarioStructure as S;
    use VariantTag as V;
    let wrong = |what: &str| Error::Config(format!("variant {variant} cannot run over {what}"));
    match (variant, structure) {
        (V::Bracha, S::Dqs(d)) => ProtocolVariant::bracha(universe, d.clone()),
        (V::EchoDeliver, S::Dqs(d)) => ProtocolVariant::echo_deliver(universe, d.clone()),
        (V::Bracha | V::EchoDeliver, S::Slices(f)) => {
            let d = f
                .induced_dqs()
                .map_err(|e| Error::Config(format!("cannot induce a DQS: {e}")))?;
            if variant == V::Bracha {
                ProtocolVariant::bracha(universe, d)
            } else {
                ProtocolVariant::echo_deliver(universe, d)
            }
        }
        (V::Stellar, S::Slices(f)) => ProtocolVariant::stellar(f.clone()),
        (V::StellarOpen, S::Slices(f)) => ProtocolVariant::stellar_open(f.clone()),
        (V::StellarSubjective, S::Views(s)) => ProtocolVariant::stellar_subjective(s.clone()),
        (V::StellarSubjective, S::Slices(f)) => {
            ProtocolVariant::stellar_subjective(SubjectiveFbqs::uniform(f, *failure)?)
        }
        (V::BrachaSubjective, S::Views(s)) => {
            let sdqs = s
                .induced_subjective_dqs()
                .map_err(|e| Error::Config(format!("cannot induce a subjective DQS: {e}")))?;
            ProtocolVariant::bracha_subjective(sdqs)
        }
        (V::BrachaSubjective, S::Slices(f)) => {
            let sdqs = SubjectiveFbqs::uniform(f, *failure)?
                .induced_subjective_dqs()
                .map_err(|e| Error::Config(format!("cannot induce a subjective DQS: {e}")))?;
            ProtocolVariant::bracha_subjective(sdqs)
        }
        (_, S::Dqs(_)) => Err(wrong("an explicit DQS")),
        (_, S::Views(_)) => Err(wrong("subjective views")),
    }
}

fn hypotheses(structure: &ScenarioStructure, failure: &FailureScenario) -> Result<(NodeSet, bool)> {
    match structure {
        ScenarioStructure::Dqs(d) => Ok((NodeSet::EMPTY, d.fail_prone.covers(failure.bad()))),
        ScenarioStructure::Slices(f) => {
            if !f.has_quorum_intersection()? {
                return Ok((NodeSet::EMPTY, false));
            }
            // Induced fail-prone sets cover the faulty set iff something
            // stays intact.
            let intact = f.intact_set(failure)?;
            Ok((intact, !intact.is_empty()))
        }
        ScenarioStructure::Views(s) => {
            if !s.subjective_quorum_intersection()? {
                return Ok((NodeSet::EMPTY, false));
            }
            let intact = s.intact_set()?;
            Ok((intact, !intact.is_empty()))
        }
    }
}
