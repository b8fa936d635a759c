//! Reliable broadcast state machines.
//!
//! One server state machine covers every protocol variant; variants differ
//! only in the three guards that promote a server to `ready` or `delivered`:
//!
//! | variant              | ready on ECHO quorum | ready on READY set         | deliver on READY quorum |
//! |----------------------|----------------------|----------------------------|-------------------------|
//! | `Bracha`             | any quorum           | escapes every fail-prone B | any quorum              |
//! | `Stellar`            | quorum containing me | me-blocking                | quorum containing me    |
//! | `StellarOpen`        | any quorum           | me-blocking                | any quorum              |
//! | `BrachaSubjective`   | as Bracha, per view  | as Bracha, per view        | as Bracha, per view     |
//! | `StellarSubjective`  | as Stellar, per view | me-blocking in own view    | as Stellar, per view    |
//! | `EchoDeliver`        | never                | never                      | on ECHO quorum          |
//!
//! `EchoDeliver` is a deliberately broken variant kept for reproducing the
//! counterexample that motivates READY messages.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{NodeId, NodeSet};
use crate::quorum::{minimal_elements, Dqs, Fbqs};
use crate::subjective::{SubjectiveDqs, SubjectiveFbqs};

const VALUE_CAPACITY: usize = 15;

/// A broadcast payload: a short opaque string such as `a` or `a'`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value {
    len: u8,
    bytes: [u8; VALUE_CAPACITY],
}

impl Value {
    pub fn new(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > VALUE_CAPACITY || s.chars().any(char::is_whitespace) {
            return Err(Error::Domain(format!(
                "value {s:?} must be 1..={VALUE_CAPACITY} bytes without whitespace"
            )));
        }
        let mut bytes = [0u8; VALUE_CAPACITY];
        bytes[..s.len()].copy_from_slice(s.as_bytes());
        Ok(Value {
            len: s.len() as u8,
            bytes,
        })
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.bytes[..self.len as usize]).expect("constructed from &str")
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Value::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Who sent a message. BCAST messages are always attributed to the client.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Client,
    Server(NodeId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Client => f.write_str("client"),
            Endpoint::Server(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MessageKind {
    Bcast,
    Echo,
    Ready,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::Bcast => "BCAST",
            MessageKind::Echo => "ECHO",
            MessageKind::Ready => "READY",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub kind: MessageKind,
    pub value: Value,
    pub sender: Endpoint,
}

impl Message {
    pub fn bcast(value: Value) -> Self {
        Message {
            kind: MessageKind::Bcast,
            value,
            sender: Endpoint::Client,
        }
    }

    pub fn echo(value: Value, from: NodeId) -> Self {
        Message {
            kind: MessageKind::Echo,
            value,
            sender: Endpoint::Server(from),
        }
    }

    pub fn ready(value: Value, from: NodeId) -> Self {
        Message {
            kind: MessageKind::Ready,
            value,
            sender: Endpoint::Server(from),
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.value)
    }
}

/// A correct client's broadcast: one BCAST per server, in id order.
pub fn client_broadcast(value: Value, universe: NodeSet) -> Vec<(NodeId, Message)> {
    universe.iter().map(|v| (v, Message::bcast(value))).collect()
}

/// Per-value sets of senders, sorted by value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SenderMap(Vec<(Value, NodeSet)>);

impl SenderMap {
    pub fn get(&self, value: Value) -> NodeSet {
        self.0
            .iter()
            .find(|(v, _)| *v == value)
            .map_or(NodeSet::EMPTY, |(_, s)| *s)
    }

    /// Returns false if the sender was already recorded for this value.
    fn record(&mut self, value: Value, sender: NodeId) -> bool {
        match self.0.binary_search_by(|(v, _)| v.cmp(&value)) {
            Ok(i) => self.0[i].1.insert(sender),
            Err(i) => {
                self.0.insert(i, (value, NodeSet::singleton(sender)));
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Value, NodeSet)> + '_ {
        self.0.iter().copied()
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        self.0.iter().map(|(v, _)| *v)
    }
}

/// Local state of one correct server. The `echoed`, `ready` and `delivered`
/// flags are stored as the value they were set with and never reset.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ServerState {
    pub me: NodeId,
    pub echoed: Option<Value>,
    pub ready: Option<Value>,
    pub delivered: Option<Value>,
    pub echo_senders: SenderMap,
    pub ready_senders: SenderMap,
}

impl ServerState {
    pub fn new(me: NodeId) -> Self {
        ServerState {
            me,
            echoed: None,
            ready: None,
            delivered: None,
            echo_senders: SenderMap::default(),
            ready_senders: SenderMap::default(),
        }
    }

    pub fn is_echoed(&self) -> bool {
        self.echoed.is_some()
    }

    pub fn is_ready(&self) -> bool {
        self.ready.is_some()
    }

    pub fn is_delivered(&self) -> bool {
        self.delivered.is_some()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub outbound: Vec<(NodeId, Message)>,
    pub delivery: Option<Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantTag {
    Bracha,
    Stellar,
    StellarOpen,
    BrachaSubjective,
    StellarSubjective,
    EchoDeliver,
}

impl VariantTag {
    /// Variants whose guarantees are stated for intact rather than correct
    /// servers.
    pub fn is_federated(self) -> bool {
        matches!(
            self,
            VariantTag::Stellar | VariantTag::StellarOpen | VariantTag::StellarSubjective
        )
    }

    pub fn is_subjective(self) -> bool {
        matches!(self, VariantTag::BrachaSubjective | VariantTag::StellarSubjective)
    }

    /// Public protocol list; `EchoDeliver` is test-only and excluded.
    pub const PUBLIC: [VariantTag; 5] = [
        VariantTag::Bracha,
        VariantTag::Stellar,
        VariantTag::StellarOpen,
        VariantTag::BrachaSubjective,
        VariantTag::StellarSubjective,
    ];
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantTag::Bracha => "bracha",
            VariantTag::Stellar => "stellar",
            VariantTag::StellarOpen => "stellar-open",
            VariantTag::BrachaSubjective => "bracha-subjective",
            VariantTag::StellarSubjective => "stellar-subjective",
            VariantTag::EchoDeliver => "echo-deliver",
        })
    }
}

/// The structure a variant runs over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    Dqs(Dqs),
    Fbqs(Fbqs),
    SubjectiveDqs(SubjectiveDqs),
    SubjectiveFbqs(SubjectiveFbqs),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum BlockingRule {
    Disabled,
    /// Non-empty and not contained in any fail-prone element.
    FailProne(Vec<NodeSet>),
    /// Overlaps each of the server's own slices.
    Slices(Vec<NodeSet>),
}

/// Guards compiled for one server: the minimal quorums it may rely on and
/// its amplification rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerRules {
    usable_quorums: Vec<NodeSet>,
    blocking: BlockingRule,
}

impl ServerRules {
    /// `senders` contains a quorum this server accepts.
    pub fn quorum_within(&self, senders: NodeSet) -> bool {
        self.usable_quorums.iter().any(|m| m.is_subset(senders))
    }

    /// The first usable quorum contained in `senders`, in canonical order.
    pub fn find_quorum_within(&self, senders: NodeSet) -> Option<NodeSet> {
        self.usable_quorums.iter().copied().find(|m| m.is_subset(senders))
    }

    /// Some non-empty subset of `senders` satisfies the amplification rule.
    /// For the fail-prone rule this is equivalent to checking `senders`
    /// itself, since supersets of an escaping set escape too.
    pub fn amplifies(&self, senders: NodeSet) -> bool {
        match &self.blocking {
            BlockingRule::Disabled => false,
            BlockingRule::FailProne(bs) => {
                !senders.is_empty() && bs.iter().all(|b| !senders.is_subset(*b))
            }
            BlockingRule::Slices(qs) => !senders.is_empty() && qs.iter().all(|q| q.intersects(senders)),
        }
    }

    pub fn usable_quorums(&self) -> &[NodeSet] {
        &self.usable_quorums
    }
}

/// Minimal quorums, or minimal quorums among those containing `me`.
fn usable(quorums: &[NodeSet], me: NodeId, require_membership: bool) -> Vec<NodeSet> {
    if require_membership {
        minimal_elements(quorums.iter().copied().filter(|q| q.contains(me)))
    } else {
        minimal_elements(quorums.iter().copied())
    }
}

/// A protocol variant bound to its structure, with guards compiled for every
/// server that runs it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolVariant {
    tag: VariantTag,
    universe: NodeSet,
    structure: Structure,
    rules: BTreeMap<NodeId, ServerRules>,
    deliver_on_echo: bool,
}

impl ProtocolVariant {
    fn objective_dqs(tag: VariantTag, universe: NodeSet, dqs: Dqs) -> Result<Self> {
        let report = dqs.check(None);
        if !report.passed() {
            return Err(Error::Config(format!("{tag} requires a valid DQS:\n{report}")));
        }
        if !dqs.quorum_system.support().is_subset(universe)
            || dqs.fail_prone.sets().iter().any(|b| !b.is_subset(universe))
        {
            return Err(Error::Config("DQS mentions servers outside the universe".into()));
        }
        let quorums: Vec<NodeSet> = dqs.quorum_system.quorums().collect();
        let deliver_on_echo = tag == VariantTag::EchoDeliver;
        let rules = universe
            .iter()
            .map(|v| {
                let blocking = if deliver_on_echo {
                    BlockingRule::Disabled
                } else {
                    BlockingRule::FailProne(dqs.fail_prone.sets().to_vec())
                };
                (
                    v,
                    ServerRules {
                        usable_quorums: usable(&quorums, v, false),
                        blocking,
                    },
                )
            })
            .collect();
        Ok(ProtocolVariant {
            tag,
            universe,
            structure: Structure::Dqs(dqs),
            rules,
            deliver_on_echo,
        })
    }

    pub fn bracha(universe: NodeSet, dqs: Dqs) -> Result<Self> {
        Self::objective_dqs(VariantTag::Bracha, universe, dqs)
    }

    /// Test-only: delivers as soon as an ECHO quorum arrives and never sends
    /// READY.
    pub fn echo_deliver(universe: NodeSet, dqs: Dqs) -> Result<Self> {
        Self::objective_dqs(VariantTag::EchoDeliver, universe, dqs)
    }

    fn federated(tag: VariantTag, fbqs: Fbqs) -> Result<Self> {
        if !fbqs.has_quorum_intersection()? {
            return Err(Error::Config(format!("{tag} requires quorum intersection")));
        }
        let quorums: Vec<NodeSet> = fbqs.enumerate_quorums()?.quorums().collect();
        let membership = tag == VariantTag::Stellar;
        let rules = fbqs
            .universe()
            .iter()
            .map(|v| {
                (
                    v,
                    ServerRules {
                        usable_quorums: usable(&quorums, v, membership),
                        blocking: BlockingRule::Slices(fbqs.slices(v).expect("v in universe").to_vec()),
                    },
                )
            })
            .collect();
        Ok(ProtocolVariant {
            tag,
            universe: fbqs.universe(),
            structure: Structure::Fbqs(fbqs),
            rules,
            deliver_on_echo: false,
        })
    }

    /// Changed lines 9, 12 and 15: accept only quorums containing oneself
    /// and amplify on blocking sets.
    pub fn stellar(fbqs: Fbqs) -> Result<Self> {
        Self::federated(VariantTag::Stellar, fbqs)
    }

    /// Only the amplification rule is changed to v-blocking.
    pub fn stellar_open(fbqs: Fbqs) -> Result<Self> {
        Self::federated(VariantTag::StellarOpen, fbqs)
    }

    pub fn bracha_subjective(sdqs: SubjectiveDqs) -> Result<Self> {
        let report = sdqs.check();
        for axiom in ["quorum-systems", "sd-safety", "sd-consistency", "sd-availability"] {
            if !report.holds(axiom) {
                return Err(Error::Config(format!(
                    "bracha-subjective requires a subjective DQS:\n{report}"
                )));
            }
        }
        let mut rules = BTreeMap::new();
        for (v, qs) in &sdqs.quorums.per_view {
            let quorums: Vec<NodeSet> = qs.quorums().collect();
            rules.insert(
                *v,
                ServerRules {
                    usable_quorums: usable(&quorums, *v, false),
                    blocking: BlockingRule::FailProne(sdqs.fail_prone_of(*v)?.sets().to_vec()),
                },
            );
        }
        Ok(ProtocolVariant {
            tag: VariantTag::BrachaSubjective,
            universe: sdqs.scenario.universe(),
            structure: Structure::SubjectiveDqs(sdqs),
            rules,
            deliver_on_echo: false,
        })
    }

    pub fn stellar_subjective(sfbqs: SubjectiveFbqs) -> Result<Self> {
        if !sfbqs.validate_agreement().passed() {
            return Err(Error::Config("views disagree on correct servers' slices".into()));
        }
        if !sfbqs.subjective_quorum_intersection()? {
            return Err(Error::Config(
                "stellar-subjective requires quorum intersection in every view".into(),
            ));
        }
        let mut rules = BTreeMap::new();
        for (v, view) in sfbqs.views() {
            let quorums: Vec<NodeSet> = view.enumerate_quorums()?.quorums().collect();
            rules.insert(
                *v,
                ServerRules {
                    usable_quorums: usable(&quorums, *v, true),
                    blocking: BlockingRule::Slices(view.slices(*v)?.to_vec()),
                },
            );
        }
        Ok(ProtocolVariant {
            tag: VariantTag::StellarSubjective,
            universe: sfbqs.universe(),
            structure: Structure::SubjectiveFbqs(sfbqs),
            rules,
            deliver_on_echo: false,
        })
    }

    /// Test-only toggle that removes the READY amplification handler.
    pub fn without_ready_amplification(mut self) -> Self {
        for r in self.rules.values_mut() {
            r.blocking = BlockingRule::Disabled;
        }
        self
    }

    pub fn amplification_enabled(&self) -> bool {
        self.rules
            .values()
            .any(|r| r.blocking != BlockingRule::Disabled)
    }

    pub fn tag(&self) -> VariantTag {
        self.tag
    }

    pub fn universe(&self) -> NodeSet {
        self.universe
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn delivers_on_echo(&self) -> bool {
        self.deliver_on_echo
    }

    /// Servers that can run this variant (all of them, or the correct ones
    /// for subjective variants).
    pub fn participants(&self) -> NodeSet {
        self.rules.keys().copied().collect()
    }

    pub fn rules(&self, me: NodeId) -> Result<&ServerRules> {
        self.rules
            .get(&me)
            .ok_or_else(|| Error::Domain(format!("server {me} does not run {}", self.tag)))
    }

    /// Echo handler: the first BCAST only.
    pub fn guard_echo(&self, state: &ServerState, msg: &Message) -> bool {
        msg.kind == MessageKind::Bcast && !state.is_echoed()
    }

    pub fn guard_ready_quorum(&self, state: &ServerState, value: Value) -> bool {
        if self.deliver_on_echo || state.is_ready() {
            return false;
        }
        self.rules
            .get(&state.me)
            .is_some_and(|r| r.quorum_within(state.echo_senders.get(value)))
    }

    pub fn guard_ready_blocking(&self, state: &ServerState, value: Value) -> bool {
        if state.is_ready() {
            return false;
        }
        self.rules
            .get(&state.me)
            .is_some_and(|r| r.amplifies(state.ready_senders.get(value)))
    }

    pub fn guard_deliver(&self, state: &ServerState, value: Value) -> bool {
        if state.is_delivered() {
            return false;
        }
        let senders = if self.deliver_on_echo {
            state.echo_senders.get(value)
        } else {
            state.ready_senders.get(value)
        };
        self.rules
            .get(&state.me)
            .is_some_and(|r| r.quorum_within(senders))
    }

    /// Some handler other than the echo handler is enabled.
    pub fn any_guard_enabled(&self, state: &ServerState) -> bool {
        let values: Vec<Value> = state
            .echo_senders
            .values()
            .chain(state.ready_senders.values())
            .collect();
        values.into_iter().any(|a| {
            self.guard_ready_quorum(state, a)
                || self.guard_ready_blocking(state, a)
                || self.guard_deliver(state, a)
        })
    }

    /// Whether delivering `msg` now could still change `state` in a way that
    /// matters for future behaviour. Flags are monotone, so once this returns
    /// false for a message it stays false.
    pub fn is_relevant(&self, state: &ServerState, msg: &Message) -> bool {
        match (msg.kind, msg.sender) {
            (MessageKind::Bcast, _) => !state.is_echoed(),
            (MessageKind::Echo, Endpoint::Server(s)) => {
                let listening = if self.deliver_on_echo {
                    !state.is_delivered()
                } else {
                    !state.is_ready()
                };
                listening && !state.echo_senders.get(msg.value).contains(s)
            }
            (MessageKind::Ready, Endpoint::Server(s)) => {
                (!state.is_ready() || !state.is_delivered())
                    && !state.ready_senders.get(msg.value).contains(s)
            }
            _ => false,
        }
    }

    /// Processes one received message and runs the handlers to a fixpoint.
    pub fn handle(&self, state: &ServerState, msg: &Message) -> Result<(ServerState, StepOutput)> {
        self.handle_in_order(state, msg, &Handler::CANONICAL)
    }

    #[doc(hidden)]
    pub fn handle_in_order(
        &self,
        state: &ServerState,
        msg: &Message,
        order: &[Handler; 3],
    ) -> Result<(ServerState, StepOutput)> {
        if !self.rules.contains_key(&state.me) {
            return Err(Error::Domain(format!("server {} does not run {}", state.me, self.tag)));
        }
        check_state(state)?;
        let mut next = state.clone();
        let mut out = StepOutput::default();
        match (msg.kind, msg.sender) {
            (MessageKind::Bcast, _) => {
                if self.guard_echo(state, msg) {
                    next.echoed = Some(msg.value);
                    out.outbound.extend(self.to_all(Message::echo(msg.value, state.me)));
                }
            }
            (MessageKind::Echo, Endpoint::Server(s)) => {
                next.echo_senders.record(msg.value, s);
            }
            (MessageKind::Ready, Endpoint::Server(s)) => {
                next.ready_senders.record(msg.value, s);
            }
            (kind, Endpoint::Client) => {
                return Err(Error::Domain(format!("{kind} cannot originate from the client")));
            }
        }

        loop {
            let mut changed = false;
            for handler in order {
                let candidates: Vec<Value> = match handler {
                    Handler::ReadyQuorum => next.echo_senders.values().collect(),
                    Handler::ReadyBlocking => next.ready_senders.values().collect(),
                    Handler::Deliver if self.deliver_on_echo => next.echo_senders.values().collect(),
                    Handler::Deliver => next.ready_senders.values().collect(),
                };
                for a in candidates {
                    let fire = match handler {
                        Handler::ReadyQuorum => self.guard_ready_quorum(&next, a),
                        Handler::ReadyBlocking => self.guard_ready_blocking(&next, a),
                        Handler::Deliver => self.guard_deliver(&next, a),
                    };
                    if !fire {
                        continue;
                    }
                    changed = true;
                    match handler {
                        Handler::ReadyQuorum | Handler::ReadyBlocking => {
                            next.ready = Some(a);
                            out.outbound.extend(self.to_all(Message::ready(a, state.me)));
                        }
                        Handler::Deliver => {
                            next.delivered = Some(a);
                            out.delivery = Some(a);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Ok((next, out))
    }

    fn to_all(&self, msg: Message) -> impl Iterator<Item = (NodeId, Message)> + '_ {
        self.universe.iter().map(move |v| (v, msg))
    }
}

fn check_state(state: &ServerState) -> Result<()> {
    for (_, senders) in state.echo_senders.iter().chain(state.ready_senders.iter()) {
        if senders.is_empty() {
            return Err(Error::Invariant(format!(
                "server {} has an empty sender set on record",
                state.me
            )));
        }
    }
    Ok(())
}

/// The handlers re-evaluated after each received message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Handler {
    ReadyQuorum,
    ReadyBlocking,
    Deliver,
}

impl Handler {
    pub const CANONICAL: [Handler; 3] = [Handler::ReadyQuorum, Handler::ReadyBlocking, Handler::Deliver];
}
