use std::collections::BTreeMap;
use std::fmt;

use super::engine::run;
use super::trace::{extract_history, Event, Trace};
use super::{
    Action, AdversaryScript, ClientSpec, Scenario, ScenarioStructure, SchedulerMode, SchedulerPolicy,
    ScriptedAction, Trigger,
};
use crate::error::{Error, Result};
use crate::node::{NodeId, NodeSet};
use crate::protocol::{Endpoint, MessageKind, Value, VariantTag};
use crate::quorum::Fbqs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    BrachaToStellarOpen,
    StellarOpenToBracha,
}

impl Direction {
    pub fn source(self) -> VariantTag {
        match self {
            Direction::BrachaToStellarOpen => VariantTag::Bracha,
            Direction::StellarOpenToBracha => VariantTag::StellarOpen,
        }
    }

    pub fn target(self) -> VariantTag {
        match self {
            Direction::BrachaToStellarOpen => VariantTag::StellarOpen,
            Direction::StellarOpenToBracha => VariantTag::Bracha,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source(), self.target())
    }
}

/// Builds an execution of the target protocol with the same history as
/// `source`, which must be a quiescent trace of `scenario` run under the
/// source protocol. Bracha runs over the DQS induced by the slices.
///
/// With a delivery of `a` in the source, the construction finds a quorum U
/// from which some correct server collected ECHO(a), keeps every server's
/// first BCAST, and has the faulty members of U echo `a` to everyone.
/// Without deliveries, the faulty servers stay silent. Either way the
/// resulting history must equal the source's; a mismatch is returned as an
/// invariant error carrying the diff.
pub fn build_equiv_execution(direction: Direction, source: &Trace, scenario: &Scenario) -> Result<Trace> {
    let fbqs = match &scenario.structure {
        ScenarioStructure::Slices(f) => f,
        _ => {
            return Err(Error::Precondition(
                "equivalence needs a single objective slice function".into(),
            ))
        }
    };
    if scenario.variant() != direction.source() {
        return Err(Error::Precondition(format!(
            "source trace must come from {}, scenario runs {}",
            direction.source(),
            scenario.variant()
        )));
    }
    if scenario.intact().is_empty() {
        return Err(Error::Precondition("no intact server".into()));
    }
    if !source.is_quiescent() {
        return Err(Error::Precondition("source trace is not quiescent".into()));
    }

    let history = extract_history(source);
    let routing: BTreeMap<NodeId, Option<Value>> =
        history.first_bcasts().into_iter().map(|(n, v)| (n, Some(v))).collect();
    let delivered: Vec<Value> = history.deliveries().into_values().collect();

    let mut script = AdversaryScript::default();
    if let Some(&a) = delivered.first() {
        if delivered.iter().any(|v| *v != a) {
            return Err(Error::Invariant("source trace delivers two different values".into()));
        }
        let quorum = echo_quorum(fbqs, source, scenario.correct(), a)?;
        for f in quorum.intersection(scenario.faulty()).iter() {
            script.actions.push(ScriptedAction {
                trigger: Trigger::AtStep(0),
                action: Action::Send {
                    from: f,
                    kind: MessageKind::Echo,
                    value: a,
                    to: scenario.universe(),
                },
            });
        }
    }

    let target = Scenario::new(
        format!("{}-{}", scenario.name, direction.target()),
        scenario.structure.clone(),
        scenario.faulty(),
        ClientSpec::Split(routing),
        direction.target(),
    )?
    .with_adversary(script)?
    .with_scheduler(SchedulerPolicy {
        mode: SchedulerMode::Fifo,
        seed: 0,
    })
    .with_bounds(scenario.bounds);
    let trace = run(&target)?;
    let produced = extract_history(&trace);
    if produced != history {
        return Err(Error::Invariant(format!(
            "{direction}: histories differ\n{}",
            history.diff(&produced)
        )));
    }
    Ok(trace)
}

/// The first quorum, in trace order, all of whose members a correct server
/// received ECHO(a) from.
fn echo_quorum(fbqs: &Fbqs, trace: &Trace, correct: NodeSet, a: Value) -> Result<NodeSet> {
    let minimal = fbqs.minimal_quorums()?;
    let mut senders: BTreeMap<NodeId, NodeSet> = BTreeMap::new();
    for e in &trace.events {
        if let Event::Receive { dst, msg } = e {
            if let (MessageKind::Echo, Endpoint::Server(s)) = (msg.kind, msg.sender) {
                if msg.value != a || !correct.contains(*dst) {
                    continue;
                }
                let got = senders.entry(*dst).or_default();
                got.insert(s);
                if let Some(q) = minimal.iter().find(|q| q.is_subset(*got)) {
                    return Ok(*q);
                }
            }
        }
    }
    Err(Error::Invariant(format!(
        "a correct server delivered {a} but none collected an ECHO quorum for it"
    )))
}
