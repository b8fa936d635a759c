use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::node::{NodeId, NodeSet};
use crate::protocol::{Endpoint, Message, MessageKind, ServerState, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    /// `msg.sender` sends `msg` to `dst`.
    Send { dst: NodeId, msg: Message },
    /// `dst` receives `msg` from `msg.sender`.
    Receive { dst: NodeId, msg: Message },
    Deliver { server: NodeId, value: Value },
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Send { dst, msg } => {
                write!(f, "SEND\t{}\t{}\t{}\t{}", msg.sender, dst, msg.kind, msg.value)
            }
            Event::Receive { dst, msg } => {
                write!(f, "RECV\t{}\t{}\t{}\t{}", dst, msg.sender, msg.kind, msg.value)
            }
            Event::Deliver { server, value } => write!(f, "DELIVER\t{server}\t{value}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceStatus {
    /// No message in flight and nothing left for the adversary to do.
    Quiescent,
    /// A step or in-flight bound was hit first.
    BoundExhausted,
}

impl fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceStatus::Quiescent => "quiescent",
            TraceStatus::BoundExhausted => "bound-exhausted",
        })
    }
}

/// One execution: events in order, how it ended, and the correct servers'
/// final states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub status: TraceStatus,
    pub final_states: BTreeMap<NodeId, ServerState>,
}

impl Trace {
    pub fn is_quiescent(&self) -> bool {
        self.status == TraceStatus::Quiescent
    }

    /// Deliveries in trace order.
    pub fn deliveries(&self) -> impl Iterator<Item = (NodeId, Value)> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Deliver { server, value } => Some((*server, *value)),
            _ => None,
        })
    }

    pub fn delivered_servers(&self) -> NodeSet {
        self.deliveries().map(|(s, _)| s).collect()
    }

    /// One event per line, tab-separated, ending with the status line.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.events.iter().enumerate() {
            out.push_str(&format!("{i}\t{e}\n"));
        }
        out.push_str(&format!("END\t{}\n", self.status));
        out
    }

    /// Checks that receptions match sends. Returns the index of the first
    /// offending event.
    pub fn check_channel_integrity(&self) -> Result<(), usize> {
        let mut pending: BTreeMap<(Endpoint, NodeId, Message), usize> = BTreeMap::new();
        let mut delivered = NodeSet::EMPTY;
        for (i, e) in self.events.iter().enumerate() {
            match e {
                Event::Send { dst, msg } => *pending.entry((msg.sender, *dst, *msg)).or_default() += 1,
                Event::Receive { dst, msg } => {
                    let slot = pending.get_mut(&(msg.sender, *dst, *msg)).ok_or(i)?;
                    if *slot == 0 {
                        return Err(i);
                    }
                    *slot -= 1;
                }
                Event::Deliver { server, .. } => {
                    if !delivered.insert(*server) {
                        return Err(i);
                    }
                }
            }
        }
        Ok(())
    }

    /// Sends to `among` that were never received.
    pub fn unreceived_sends(&self, among: NodeSet) -> Vec<(NodeId, Message)> {
        let mut pending: Vec<(NodeId, Message)> = Vec::new();
        for e in &self.events {
            match e {
                Event::Send { dst, msg } if among.contains(*dst) => pending.push((*dst, *msg)),
                Event::Receive { dst, msg } => {
                    if let Some(p) = pending.iter().position(|x| *x == (*dst, *msg)) {
                        pending.remove(p);
                    }
                }
                _ => {}
            }
        }
        pending
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HistoryEvent {
    /// The first BCAST the server received carried this value.
    FirstBcast { server: NodeId, value: Value },
    Deliver { server: NodeId, value: Value },
}

impl fmt::Display for HistoryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryEvent::FirstBcast { server, value } => write!(f, "FIRST_BCAST\t{server}\t{value}"),
            HistoryEvent::Deliver { server, value } => write!(f, "DELIVER\t{server}\t{value}"),
        }
    }
}

/// The observable part of an execution, compared as a set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History(pub BTreeSet<HistoryEvent>);

impl History {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first_bcasts(&self) -> BTreeMap<NodeId, Value> {
        self.0
            .iter()
            .filter_map(|e| match e {
                HistoryEvent::FirstBcast { server, value } => Some((*server, *value)),
                _ => None,
            })
            .collect()
    }

    pub fn deliveries(&self) -> BTreeMap<NodeId, Value> {
        self.0
            .iter()
            .filter_map(|e| match e {
                HistoryEvent::Deliver { server, value } => Some((*server, *value)),
                _ => None,
            })
            .collect()
    }

    pub fn to_lines(&self) -> String {
        self.0.iter().map(|e| format!("{e}\n")).collect()
    }

    /// Events present on one side only, prefixed with `-` (self) or `+`.
    pub fn diff(&self, other: &History) -> String {
        let mut out = String::new();
        for e in self.0.difference(&other.0) {
            out.push_str(&format!("-{e}\n"));
        }
        for e in other.0.difference(&self.0) {
            out.push_str(&format!("+{e}\n"));
        }
        out
    }
}

pub fn extract_history(trace: &Trace) -> History {
    let mut seen = NodeSet::EMPTY;
    let mut events = BTreeSet::new();
    for e in &trace.events {
        match e {
            Event::Receive { dst, msg } if msg.kind == MessageKind::Bcast => {
                if seen.insert(*dst) {
                    events.insert(HistoryEvent::FirstBcast {
                        server: *dst,
                        value: msg.value,
                    });
                }
            }
            Event::Deliver { server, value } => {
                events.insert(HistoryEvent::Deliver {
                    server: *server,
                    value: *value,
                });
            }
            _ => {}
        }
    }
    History(events)
}
