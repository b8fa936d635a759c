use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trace::{Event, Trace, TraceStatus};
use super::{Action, Scenario, SchedulerMode, Trigger};
use crate::error::Result;
use crate::node::{NodeId, NodeSet};
use crate::protocol::{Endpoint, Message, MessageKind, ServerState, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct Envelope {
    pub dst: NodeId,
    pub msg: Message,
}

/// The first server (per value and per scope) to become ready, and whether
/// it had an ECHO quorum at that moment. Kept so that state deduplication
/// does not merge paths that differ in who readied first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct ReadyMark {
    pub value: Value,
    pub trusted: bool,
    pub server: NodeId,
    pub causal: bool,
}

/// Global state of a run, minus the event log.
#[derive(Clone, Debug)]
pub(crate) struct World<'s> {
    pub sc: &'s Scenario,
    pub states: BTreeMap<NodeId, ServerState>,
    /// In send order.
    pub in_flight: Vec<Envelope>,
    pub script_pos: usize,
    /// Bit i set once action i's trigger message has been received.
    pub seen: u64,
    pub silenced: NodeSet,
    pub steps: usize,
    pub marks: Vec<ReadyMark>,
}

impl<'s> World<'s> {
    pub fn start(sc: &'s Scenario, log: &mut Vec<Event>) -> Result<Self> {
        let mut w = World {
            sc,
            states: sc.correct().iter().map(|v| (v, ServerState::new(v))).collect(),
            in_flight: Vec::new(),
            script_pos: 0,
            seen: 0,
            silenced: NodeSet::EMPTY,
            steps: 0,
            marks: Vec::new(),
        };
        for (dst, msg) in sc.client.initial_sends(sc.universe()) {
            w.send(dst, msg, log);
        }
        w.fire_script(log);
        Ok(w)
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty()
    }

    fn send(&mut self, dst: NodeId, msg: Message, log: &mut Vec<Event>) {
        log.push(Event::Send { dst, msg });
        if self.sc.faulty().contains(dst) {
            log.push(Event::Receive { dst, msg });
            self.note_received(dst, &msg);
        } else {
            self.in_flight.push(Envelope { dst, msg });
        }
    }

    fn note_received(&mut self, dst: NodeId, msg: &Message) {
        for (i, a) in self.sc.adversary.actions.iter().enumerate().skip(self.script_pos) {
            if let Trigger::AfterReceive(p) = &a.trigger {
                if p.matches(dst, msg) {
                    self.seen |= 1 << i;
                }
            }
        }
    }

    /// Whether receiving `env` would let a pending trigger fire.
    pub fn is_trigger(&self, env: &Envelope) -> bool {
        self.sc
            .adversary
            .actions
            .iter()
            .enumerate()
            .skip(self.script_pos)
            .any(|(i, a)| match &a.trigger {
                Trigger::AfterReceive(p) => self.seen & (1 << i) == 0 && p.matches(env.dst, &env.msg),
                Trigger::AtStep(_) => false,
            })
    }

    /// Step-based triggers also fire early once nothing else can happen.
    fn fire_script(&mut self, log: &mut Vec<Event>) {
        let actions = &self.sc.adversary.actions;
        while let Some(a) = actions.get(self.script_pos) {
            let ready = match a.trigger {
                Trigger::AtStep(n) => self.steps >= n || self.in_flight.is_empty(),
                Trigger::AfterReceive(_) => self.seen & (1 << self.script_pos) != 0,
            };
            if !ready {
                break;
            }
            self.script_pos += 1;
            match a.action {
                Action::Silence { server } => {
                    self.silenced.insert(server);
                }
                Action::Send { from, kind, value, to } => {
                    if self.silenced.contains(from) {
                        continue;
                    }
                    let msg = match kind {
                        MessageKind::Bcast => Message::bcast(value),
                        _ => Message {
                            kind,
                            value,
                            sender: Endpoint::Server(from),
                        },
                    };
                    for dst in to.iter() {
                        self.send(dst, msg, log);
                    }
                }
            }
        }
    }

    /// Largest step threshold among pending step triggers, if any; step
    /// counts beyond it no longer influence the future.
    pub fn step_horizon(&self) -> usize {
        self.sc.adversary.actions[self.script_pos..]
            .iter()
            .filter_map(|a| match a.trigger {
                Trigger::AtStep(n) => Some(n),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Receives the in-flight message at `index`.
    pub fn deliver(&mut self, index: usize, log: &mut Vec<Event>) -> Result<()> {
        let Envelope { dst, msg } = self.in_flight.remove(index);
        log.push(Event::Receive { dst, msg });
        self.steps += 1;
        self.note_received(dst, &msg);
        if let Some(state) = self.states.get(&dst) {
            let protocol = &self.sc.protocol;
            let (next, out) = protocol.handle(state, &msg)?;
            if let (None, Some(a)) = (state.ready, next.ready) {
                let causal = !protocol.delivers_on_echo()
                    && protocol.rules(dst)?.quorum_within(next.echo_senders.get(a));
                self.mark_ready(dst, a, causal);
            }
            self.states.insert(dst, next);
            for (d, m) in out.outbound {
                self.send(d, m, log);
            }
            if let Some(value) = out.delivery {
                log.push(Event::Deliver { server: dst, value });
            }
        }
        self.fire_script(log);
        Ok(())
    }

    fn mark_ready(&mut self, server: NodeId, value: Value, causal: bool) {
        let trusted = self.sc.trusted_servers().contains(server);
        for scope in [false, true] {
            if scope && !trusted {
                continue;
            }
            if !self.marks.iter().any(|m| m.value == value && m.trusted == scope) {
                self.marks.push(ReadyMark {
                    value,
                    trusted: scope,
                    server,
                    causal,
                });
            }
        }
        self.marks.sort();
    }

    pub fn over_bounds(&self) -> bool {
        self.steps >= self.sc.bounds.max_steps || self.in_flight.len() > self.sc.bounds.max_in_flight
    }

    pub fn finish(&self, events: Vec<Event>) -> Trace {
        let status = if self.is_idle() {
            TraceStatus::Quiescent
        } else {
            TraceStatus::BoundExhausted
        };
        Trace {
            events,
            status,
            final_states: self.states.clone(),
        }
    }
}

/// Executes one schedule of the scenario. FIFO delivers the oldest
/// in-flight message; random (and exhaustive, outside exploration) picks one
/// uniformly with a generator seeded from the scheduler seed.
pub fn run(scenario: &Scenario) -> Result<Trace> {
    let mut log = Vec::new();
    let mut world = World::start(scenario, &mut log)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.scheduler.seed);
    while !world.is_idle() {
        if world.over_bounds() {
            return Ok(bounded(&world, log));
        }
        let index = match scenario.scheduler.mode {
            SchedulerMode::Fifo => 0,
            SchedulerMode::Random | SchedulerMode::Exhaustive => rng.gen_range(0..world.in_flight.len()),
        };
        world.deliver(index, &mut log)?;
    }
    Ok(world.finish(log))
}

fn bounded(world: &World<'_>, log: Vec<Event>) -> Trace {
    Trace {
        events: log,
        status: TraceStatus::BoundExhausted,
        final_states: world.states.clone(),
    }
}
