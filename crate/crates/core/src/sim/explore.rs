use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use super::engine::{Envelope, World};
use super::trace::{Event, Trace, TraceStatus};
use super::{Scenario, SchedulerMode, Trigger};
use crate::error::{Error, Result};

/// Reductions applied during exploration. Both are on by default; turning
/// them off enumerates every interleaving, which is only feasible for tiny
/// scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Skip global states already visited.
    pub dedup: bool,
    /// Deliver messages that can no longer change their receiver's
    /// behaviour immediately instead of branching on them.
    pub reduce: bool,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            dedup: true,
            reduce: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    /// One representative trace per distinct maximal end state, in
    /// depth-first order.
    pub traces: Vec<Trace>,
    /// Distinct global states visited.
    pub states: usize,
}

impl Exploration {
    pub fn quiescent(&self) -> impl Iterator<Item = &Trace> {
        self.traces.iter().filter(|t| t.status == TraceStatus::Quiescent)
    }
}

pub fn explore(scenario: &Scenario) -> Result<Exploration> {
    explore_with(scenario, ExploreOptions::default())
}

/// Enumerates every delivery order of in-flight messages. Scripted actions
/// fire as soon as their trigger is met, so interleaving them is covered by
/// interleaving the deliveries around them.
pub fn explore_with(scenario: &Scenario, options: ExploreOptions) -> Result<Exploration> {
    if scenario.scheduler.mode != SchedulerMode::Exhaustive {
        return Err(Error::Config("exploration requires the exhaustive scheduler".into()));
    }
    let mut log = Vec::new();
    let world = World::start(scenario, &mut log)?;
    let mut ex = Explorer {
        options,
        visited: HashSet::new(),
        traces: Vec::new(),
        frontier: 0,
        budget: scenario.bounds.max_states,
    };
    ex.visit(world, &mut log)?;
    Ok(Exploration {
        traces: ex.traces,
        states: ex.visited.len(),
    })
}

struct Explorer {
    options: ExploreOptions,
    visited: HashSet<u128>,
    traces: Vec<Trace>,
    frontier: usize,
    budget: usize,
}

impl Explorer {
    fn visit(&mut self, mut world: World<'_>, log: &mut Vec<Event>) -> Result<()> {
        if self.options.reduce {
            settle(&mut world, log)?;
        }
        if self.options.dedup {
            if !self.visited.insert(fingerprint(&world)) {
                return Ok(());
            }
            if self.visited.len() > self.budget {
                return Err(Error::StateBudget {
                    states: self.visited.len(),
                    frontier: self.frontier,
                });
            }
        }
        if world.is_idle() || world.over_bounds() {
            self.traces.push(world.finish(log.clone()));
            if !self.options.dedup && self.traces.len() > self.budget {
                return Err(Error::StateBudget {
                    states: self.traces.len(),
                    frontier: self.frontier,
                });
            }
            return Ok(());
        }
        let mut choices: Vec<(Envelope, usize)> = Vec::new();
        for (i, env) in world.in_flight.iter().enumerate() {
            if !choices.iter().any(|(e, _)| e == env) {
                choices.push((*env, i));
            }
        }
        choices.sort();
        self.frontier += choices.len();
        for (_, index) in choices {
            self.frontier -= 1;
            let mark = log.len();
            let mut next = world.clone();
            next.deliver(index, log)?;
            self.visit(next, log)?;
            log.truncate(mark);
        }
        Ok(())
    }
}

/// Delivers, oldest first, messages whose reception cannot matter: the
/// receiver ignores them now and forever, and no scripted action waits for
/// them. Disabled while step-counted triggers are pending since every
/// reception advances the step count.
fn settle(world: &mut World<'_>, log: &mut Vec<Event>) -> Result<()> {
    let step_pending = world.sc.adversary.actions[world.script_pos..]
        .iter()
        .any(|a| matches!(a.trigger, Trigger::AtStep(n) if n > world.steps));
    if step_pending {
        return Ok(());
    }
    loop {
        let inert = world.in_flight.iter().position(|env| {
            let state = &world.states[&env.dst];
            !world.sc.protocol.is_relevant(state, &env.msg) && !world.is_trigger(env)
        });
        match inert {
            Some(i) => world.deliver(i, log)?,
            None => return Ok(()),
        }
    }
}

fn fingerprint(world: &World<'_>) -> u128 {
    let mut flight = world.in_flight.clone();
    flight.sort_unstable();
    let key = (
        &world.states,
        &flight,
        world.script_pos,
        world.seen,
        world.silenced,
        world.steps.min(world.step_horizon()),
        &world.marks,
    );
    let mut lo = DefaultHasher::new();
    key.hash(&mut lo);
    let mut hi = DefaultHasher::new();
    0x9e37_79b9_7f4a_7c15u64.hash(&mut hi);
    key.hash(&mut hi);
    (u128::from(hi.finish()) << 64) | u128::from(lo.finish())
}
