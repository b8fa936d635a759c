#![allow(dead_code)]

use std::path::PathBuf;

use fbqs::sim::{SchedulerMode, SchedulerPolicy};
use fbqs::{parse_scenario, NodeId, NodeSet, Scenario};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Scenario {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fifo(s: Scenario) -> Scenario {
    s.with_scheduler(SchedulerPolicy {
        mode: SchedulerMode::Fifo,
        seed: 0,
    })
}

pub fn seeded(s: Scenario, seed: u64) -> Scenario {
    s.with_scheduler(SchedulerPolicy {
        mode: SchedulerMode::Random,
        seed,
    })
}

pub fn n(v: u32) -> NodeId {
    NodeId::new(v).unwrap()
}

pub fn set(ids: &[u32]) -> NodeSet {
    NodeSet::of(ids)
}
