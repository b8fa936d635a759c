//! The broadcast specification and the trace invariants behind its proofs.
//!
//! Safety properties (no duplication, integrity, consistency) are judged on
//! any trace. Liveness properties (validity, totality and their intact
//! versions) read "eventually" as "by quiescence" and are `n/a` on traces
//! that hit a bound.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::node::{NodeId, NodeSet};
use crate::protocol::{Endpoint, MessageKind, Value};
use crate::report::{AxiomReport, Verdict, Witness};
use crate::sim::{Event, Scenario, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Validity,
    NoDuplication,
    Integrity,
    Consistency,
    Totality,
    ValidityIntact,
    TotalityIntact,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::Validity,
        Property::NoDuplication,
        Property::Integrity,
        Property::Consistency,
        Property::Totality,
        Property::ValidityIntact,
        Property::TotalityIntact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Validity => "validity",
            Property::NoDuplication => "no_duplication",
            Property::Integrity => "integrity",
            Property::Consistency => "consistency",
            Property::Totality => "totality",
            Property::ValidityIntact => "validity_intact",
            Property::TotalityIntact => "totality_intact",
        }
    }

    pub fn is_safety(self) -> bool {
        matches!(
            self,
            Property::NoDuplication | Property::Integrity | Property::Consistency
        )
    }
}

/// Which broadcast specification to hold a trace set to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spec {
    Reliable,
    WeaklyReliable,
}

impl Spec {
    pub fn requires(self) -> &'static [Property] {
        match self {
            Spec::Reliable => &[
                Property::Validity,
                Property::NoDuplication,
                Property::Integrity,
                Property::Consistency,
                Property::Totality,
            ],
            Spec::WeaklyReliable => &[
                Property::NoDuplication,
                Property::Integrity,
                Property::Consistency,
                Property::ValidityIntact,
                Property::TotalityIntact,
            ],
        }
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spec::Reliable => "reliable",
            Spec::WeaklyReliable => "weakly-reliable",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub verdicts: BTreeMap<Property, Verdict>,
    pub intact: NodeSet,
    pub covering_fail_prone: bool,
    pub intact_exists: bool,
    /// Traces judged, and how many of them were quiescent.
    pub traces: usize,
    pub quiescent: usize,
    /// Set for aggregated reports.
    pub spec: Option<Spec>,
}

impl PropertyReport {
    pub fn verdict(&self, p: Property) -> &Verdict {
        &self.verdicts[&p]
    }

    /// No property the spec requires failed.
    pub fn passes(&self, spec: Spec) -> bool {
        spec.requires().iter().all(|p| !self.verdict(*p).is_fail())
    }

    pub fn safety_passes(&self) -> bool {
        Property::ALL
            .iter()
            .filter(|p| p.is_safety())
            .all(|p| !self.verdict(*p).is_fail())
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in Property::ALL {
            let v = self.verdict(p);
            let w = v.witness().map_or_else(|| "-".to_string(), |w| w.to_string());
            writeln!(f, "{}\t{}\t{}", p.name(), v.label(), w)?;
        }
        writeln!(f, "intact\t{}", self.intact)?;
        writeln!(f, "covering_fail_prone\t{}", self.covering_fail_prone)?;
        writeln!(f, "intact_exists\t{}", self.intact_exists)?;
        writeln!(f, "traces\t{}\t{}", self.traces, self.quiescent)?;
        if let Some(spec) = self.spec {
            let label = if self.passes(spec) { "pass" } else { "fail" };
            writeln!(f, "spec\t{spec}\t{label}")?;
        }
        Ok(())
    }
}

fn ids(set: NodeSet) -> Witness {
    Witness::nodes(set.iter())
}

/// Judges one trace. `intact` is the intact set for the scenario, or empty
/// when the notion does not apply.
pub fn check_trace(trace: &Trace, scenario: &Scenario, intact: NodeSet) -> PropertyReport {
    let correct = scenario.correct();
    let client = scenario.client.correct_value();
    let deliveries: Vec<(NodeId, Value)> = trace
        .deliveries()
        .filter(|(s, _)| correct.contains(*s))
        .collect();
    let mut first: BTreeMap<NodeId, Value> = BTreeMap::new();
    let mut dup = None;
    for (s, v) in &deliveries {
        if let Some(prev) = first.get(s) {
            dup.get_or_insert_with(|| {
                Witness::nodes([*s]).with_detail(format!("delivered {prev} then {v}"))
            });
        } else {
            first.insert(*s, *v);
        }
    }
    let delivered: NodeSet = first.keys().copied().collect();

    let integrity = client.and_then(|a| {
        first
            .iter()
            .find(|(_, v)| **v != a)
            .map(|(s, v)| Witness::nodes([*s]).with_detail(format!("delivered {v}, client sent {a}")))
    });

    let consistency = first.iter().next().and_then(|(s0, v0)| {
        first
            .iter()
            .find(|(_, v)| *v != v0)
            .map(|(s, v)| Witness::nodes([*s0, *s]).with_detail(format!("{v0} vs {v}")))
    });

    let live = trace.is_quiescent();
    let liveness = |w: Option<Witness>| {
        if live {
            Verdict::from_witness(w)
        } else {
            Verdict::NotApplicable
        }
    };
    let validity_over = |group: NodeSet| {
        client.and_then(|a| {
            let missing: NodeSet = group
                .iter()
                .filter(|s| first.get(s) != Some(&a))
                .collect();
            (!missing.is_empty()).then(|| ids(missing).with_detail(format!("did not deliver {a}")))
        })
    };
    let totality_over = |group: NodeSet| {
        if delivered.is_empty() {
            return None;
        }
        let missing = group.difference(delivered);
        (!missing.is_empty()).then(|| ids(missing).with_detail("never delivered"))
    };

    let mut verdicts = BTreeMap::new();
    verdicts.insert(Property::Validity, liveness(validity_over(correct)));
    verdicts.insert(Property::NoDuplication, Verdict::from_witness(dup));
    verdicts.insert(Property::Integrity, Verdict::from_witness(integrity));
    verdicts.insert(Property::Consistency, Verdict::from_witness(consistency));
    verdicts.insert(Property::Totality, liveness(totality_over(correct)));
    verdicts.insert(Property::ValidityIntact, liveness(validity_over(intact)));
    verdicts.insert(Property::TotalityIntact, liveness(totality_over(intact)));
    PropertyReport {
        verdicts,
        intact,
        covering_fail_prone: scenario.covering_fail_prone(),
        intact_exists: !intact.is_empty(),
        traces: 1,
        quiescent: usize::from(live),
        spec: None,
    }
}

/// Aggregates [`check_trace`] over an exploration, using the scenario's
/// intact set. A property fails if any trace fails it; the witness is taken
/// from the first such trace, tagged with its index. Whether `spec` holds is
/// [`PropertyReport::passes`].
pub fn check_exploration(traces: &[Trace], scenario: &Scenario, spec: Spec) -> PropertyReport {
    let intact = scenario.intact();
    let mut verdicts: BTreeMap<Property, Verdict> = BTreeMap::new();
    let mut quiescent = 0;
    for (i, t) in traces.iter().enumerate() {
        quiescent += usize::from(t.is_quiescent());
        let r = check_trace(t, scenario, intact);
        for (p, v) in r.verdicts {
            let slot = verdicts.entry(p).or_insert(Verdict::NotApplicable);
            match (&slot, v) {
                (Verdict::Fail(_), _) => {}
                (_, Verdict::Fail(mut w)) => {
                    w.detail = format!("trace {i}: {}", w.detail);
                    *slot = Verdict::Fail(w);
                }
                (Verdict::NotApplicable, Verdict::Pass) => *slot = Verdict::Pass,
                _ => {}
            }
        }
    }
    for p in Property::ALL {
        verdicts.entry(p).or_insert(Verdict::NotApplicable);
    }
    PropertyReport {
        verdicts,
        intact,
        covering_fail_prone: scenario.covering_fail_prone(),
        intact_exists: !intact.is_empty(),
        traces: traces.len(),
        quiescent,
        spec: Some(spec),
    }
}

/// Checks the invariants the correctness proofs rest on:
///
/// - `unique-ready`: trusted servers never send READY for two values;
/// - `first-ready-causality`: the first trusted server to send READY(a)
///   had received ECHO(a) from a whole quorum it may use;
/// - `delivery-causality`: every correct delivery of `a` is preceded by a
///   trusted server collecting such an ECHO quorum.
///
/// Trusted servers are the correct ones for DQS-based variants and `intact`
/// for slice-based ones. Faulty senders are never considered.
pub fn check_invariants(trace: &Trace, scenario: &Scenario, intact: NodeSet) -> AxiomReport {
    let protocol = &scenario.protocol;
    let trusted = if scenario.variant().is_federated() {
        intact
    } else {
        scenario.correct()
    };
    let mut echoes: BTreeMap<(NodeId, Value), NodeSet> = BTreeMap::new();
    let mut ready_by: BTreeMap<Value, NodeId> = BTreeMap::new();
    let mut first_ready_bad: Option<Witness> = None;
    let mut quorate: Vec<Value> = Vec::new();
    let mut delivery_bad: Option<Witness> = None;

    for e in &trace.events {
        match *e {
            Event::Receive { dst, msg } if msg.kind == MessageKind::Echo && trusted.contains(dst) => {
                if let Endpoint::Server(s) = msg.sender {
                    let got = echoes.entry((dst, msg.value)).or_default();
                    got.insert(s);
                    let uses = protocol.rules(dst).is_ok_and(|r| r.quorum_within(*got));
                    if uses && !quorate.contains(&msg.value) {
                        quorate.push(msg.value);
                    }
                }
            }
            Event::Send { msg, .. } if msg.kind == MessageKind::Ready => {
                let Endpoint::Server(s) = msg.sender else { continue };
                if !trusted.contains(s) || ready_by.contains_key(&msg.value) {
                    continue;
                }
                ready_by.insert(msg.value, s);
                let got = echoes.get(&(s, msg.value)).copied().unwrap_or_default();
                let ok = protocol.rules(s).is_ok_and(|r| r.quorum_within(got));
                if !ok && first_ready_bad.is_none() {
                    first_ready_bad = Some(
                        Witness::nodes([s])
                            .with_detail(format!("READY({}) with ECHO senders {got}", msg.value)),
                    );
                }
            }
            Event::Deliver { server, value } => {
                if scenario.correct().contains(server) && !quorate.contains(&value) && delivery_bad.is_none() {
                    delivery_bad = Some(
                        Witness::nodes([server])
                            .with_detail(format!("delivered {value} before any ECHO quorum")),
                    );
                }
            }
            _ => {}
        }
    }

    let unique = if ready_by.len() > 1 {
        let (vals, nodes): (Vec<Value>, Vec<NodeId>) = ready_by.iter().map(|(v, s)| (*v, *s)).unzip();
        let vals: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
        Some(Witness::nodes(nodes).with_detail(format!("values {}", vals.join(","))))
    } else {
        None
    };

    let mut report = AxiomReport::new();
    report.push("unique-ready", Verdict::from_witness(unique));
    report.push("first-ready-causality", Verdict::from_witness(first_ready_bad));
    report.push("delivery-causality", Verdict::from_witness(delivery_bad));
    report
}

/// Structural sanity of a trace: receptions match sends, a quiescent trace
/// left nothing undelivered between correct servers, and no correct server
/// still has an enabled handler.
pub fn check_well_formed(trace: &Trace, scenario: &Scenario) -> AxiomReport {
    let mut report = AxiomReport::new();
    report.push(
        "channel-integrity",
        Verdict::from_witness(
            trace
                .check_channel_integrity()
                .err()
                .map(|i| Witness::detail(format!("event {i}"))),
        ),
    );
    if !trace.is_quiescent() {
        report.push("fairness", Verdict::NotApplicable);
        report.push("quiescence-soundness", Verdict::NotApplicable);
        return report;
    }
    let pending = trace.unreceived_sends(scenario.correct());
    report.push(
        "fairness",
        Verdict::from_witness(pending.first().map(|(dst, m)| {
            Witness::nodes([*dst]).with_detail(format!("{m} from {} never received", m.sender))
        })),
    );
    let enabled: NodeSet = trace
        .final_states
        .iter()
        .filter(|(_, s)| scenario.protocol.any_guard_enabled(s))
        .map(|(n, _)| *n)
        .collect();
    report.push(
        "quiescence-soundness",
        Verdict::from_witness((!enabled.is_empty()).then(|| ids(enabled))),
    );
    report
}
