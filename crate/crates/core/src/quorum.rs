//! Objective quorum structures: federated Byzantine quorum systems (slice
//! functions), classical quorum and fail-prone systems, dissemination quorum
//! system axioms, intact sets and v-blocking sets.
//!
//! Everything here is immutable after construction and enumeration-based.
//! Enumeration is exponential in the universe size, so every operation that
//! walks the power set refuses universes larger than [`UNIVERSE_CAP`].

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::node::{fmt_family, NodeId, NodeSet};
use crate::report::{AxiomReport, Verdict, Witness};

/// Largest universe any power-set enumeration accepts.
pub const UNIVERSE_CAP: usize = 16;

pub(crate) fn check_cap(universe: NodeSet) -> Result<()> {
    if universe.len() > UNIVERSE_CAP {
        return Err(Error::Capacity {
            size: universe.len(),
            cap: UNIVERSE_CAP,
        });
    }
    Ok(())
}

/// The ⊆-minimal members of `family`.
pub fn minimal_elements<I: IntoIterator<Item = NodeSet>>(family: I) -> Vec<NodeSet> {
    let mut sorted: Vec<NodeSet> = family.into_iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut minimal: Vec<NodeSet> = Vec::new();
    // Sorted by size, so anything non-minimal contains an earlier minimal set.
    for s in sorted {
        if !minimal.iter().any(|m| m.is_subset(s)) {
            minimal.push(s);
        }
    }
    minimal
}

/// The ⊆-maximal members of `family`.
pub fn maximal_elements<I: IntoIterator<Item = NodeSet>>(family: I) -> Vec<NodeSet> {
    let mut sorted: Vec<NodeSet> = family.into_iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut maximal: Vec<NodeSet> = Vec::new();
    for s in sorted.into_iter().rev() {
        if !maximal.iter().any(|m| s.is_subset(*m)) {
            maximal.push(s);
        }
    }
    maximal.sort();
    maximal
}

/// A set of faulty servers within a universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FailureScenario {
    universe: NodeSet,
    bad: NodeSet,
}

impl FailureScenario {
    pub fn new(universe: NodeSet, bad: NodeSet) -> Result<Self> {
        if !bad.is_subset(universe) {
            return Err(Error::Domain(format!(
                "faulty set {bad} is not a subset of universe {universe}"
            )));
        }
        Ok(FailureScenario { universe, bad })
    }

    pub fn universe(&self) -> NodeSet {
        self.universe
    }

    pub fn bad(&self) -> NodeSet {
        self.bad
    }

    pub fn ok(&self) -> NodeSet {
        self.universe.difference(self.bad)
    }
}

/// A federated Byzantine quorum system: every server's quorum slices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fbqs {
    universe: NodeSet,
    slices: BTreeMap<NodeId, Vec<NodeSet>>,
}

impl Fbqs {
    /// Validates totality, non-emptiness, containment in the universe and
    /// self-membership of every slice. Slices are deduplicated and sorted.
    pub fn new(universe: NodeSet, slices: BTreeMap<NodeId, Vec<NodeSet>>) -> Result<Self> {
        let mut normalized = BTreeMap::new();
        for v in universe {
            let Some(vs) = slices.get(&v) else {
                return Err(Error::Invalid(format!("server {v} has no quorum slices")));
            };
            if vs.is_empty() {
                return Err(Error::Invalid(format!("server {v} has an empty slice set")));
            }
            let mut vs = vs.clone();
            for q in &vs {
                if !q.contains(v) {
                    return Err(Error::Invalid(format!(
                        "slice {q} of server {v} must contain its owner"
                    )));
                }
                if !q.is_subset(universe) {
                    return Err(Error::Invalid(format!(
                        "slice {q} of server {v} leaves the universe {universe}"
                    )));
                }
            }
            vs.sort();
            vs.dedup();
            normalized.insert(v, vs);
        }
        if let Some(extra) = slices.keys().find(|k| !universe.contains(**k)) {
            return Err(Error::Invalid(format!("slices given for unknown server {extra}")));
        }
        Ok(Fbqs {
            universe,
            slices: normalized,
        })
    }

    /// Parses `[(owner, [[members]])]` literals; panics on invalid input.
    pub fn from_literal(universe: &[u32], slices: &[(u32, &[&[u32]])]) -> Self {
        let map = slices
            .iter()
            .map(|(v, qs)| {
                (
                    NodeId::new(*v).unwrap(),
                    qs.iter().map(|q| NodeSet::of(q)).collect(),
                )
            })
            .collect();
        Fbqs::new(NodeSet::of(universe), map).expect("invalid FBQS literal")
    }

    pub fn universe(&self) -> NodeSet {
        self.universe
    }

    pub fn slices(&self, v: NodeId) -> Result<&[NodeSet]> {
        self.slices
            .get(&v)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Domain(format!("server {v} is not in the universe")))
    }

    pub fn slice_map(&self) -> &BTreeMap<NodeId, Vec<NodeSet>> {
        &self.slices
    }

    fn ensure_subset(&self, u: NodeSet) -> Result<()> {
        if !u.is_subset(self.universe) {
            return Err(Error::Domain(format!(
                "{u} is not a subset of universe {}",
                self.universe
            )));
        }
        Ok(())
    }

    fn has_slice_within(&self, v: NodeId, u: NodeSet) -> bool {
        self.slices[&v].iter().any(|q| q.is_subset(u))
    }

    fn quorum_unchecked(&self, u: NodeSet) -> bool {
        !u.is_empty() && u.iter().all(|v| self.has_slice_within(v, u))
    }

    /// `u` is non-empty and contains a slice of each of its members.
    pub fn is_quorum(&self, u: NodeSet) -> Result<bool> {
        self.ensure_subset(u)?;
        Ok(self.quorum_unchecked(u))
    }

    /// The largest quorum contained in `s` (empty if none). Quorums are
    /// closed under union, so this is the union of all quorums inside `s`.
    pub fn largest_quorum_within(&self, s: NodeSet) -> NodeSet {
        let mut t = s.intersection(self.universe);
        loop {
            let keep: NodeSet = t.iter().filter(|v| self.has_slice_within(*v, t)).collect();
            if keep == t {
                return t;
            }
            t = keep;
        }
    }

    /// Every quorum of this FBQS.
    pub fn enumerate_quorums(&self) -> Result<QuorumSystem> {
        check_cap(self.universe)?;
        let quorums = self
            .universe
            .subsets()
            .filter(|u| self.quorum_unchecked(*u))
            .collect();
        Ok(QuorumSystem { quorums })
    }

    /// The ⊆-minimal quorums.
    pub fn minimal_quorums(&self) -> Result<Vec<NodeSet>> {
        check_cap(self.universe)?;
        // u is minimal iff removing any one member leaves no quorum behind.
        let mut minimal: Vec<NodeSet> = self
            .universe
            .subsets()
            .filter(|u| self.quorum_unchecked(*u))
            .filter(|u| {
                u.iter()
                    .all(|v| self.largest_quorum_within(u.difference(NodeSet::singleton(v))).is_empty())
            })
            .collect();
        minimal.sort();
        Ok(minimal)
    }

    /// Any two quorums intersect. Checked on minimal quorums: every quorum
    /// contains a minimal one, so disjoint quorums imply disjoint minimal
    /// quorums and vice versa.
    pub fn has_quorum_intersection(&self) -> Result<bool> {
        let minimal = self.minimal_quorums()?;
        Ok(pairwise_intersect(&minimal))
    }

    /// Restriction to `i`: universe `i`, and `S|i(v) = {q ∩ i | q ∈ S(v)}`
    /// for `v ∈ i`.
    pub fn project(&self, i: NodeSet) -> Result<Fbqs> {
        self.ensure_subset(i)?;
        if i.is_empty() {
            return Err(Error::Domain("cannot project onto the empty set".into()));
        }
        let slices = i
            .iter()
            .map(|v| {
                let mut qs: Vec<NodeSet> = self.slices[&v].iter().map(|q| q.intersection(i)).collect();
                qs.sort();
                qs.dedup();
                (v, qs)
            })
            .collect();
        Ok(Fbqs { universe: i, slices })
    }

    /// `i` is empty or a quorum, and the projection to `i` has quorum
    /// intersection. Correctness (`i` avoids the faulty set) is the caller's
    /// concern.
    pub fn is_intact_candidate(&self, i: NodeSet) -> Result<bool> {
        self.ensure_subset(i)?;
        if i.is_empty() {
            return Ok(true);
        }
        if !self.quorum_unchecked(i) {
            return Ok(false);
        }
        self.project(i)?.has_quorum_intersection()
    }

    /// The intact servers: the union of every intact candidate avoiding the
    /// faulty set. Requires quorum intersection, under which the candidates
    /// are closed under union and the union is itself a candidate.
    pub fn intact_set(&self, scenario: &FailureScenario) -> Result<NodeSet> {
        self.ensure_subset(scenario.bad())?;
        if !self.has_quorum_intersection()? {
            return Err(Error::Precondition(
                "intact set requires quorum intersection".into(),
            ));
        }
        self.intact_union(scenario.bad())
    }

    pub(crate) fn intact_union(&self, bad: NodeSet) -> Result<NodeSet> {
        let ok = self.universe.difference(bad);
        let mut union = NodeSet::EMPTY;
        for i in ok.subsets() {
            if i.is_empty() || i.is_subset(union) || !self.quorum_unchecked(i) {
                continue;
            }
            if self.project(i)?.has_quorum_intersection()? {
                union = union.union(i);
            }
        }
        if !self.is_intact_candidate(union)? {
            return Err(Error::Invariant(format!(
                "union {union} of intact candidates is not itself a candidate"
            )));
        }
        Ok(union)
    }

    /// `b` overlaps every slice of `v`.
    pub fn is_v_blocking(&self, v: NodeId, b: NodeSet) -> Result<bool> {
        let slices = self.slices(v)?;
        Ok(slices.iter().all(|q| q.intersects(b)))
    }

    /// The DQS induced by this FBQS: its quorums, paired with the maximal
    /// failure sets that leave some server intact.
    pub fn induced_dqs(&self) -> Result<Dqs> {
        if !self.has_quorum_intersection()? {
            return Err(Error::Precondition(
                "induced DQS requires quorum intersection".into(),
            ));
        }
        let quorum_system = self.enumerate_quorums()?;
        let fail_prone = FailProneSystem::new(self.tolerable_failures()?)?;
        let dqs = Dqs {
            quorum_system,
            fail_prone,
        };
        let report = dqs.check(None);
        if !report.passed() {
            return Err(Error::Invariant(format!("induced DQS fails its axioms:\n{report}")));
        }
        Ok(dqs)
    }

    /// Maximal `B ⊆ V` whose failure leaves a non-empty intact set.
    pub(crate) fn tolerable_failures(&self) -> Result<Vec<NodeSet>> {
        check_cap(self.universe)?;
        let mut survivable = Vec::new();
        for b in self.universe.subsets() {
            if !self.intact_union(b)?.is_empty() {
                survivable.push(b);
            }
        }
        Ok(maximal_elements(survivable))
    }
}

pub(crate) fn pairwise_intersect(family: &[NodeSet]) -> bool {
    family
        .iter()
        .enumerate()
        .all(|(i, a)| family[i..].iter().all(|b| a.intersects(*b)))
}

/// A family of quorums. Construction does not enforce the quorum-system
/// axioms, so that violating families can be reported; see
/// [`QuorumSystem::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuorumSystem {
    quorums: BTreeSet<NodeSet>,
}

impl QuorumSystem {
    pub fn new<I: IntoIterator<Item = NodeSet>>(quorums: I) -> Self {
        QuorumSystem {
            quorums: quorums.into_iter().collect(),
        }
    }

    pub fn quorums(&self) -> impl Iterator<Item = NodeSet> + '_ {
        self.quorums.iter().copied()
    }

    pub fn contains(&self, u: NodeSet) -> bool {
        self.quorums.contains(&u)
    }

    pub fn len(&self) -> usize {
        self.quorums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quorums.is_empty()
    }

    pub fn minimal(&self) -> Vec<NodeSet> {
        minimal_elements(self.quorums())
    }

    pub fn support(&self) -> NodeSet {
        self.quorums().fold(NodeSet::EMPTY, NodeSet::union)
    }

    /// Non-empty family, non-empty members, pairwise intersection, closure
    /// under union.
    pub fn validate(&self) -> AxiomReport {
        let mut report = AxiomReport::new();
        let qs: Vec<NodeSet> = self.quorums().collect();
        let nonempty = if qs.is_empty() {
            Some(Witness::detail("no quorums"))
        } else {
            qs.iter().find(|q| q.is_empty()).map(|q| Witness::sets([*q]))
        };
        report.push("quorums-nonempty", Verdict::from_witness(nonempty));
        let mut disjoint = None;
        let mut not_closed = None;
        'outer: for (i, a) in qs.iter().enumerate() {
            for b in &qs[i..] {
                if disjoint.is_none() && !a.intersects(*b) {
                    disjoint = Some(Witness::sets([*a, *b]));
                }
                if not_closed.is_none() && !self.quorums.contains(&a.union(*b)) {
                    not_closed = Some(Witness::sets([*a, *b]));
                }
                if disjoint.is_some() && not_closed.is_some() {
                    break 'outer;
                }
            }
        }
        report.push("quorum-intersection", Verdict::from_witness(disjoint));
        report.push("union-closure", Verdict::from_witness(not_closed));
        report
    }
}

impl std::fmt::Display for QuorumSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&fmt_family(&self.quorums))
    }
}

/// An antichain of possible simultaneous failure sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailProneSystem {
    sets: Vec<NodeSet>,
}

impl FailProneSystem {
    pub fn new<I: IntoIterator<Item = NodeSet>>(sets: I) -> Result<Self> {
        let mut sets: Vec<NodeSet> = sets.into_iter().collect();
        sets.sort();
        sets.dedup();
        if sets.is_empty() {
            return Err(Error::Invalid("fail-prone system must be non-empty".into()));
        }
        for a in &sets {
            if let Some(b) = sets.iter().find(|b| *b != a && a.is_subset(**b)) {
                return Err(Error::Invalid(format!(
                    "fail-prone system is not an antichain: {a} is contained in {b}"
                )));
            }
        }
        Ok(FailProneSystem { sets })
    }

    pub fn sets(&self) -> &[NodeSet] {
        &self.sets
    }

    /// Some element contains every server in `bad`.
    pub fn covers(&self, bad: NodeSet) -> bool {
        self.sets.iter().any(|b| bad.is_subset(*b))
    }

    /// `s` is non-empty and not contained in any element: some member of `s`
    /// must then be correct whenever the failures respect this system.
    pub fn escapes(&self, s: NodeSet) -> bool {
        !s.is_empty() && self.sets.iter().all(|b| !s.is_subset(*b))
    }
}

impl std::fmt::Display for FailProneSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&fmt_family(&self.sets))
    }
}

/// A quorum system paired with a fail-prone system. May be constructed
/// unchecked; protocols require [`Dqs::check`] to pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dqs {
    pub quorum_system: QuorumSystem,
    pub fail_prone: FailProneSystem,
}

impl Dqs {
    pub fn new(quorum_system: QuorumSystem, fail_prone: FailProneSystem) -> Self {
        Dqs {
            quorum_system,
            fail_prone,
        }
    }

    /// Quorum-system axioms, D-consistency and D-availability, each with a
    /// witness on failure. With a scenario, also whether some fail-prone
    /// element covers all faulty servers.
    pub fn check(&self, scenario: Option<&FailureScenario>) -> AxiomReport {
        let mut report = self.quorum_system.validate();
        let qs: Vec<NodeSet> = self.quorum_system.quorums().collect();

        let mut consistency = None;
        'search: for (i, u1) in qs.iter().enumerate() {
            for u2 in &qs[i..] {
                let common = u1.intersection(*u2);
                if let Some(b) = self.fail_prone.sets().iter().find(|b| common.is_subset(**b)) {
                    consistency = Some(Witness::sets([*u1, *u2, *b]));
                    break 'search;
                }
            }
        }
        report.push("d-consistency", Verdict::from_witness(consistency));

        let availability = self
            .fail_prone
            .sets()
            .iter()
            .find(|b| !qs.iter().any(|u| !u.intersects(**b)))
            .map(|b| Witness::sets([*b]));
        report.push("d-availability", Verdict::from_witness(availability));

        if let Some(s) = scenario {
            let covering = if self.fail_prone.covers(s.bad()) {
                None
            } else {
                Some(Witness::sets([s.bad()]).with_detail("no fail-prone element covers the faulty set"))
            };
            report.push("covering-fail-prone", Verdict::from_witness(covering));
        }
        report
    }
}
