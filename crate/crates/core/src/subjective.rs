//! Per-view quorum structures for settings where faulty servers lie about
//! their slices.
//!
//! Each correct server holds its own [`Fbqs`]. Views must agree on the
//! slices of correct servers and may differ arbitrarily on faulty ones.
//! Faulty servers have no view; asking for one is a domain error.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::node::{NodeId, NodeSet};
use crate::quorum::{FailProneSystem, FailureScenario, Fbqs, QuorumSystem};
use crate::report::{AxiomReport, Verdict, Witness};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectiveFbqs {
    scenario: FailureScenario,
    views: BTreeMap<NodeId, Fbqs>,
}

impl SubjectiveFbqs {
    /// Checks that views are keyed exactly by the correct servers and share
    /// the universe, without checking agreement.
    pub fn from_views_unchecked(
        scenario: FailureScenario,
        views: BTreeMap<NodeId, Fbqs>,
    ) -> Result<Self> {
        let keys: NodeSet = views.keys().copied().collect();
        if keys != scenario.ok() {
            return Err(Error::Invalid(format!(
                "views must be keyed by exactly the correct servers {}, got {keys}",
                scenario.ok()
            )));
        }
        if let Some((v, view)) = views.iter().find(|(_, f)| f.universe() != scenario.universe()) {
            return Err(Error::Invalid(format!(
                "view of {v} has universe {}, expected {}",
                view.universe(),
                scenario.universe()
            )));
        }
        Ok(SubjectiveFbqs { scenario, views })
    }

    /// Like [`from_views_unchecked`](Self::from_views_unchecked) but also
    /// rejects views that disagree on a correct server's slices.
    pub fn new(scenario: FailureScenario, views: BTreeMap<NodeId, Fbqs>) -> Result<Self> {
        let s = Self::from_views_unchecked(scenario, views)?;
        let report = s.validate_agreement();
        if let Some(w) = report.get("agreement").and_then(Verdict::witness) {
            return Err(Error::Invalid(format!("views disagree on a correct server: {w}")));
        }
        Ok(s)
    }

    /// Builds views from one shared slice function plus, per viewer,
    /// overrides of faulty servers' slices.
    pub fn from_shared(
        base: &Fbqs,
        scenario: FailureScenario,
        overrides: &BTreeMap<NodeId, BTreeMap<NodeId, Vec<NodeSet>>>,
    ) -> Result<Self> {
        if base.universe() != scenario.universe() {
            return Err(Error::Invalid("base FBQS universe differs from scenario".into()));
        }
        for (viewer, table) in overrides {
            if !scenario.ok().contains(*viewer) {
                return Err(Error::Invalid(format!(
                    "view overrides keyed by {viewer}, which is not a correct server"
                )));
            }
            if let Some(target) = table.keys().find(|t| !scenario.bad().contains(**t)) {
                return Err(Error::Invalid(format!(
                    "view of {viewer} overrides slices of {target}, which is not faulty"
                )));
            }
        }
        let mut views = BTreeMap::new();
        for viewer in scenario.ok() {
            let mut slices = base.slice_map().clone();
            if let Some(table) = overrides.get(&viewer) {
                for (target, qs) in table {
                    slices.insert(*target, qs.clone());
                }
            }
            views.insert(viewer, Fbqs::new(scenario.universe(), slices)?);
        }
        Self::new(scenario, views)
    }

    /// Every correct server uses the same slice function.
    pub fn uniform(base: &Fbqs, scenario: FailureScenario) -> Result<Self> {
        Self::from_shared(base, scenario, &BTreeMap::new())
    }

    pub fn scenario(&self) -> &FailureScenario {
        &self.scenario
    }

    pub fn universe(&self) -> NodeSet {
        self.scenario.universe()
    }

    pub fn views(&self) -> &BTreeMap<NodeId, Fbqs> {
        &self.views
    }

    pub fn view(&self, v: NodeId) -> Result<&Fbqs> {
        self.views.get(&v).ok_or_else(|| {
            Error::Domain(format!("server {v} is faulty or unknown; it has no view"))
        })
    }

    /// All views agree on the slices of every correct server. The witness
    /// is `(v1, v2, v)`.
    pub fn validate_agreement(&self) -> AxiomReport {
        let mut report = AxiomReport::new();
        let mut witness = None;
        'search: for v in self.scenario.ok() {
            let mut reference: Option<(NodeId, &[NodeSet])> = None;
            for (viewer, view) in &self.views {
                let qs = view.slices(v).unwrap_or(&[]);
                match reference {
                    None => reference = Some((*viewer, qs)),
                    Some((first, expected)) if expected != qs => {
                        witness = Some(Witness::nodes([first, *viewer, v]));
                        break 'search;
                    }
                    Some(_) => {}
                }
            }
        }
        report.push("agreement", Verdict::from_witness(witness));
        report
    }

    /// Every correct server's view has quorum intersection.
    pub fn subjective_quorum_intersection(&self) -> Result<bool> {
        for view in self.views.values() {
            if !view.has_quorum_intersection()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn require_intersection(&self) -> Result<()> {
        if !self.subjective_quorum_intersection()? {
            return Err(Error::Precondition(
                "subjective FBQS lacks quorum intersection".into(),
            ));
        }
        Ok(())
    }

    /// The quorums known by each correct server.
    pub fn induce_subjective_quorums(&self) -> Result<SubjectiveQuorumSystem> {
        self.require_intersection()?;
        let per_view = self
            .views
            .iter()
            .map(|(v, view)| Ok((*v, view.enumerate_quorums()?)))
            .collect::<Result<_>>()?;
        Ok(SubjectiveQuorumSystem { per_view })
    }

    /// Intact servers, computed in every view; all views must yield the
    /// same set since intactness only depends on correct servers' slices.
    pub fn intact_set(&self) -> Result<NodeSet> {
        self.require_intersection()?;
        let mut common: Option<(NodeId, NodeSet)> = None;
        for (v, view) in &self.views {
            let intact = view.intact_set(&self.scenario)?;
            match common {
                None => common = Some((*v, intact)),
                Some((w, other)) if other != intact => {
                    return Err(Error::Invariant(format!(
                        "intact set differs between views of {w} ({other}) and {v} ({intact})"
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(common.map_or(NodeSet::EMPTY, |(_, s)| s))
    }

    /// Per view, the maximal failure sets leaving that view's intact set
    /// non-empty, paired with the view's quorums.
    pub fn induced_subjective_dqs(&self) -> Result<SubjectiveDqs> {
        let quorums = self.induce_subjective_quorums()?;
        if self.intact_set()?.is_empty() {
            return Err(Error::Precondition(
                "induced subjective DQS requires an intact server".into(),
            ));
        }
        let fail_prone = self
            .views
            .iter()
            .map(|(v, view)| Ok((*v, FailProneSystem::new(view.tolerable_failures()?)?)))
            .collect::<Result<_>>()?;
        let sdqs = SubjectiveDqs {
            quorums,
            fail_prone,
            scenario: self.scenario,
        };
        let report = sdqs.check();
        if !(report.holds("sd-safety") && report.holds("sd-consistency") && report.holds("sd-availability")) {
            return Err(Error::Invariant(format!(
                "induced subjective DQS fails its axioms:\n{report}"
            )));
        }
        Ok(sdqs)
    }

    /// `b` overlaps every slice of `v` as known by `v` itself.
    pub fn v_blocking(&self, v: NodeId, b: NodeSet) -> Result<bool> {
        self.view(v)?.is_v_blocking(v, b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectiveQuorumSystem {
    pub per_view: BTreeMap<NodeId, QuorumSystem>,
}

impl SubjectiveQuorumSystem {
    pub fn get(&self, v: NodeId) -> Result<&QuorumSystem> {
        self.per_view
            .get(&v)
            .ok_or_else(|| Error::Domain(format!("server {v} has no quorum system")))
    }

    /// Union of all views' quorums, sorted.
    pub fn all_quorums(&self) -> Vec<NodeSet> {
        let mut all: Vec<NodeSet> = self.per_view.values().flat_map(|q| q.quorums()).collect();
        all.sort();
        all.dedup();
        all
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectiveDqs {
    pub quorums: SubjectiveQuorumSystem,
    pub fail_prone: BTreeMap<NodeId, FailProneSystem>,
    pub scenario: FailureScenario,
}

impl SubjectiveDqs {
    pub fn new(
        quorums: SubjectiveQuorumSystem,
        fail_prone: BTreeMap<NodeId, FailProneSystem>,
        scenario: FailureScenario,
    ) -> Result<Self> {
        let qk: NodeSet = quorums.per_view.keys().copied().collect();
        let fk: NodeSet = fail_prone.keys().copied().collect();
        if qk != scenario.ok() || fk != scenario.ok() {
            return Err(Error::Invalid(format!(
                "subjective DQS must be keyed by the correct servers {}",
                scenario.ok()
            )));
        }
        Ok(SubjectiveDqs {
            quorums,
            fail_prone,
            scenario,
        })
    }

    pub fn fail_prone_of(&self, v: NodeId) -> Result<&FailProneSystem> {
        self.fail_prone
            .get(&v)
            .ok_or_else(|| Error::Domain(format!("server {v} has no fail-prone system")))
    }

    /// Per-view quorum-system axioms, SD-safety, SD-consistency,
    /// SD-availability, and the strong SD-consistency variant that ignores
    /// whether `B` covers the faulty set.
    pub fn check(&self) -> AxiomReport {
        let mut report = AxiomReport::new();
        let bad = self.scenario.bad();

        let broken_view = self
            .quorums
            .per_view
            .iter()
            .find(|(_, q)| !q.validate().passed())
            .map(|(v, _)| Witness::nodes([*v]));
        report.push("quorum-systems", Verdict::from_witness(broken_view));

        let unsafe_view = self
            .fail_prone
            .iter()
            .find(|(_, b)| !b.covers(bad))
            .map(|(v, _)| Witness::nodes([*v]));
        report.push("sd-safety", Verdict::from_witness(unsafe_view));

        let all = self.quorums.all_quorums();
        let consistency = |require_cover: bool| -> Option<Witness> {
            for (v, qv) in &self.quorums.per_view {
                let bs = &self.fail_prone[v];
                for u1 in qv.quorums() {
                    for u2 in &all {
                        let common = u1.intersection(*u2);
                        for b in bs.sets() {
                            if (!require_cover || bad.is_subset(*b)) && common.is_subset(*b) {
                                return Some(Witness {
                                    nodes: vec![*v],
                                    sets: vec![u1, *u2, *b],
                                    detail: String::new(),
                                });
                            }
                        }
                    }
                }
            }
            None
        };
        report.push("sd-consistency", Verdict::from_witness(consistency(true)));

        let unavailable = self.quorums.per_view.iter().find_map(|(v, qv)| {
            self.fail_prone[v]
                .sets()
                .iter()
                .find(|b| !qv.quorums().any(|u| !u.intersects(**b)))
                .map(|b| Witness {
                    nodes: vec![*v],
                    sets: vec![*b],
                    detail: String::new(),
                })
        });
        report.push("sd-availability", Verdict::from_witness(unavailable));
        report.push("sd-consistency-strong", Verdict::from_witness(consistency(false)));
        report
    }
}
