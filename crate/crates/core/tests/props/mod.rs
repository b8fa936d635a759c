//! Randomized structural properties, shared by the core test suite and the
//! acceptance target. Each runs a fixed-seed proptest over universes of at
//! most eight servers and returns the number of cases checked.
//!
//! Quorums and intact sets are recomputed here by brute force straight from
//! the definitions, independently of the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fbqs::{FailureScenario, Fbqs, NodeId, NodeSet, SubjectiveFbqs};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};

pub const CASES: u32 = 256;

fn runner(seed: u64) -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        max_global_rejects: 200_000,
        ..Config::default()
    })
}

fn finish(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<u32, String> {
    r.map(|_| CASES).map_err(|e| e.to_string())
}

fn universe(n: usize) -> NodeSet {
    NodeSet::from_bits(((1u64 << n) - 1) << 1)
}

fn lift(mask: u64) -> NodeSet {
    NodeSet::from_bits(mask << 1)
}

fn id(v: u32) -> NodeId {
    NodeId::new(v).unwrap()
}

/// Slices drawn as the union of two uniform subsets (each server in a slice
/// with probability 3/4), plus the owner.
fn slice_sets(n: usize) -> impl Strategy<Value = Vec<Vec<(u64, u64)>>> {
    let full = (1u64 << n) - 1;
    prop::collection::vec(prop::collection::vec((0..=full, 0..=full), 1..=3), n)
}

fn build(n: usize, raw: &[Vec<(u64, u64)>]) -> Fbqs {
    let slices = raw
        .iter()
        .enumerate()
        .map(|(i, qs)| {
            let v = id(i as u32 + 1);
            let qs = qs
                .iter()
                .map(|(a, b)| {
                    let mut q = lift(a | b);
                    q.insert(v);
                    q
                })
                .collect();
            (v, qs)
        })
        .collect();
    Fbqs::new(universe(n), slices).unwrap()
}

pub fn fbqs(min: usize, max: usize) -> impl Strategy<Value = Fbqs> {
    (min..=max).prop_flat_map(|n| slice_sets(n).prop_map(move |raw| build(n, &raw)))
}

/// An FBQS with a sparse faulty set (each server with probability 1/8).
pub fn fbqs_with_faults(min: usize, max: usize) -> impl Strategy<Value = (Fbqs, NodeSet)> {
    (min..=max).prop_flat_map(|n| {
        let full = (1u64 << n) - 1;
        (slice_sets(n), 0..=full, 0..=full, 0..=full)
            .prop_map(move |(raw, a, b, c)| (build(n, &raw), lift(a & b & c)))
    })
}

/// A subjective FBQS: a shared slice function, a sparse faulty set, and for
/// every correct reader fresh slices for each faulty server.
pub fn subjective(min: usize, max: usize) -> impl Strategy<Value = SubjectiveFbqs> {
    (min..=max).prop_flat_map(|n| {
        let full = (1u64 << n) - 1;
        (
            slice_sets(n),
            0..=full,
            0..=full,
            prop::collection::vec(slice_sets(n), n),
        )
            .prop_map(move |(raw, a, b, lies)| {
                let base = build(n, &raw);
                let bad = lift(a & b);
                let scenario = FailureScenario::new(base.universe(), bad).unwrap();
                let mut overrides = BTreeMap::new();
                for (r, lie) in scenario.ok().iter().zip(&lies) {
                    let told = build(n, lie);
                    let table: BTreeMap<NodeId, Vec<NodeSet>> =
                        bad.iter().map(|f| (f, told.slices(f).unwrap().to_vec())).collect();
                    overrides.insert(r, table);
                }
                SubjectiveFbqs::from_shared(&base, scenario, &overrides).unwrap()
            })
    })
}

// Brute-force oracle.

fn slices_of(f: &Fbqs, v: NodeId) -> &[NodeSet] {
    f.slices(v).unwrap()
}

pub fn oracle_quorums_within(f: &Fbqs, within: NodeSet) -> Vec<NodeSet> {
    within
        .subsets()
        .filter(|u| {
            !u.is_empty()
                && u.iter()
                    .all(|v| slices_of(f, v).iter().any(|q| q.intersection(within).is_subset(*u)))
        })
        .collect()
}

pub fn oracle_qi(quorums: &[NodeSet]) -> bool {
    quorums.iter().all(|a| quorums.iter().all(|b| a.intersects(*b)))
}

pub fn oracle_candidate(f: &Fbqs, i: NodeSet) -> bool {
    if i.is_empty() {
        return true;
    }
    let is_quorum = i.iter().all(|v| slices_of(f, v).iter().any(|q| q.is_subset(i)));
    is_quorum && oracle_qi(&oracle_quorums_within(f, i))
}

pub fn oracle_intact(f: &Fbqs, bad: NodeSet) -> NodeSet {
    let ok = f.universe().difference(bad);
    ok.subsets()
        .filter(|i| oracle_candidate(f, *i))
        .fold(NodeSet::EMPTY, NodeSet::union)
}

fn has_qi(f: &Fbqs) -> bool {
    oracle_qi(&oracle_quorums_within(f, f.universe()))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn reject_unless(cond: bool, why: &'static str) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::reject(why))
    }
}

/// Quorums are closed under union, and enumeration matches the definition.
pub fn quorum_union_closure() -> Result<u32, String> {
    finish(runner(1).run(&fbqs(1, 8), |f| {
        let qs: Vec<NodeSet> = f.enumerate_quorums().unwrap().quorums().collect();
        let mut expected = oracle_quorums_within(&f, f.universe());
        expected.sort();
        check(qs == expected, || "enumeration".into())?;
        for a in &qs {
            for b in &qs {
                check(f.is_quorum(a.union(*b)).unwrap(), || format!("{a} ∪ {b}"))?;
            }
        }
        Ok(())
    }))
}

/// Intact candidates avoiding the faulty set are closed under union, and the
/// library's intact set is their union.
pub fn intact_candidate_union_closure() -> Result<u32, String> {
    finish(runner(2).run(&fbqs_with_faults(1, 7), |(f, bad)| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let ok = f.universe().difference(bad);
        let cands: Vec<NodeSet> = ok.subsets().filter(|i| f.is_intact_candidate(*i).unwrap()).collect();
        for a in &cands {
            for b in &cands {
                check(f.is_intact_candidate(a.union(*b)).unwrap(), || format!("{a} ∪ {b}"))?;
            }
        }
        let scenario = FailureScenario::new(f.universe(), bad).unwrap();
        let intact = f.intact_set(&scenario).unwrap();
        check(intact == oracle_intact(&f, bad), || format!("intact {intact}"))
    }))
}

/// With quorum intersection and some intact server, any two quorums share an
/// intact server.
pub fn intact_intersection() -> Result<u32, String> {
    finish(runner(3).run(&fbqs_with_faults(1, 8), |(f, bad)| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let intact = f.intact_set(&FailureScenario::new(f.universe(), bad).unwrap()).unwrap();
        reject_unless(!intact.is_empty(), "nothing intact")?;
        let qs: Vec<NodeSet> = f.enumerate_quorums().unwrap().quorums().collect();
        for a in &qs {
            for b in &qs {
                check(a.intersection(*b).intersects(intact), || format!("{a} ∩ {b} misses {intact}"))?;
            }
        }
        Ok(())
    }))
}

/// Subjective version: every view yields the same intact set, and quorums
/// from any two views share an intact server.
pub fn subjective_intact_intersection() -> Result<u32, String> {
    finish(runner(4).run(&subjective(2, 7), |s| {
        reject_unless(s.subjective_quorum_intersection().unwrap(), "no subjective intersection")?;
        let intact = s.intact_set().unwrap();
        for (v, view) in s.views() {
            let mine = oracle_intact(view, s.scenario().bad());
            check(mine == intact, || format!("view of {v}: {mine} vs {intact}"))?;
        }
        reject_unless(!intact.is_empty(), "nothing intact")?;
        let all = s.induce_subjective_quorums().unwrap().all_quorums();
        for a in &all {
            for b in &all {
                check(a.intersection(*b).intersects(intact), || format!("{a} ∩ {b} misses {intact}"))?;
            }
        }
        Ok(())
    }))
}

/// The befouled servers never block an intact one.
pub fn befouled_not_blocking() -> Result<u32, String> {
    finish(runner(5).run(&fbqs_with_faults(1, 8), |(f, bad)| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let intact = f.intact_set(&FailureScenario::new(f.universe(), bad).unwrap()).unwrap();
        let befouled = f.universe().difference(intact);
        for v in intact {
            check(!f.is_v_blocking(v, befouled).unwrap(), || format!("{befouled} blocks {v}"))?;
        }
        Ok(())
    }))
}

/// Subjective version, with blocking judged in the intact server's own view.
pub fn subjective_befouled_not_blocking() -> Result<u32, String> {
    finish(runner(6).run(&subjective(2, 7), |s| {
        reject_unless(s.subjective_quorum_intersection().unwrap(), "no subjective intersection")?;
        let intact = s.intact_set().unwrap();
        let befouled = s.universe().difference(intact);
        for v in intact {
            check(!s.v_blocking(v, befouled).unwrap(), || format!("{befouled} blocks {v}"))?;
        }
        Ok(())
    }))
}

/// A set blocking none of the servers outside it leaves a quorum behind
/// (or is everything).
pub fn non_blocking_complement_is_quorum() -> Result<u32, String> {
    let strategy = (1usize..=8).prop_flat_map(|n| {
        let full = (1u64 << n) - 1;
        (slice_sets(n), 0..=full).prop_map(move |(raw, b)| (build(n, &raw), lift(b)))
    });
    finish(runner(7).run(&strategy, |(f, b)| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let rest = f.universe().difference(b);
        let blocks_none = rest.iter().all(|v| !f.is_v_blocking(v, b).unwrap());
        reject_unless(blocks_none, "blocks someone")?;
        check(rest.is_empty() || f.is_quorum(rest).unwrap(), || format!("complement of {b}"))
    }))
}

/// In a DQS whose fail-prone system covers the faulty set, the correct part
/// of any quorum escapes every fail-prone set.
pub fn correct_part_escapes_fail_prone() -> Result<u32, String> {
    finish(runner(8).run(&fbqs_with_faults(1, 6), |(f, bad)| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let dqs = f.induced_dqs().unwrap();
        reject_unless(dqs.fail_prone.covers(bad), "faulty set not covered")?;
        for u in dqs.quorum_system.quorums() {
            let plus = u.difference(bad);
            for b in dqs.fail_prone.sets() {
                check(!plus.is_subset(*b), || format!("{plus} ⊆ {b}"))?;
            }
        }
        Ok(())
    }))
}

/// The induced DQS passes its axioms and its fail-prone sets are exactly the
/// maximal failures leaving something intact.
pub fn induced_dqs_closure() -> Result<u32, String> {
    finish(runner(9).run(&fbqs(1, 6), |f| {
        reject_unless(has_qi(&f), "no quorum intersection")?;
        let dqs = f.induced_dqs().unwrap();
        check(dqs.check(None).passed(), || dqs.check(None).to_string())?;
        let survivable: Vec<NodeSet> = f
            .universe()
            .subsets()
            .filter(|b| !oracle_intact(&f, *b).is_empty())
            .collect();
        let mut maximal: Vec<NodeSet> = survivable
            .iter()
            .copied()
            .filter(|b| !survivable.iter().any(|c| c != b && b.is_subset(*c)))
            .collect();
        maximal.sort();
        let mut got = dqs.fail_prone.sets().to_vec();
        got.sort();
        check(got == maximal, || format!("{got:?} vs {maximal:?}"))
    }))
}

/// The induced subjective DQS passes its axioms whenever something is intact.
pub fn induced_subjective_dqs_closure() -> Result<u32, String> {
    finish(runner(10).run(&subjective(2, 6), |s| {
        reject_unless(s.subjective_quorum_intersection().unwrap(), "no subjective intersection")?;
        reject_unless(!s.intact_set().unwrap().is_empty(), "nothing intact")?;
        let sdqs = s.induced_subjective_dqs().unwrap();
        let report = sdqs.check();
        for name in ["quorum-systems", "sd-safety", "sd-consistency", "sd-availability"] {
            check(report.holds(name), || format!("{name}\n{report}"))?;
        }
        Ok(())
    }))
}

pub const ALL: [(&str, fn() -> Result<u32, String>); 10] = [
    ("quorum union closure", quorum_union_closure),
    ("intact candidate union closure", intact_candidate_union_closure),
    ("intact intersection", intact_intersection),
    ("subjective intact intersection", subjective_intact_intersection),
    ("befouled not blocking", befouled_not_blocking),
    ("subjective befouled not blocking", subjective_befouled_not_blocking),
    ("non-blocking complement is a quorum", non_blocking_complement_is_quorum),
    ("correct part escapes fail-prone sets", correct_part_escapes_fail_prone),
    ("induced DQS closure", induced_dqs_closure),
    ("induced subjective DQS closure", induced_subjective_dqs_closure),
];
