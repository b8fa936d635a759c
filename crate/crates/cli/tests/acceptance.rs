//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;

use fbqs::checker::{check_exploration, check_invariants, check_trace, Property, Spec};
use fbqs::sim::{explore, Exploration, ScenarioStructure};
use fbqs::{parse_scenario, NodeId, NodeSet, Scenario};
use fbqs_cli::{cmd_analyze, cmd_equiv, EquivOptions};

#[path = "../../core/tests/props/mod.rs"]
mod props;

type Outcome = Result<String, String>;

const FIXTURES: [&str; 14] = [
    "example1",
    "example2",
    "example4",
    "example4-no-amplification",
    "example5",
    "example6",
    "example7",
    "example7-split",
    "example7-silent",
    "example14",
    "example14-open",
    "example19",
    "example19-bracha",
    "single",
];

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn fixture(name: &str) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(fixture_path(name)).map_err(|e| format!("{name}: {e}"))?;
    parse_scenario(&text).map_err(|e| format!("{name}: {e}"))
}

fn explored(name: &str) -> Result<(Scenario, Exploration), String> {
    let s = fixture(name)?;
    let ex = explore(&s).map_err(|e| format!("{name}: {e}"))?;
    Ok((s, ex))
}

type Family = BTreeSet<BTreeSet<u32>>;

/// Parses `{{1,2},{3}}`.
fn parse_family(text: &str) -> Family {
    let inner = text.trim().strip_prefix('{').and_then(|t| t.strip_suffix('}')).unwrap_or("");
    if inner.is_empty() {
        return Family::new();
    }
    inner
        .trim_start_matches('{')
        .trim_end_matches('}')
        .split("},{")
        .map(|p| p.split(',').filter(|x| !x.is_empty()).map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn family(sets: &[&[u32]]) -> Family {
    sets.iter().map(|s| s.iter().copied().collect()).collect()
}

fn field<'a>(report: &'a str, key: &str) -> Result<&'a str, String> {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .ok_or_else(|| format!("no `{key}` line"))
}

fn subsets_of_size(n: u32, keep: impl Fn(usize) -> bool) -> Family {
    (0u32..1 << n)
        .map(|bits| (1..=n).filter(|i| bits >> (i - 1) & 1 == 1).collect::<BTreeSet<u32>>())
        .filter(|s| keep(s.len()))
        .collect()
}

fn axioms_pass(report: &str, names: &[&str]) -> Result<(), String> {
    for name in names {
        let verdict = field(report, name)?;
        if !verdict.starts_with("pass") {
            return Err(format!("{name}: {verdict}"));
        }
    }
    Ok(())
}

const DQS_AXIOMS: [&str; 4] = ["quorums-nonempty", "quorum-intersection", "d-consistency", "d-availability"];

fn structure_fixtures() -> Outcome {
    let out = cmd_analyze(&fixture("example7")?).map_err(|e| e.to_string())?.stdout;
    let quorums = parse_family(field(&out, "quorums")?);
    let want = family(&[&[1, 2], &[1, 2, 3], &[1, 3, 4], &[1, 2, 3, 4]]);
    if quorums != want {
        return Err(format!("example7 quorums {quorums:?}"));
    }
    let fp = parse_family(field(&out, "fail_prone")?);
    if fp != family(&[&[2], &[3, 4]]) {
        return Err(format!("example7 fail-prone {fp:?}"));
    }
    axioms_pass(&out, &DQS_AXIOMS)?;

    let out = cmd_analyze(&fixture("example6")?).map_err(|e| e.to_string())?.stdout;
    let quorums = parse_family(field(&out, "quorums")?);
    if quorums != subsets_of_size(4, |k| k >= 3) {
        return Err(format!("example6 quorums {quorums:?}"));
    }
    let fp = parse_family(field(&out, "fail_prone")?);
    if fp != subsets_of_size(4, |k| k == 1) {
        return Err(format!("example6 fail-prone {fp:?}"));
    }
    axioms_pass(&out, &DQS_AXIOMS)?;
    Ok("example7 and example6 quorums, fail-prone sets and axioms match".into())
}

fn intact_fixtures() -> Outcome {
    let s7 = fixture("example7")?;
    if s7.intact() != NodeSet::of(&[1, 2]) {
        return Err(format!("example7 intact {}", s7.intact()));
    }
    let s19 = fixture("example19")?;
    let ScenarioStructure::Views(sfbqs) = &s19.structure else {
        return Err("example19 is not subjective".into());
    };
    let intact = sfbqs.intact_set().map_err(|e| e.to_string())?;
    if intact != NodeSet::of(&[1, 2]) {
        return Err(format!("example19 subjective intact {intact}"));
    }
    for (v, view) in sfbqs.views() {
        let per_view = view.intact_set(&s19.failure).map_err(|e| e.to_string())?;
        if per_view != intact {
            return Err(format!("view {v} intact {per_view}"));
        }
    }
    Ok("intact {1,2} objectively, subjectively and in every view".into())
}

fn reliable_everywhere(name: &str) -> Result<usize, String> {
    let (s, ex) = explored(name)?;
    if ex.traces.iter().any(|t| !t.is_quiescent()) {
        return Err(format!("{name}: bound-exhausted trace"));
    }
    let report = check_exploration(&ex.traces, &s, Spec::Reliable);
    if !report.passes(Spec::Reliable) || !report.safety_passes() {
        return Err(format!("{name}:\n{report}"));
    }
    Ok(ex.traces.len())
}

fn bracha_reliable() -> Outcome {
    let mut total = 0;
    for name in ["example1", "example4", "example7", "example7-split"] {
        total += reliable_everywhere(name)?;
    }
    Ok(format!("{total} terminal traces, all reliable"))
}

fn nid(v: u32) -> NodeId {
    NodeId::new(v).unwrap()
}

fn counterexamples() -> Outcome {
    let (s, ex) = explored("example4-no-amplification")?;
    let found = ex.quiescent().any(|t| {
        check_trace(t, &s, s.intact())
            .verdict(Property::Totality)
            .witness()
            .is_some_and(|w| w.nodes == [nid(4)])
    });
    if !found {
        return Err("no totality violation at server 4 without READY amplification".into());
    }
    let (s, ex) = explored("example5")?;
    let alt = fbqs::protocol::Value::new("a'").unwrap();
    let found = ex.quiescent().any(|t| {
        let got: NodeSet = t
            .deliveries()
            .filter(|(srv, v)| *v == alt && s.correct().contains(*srv))
            .fold(NodeSet::new(), |mut acc, (srv, _)| {
                acc.insert(srv);
                acc
            });
        got == NodeSet::of(&[2])
    });
    if !found {
        return Err("no run where exactly server 2 delivers a'".into());
    }
    Ok("totality fails at 4 without READY amplification; only 2 delivers a' under echo-deliver".into())
}

fn stellar_weak() -> Outcome {
    let (s, ex) = explored("example14")?;
    let weak = check_exploration(&ex.traces, &s, Spec::WeaklyReliable);
    if !weak.passes(Spec::WeaklyReliable) {
        return Err(format!("example14 weakly reliable:\n{weak}"));
    }
    let totality_at_4 = ex.quiescent().any(|t| {
        check_trace(t, &s, s.intact())
            .verdict(Property::Totality)
            .witness()
            .is_some_and(|w| w.nodes == [nid(4)])
    });
    if !totality_at_4 {
        return Err("example14 never violates totality at 4".into());
    }
    reliable_everywhere("example14-open")?;
    Ok("stellar weakly reliable, totality fails at 4; open checks reliable".into())
}

fn subjective_stellar() -> Outcome {
    let (s, ex) = explored("example19")?;
    let report = check_exploration(&ex.traces, &s, Spec::WeaklyReliable);
    if !report.passes(Spec::WeaklyReliable) {
        return Err(format!("{report}"));
    }
    for (i, t) in ex.traces.iter().enumerate() {
        let inv = check_invariants(t, &s, s.intact());
        if !inv.holds("unique-ready") {
            return Err(format!("trace {i}:\n{inv}"));
        }
    }
    Ok(format!("{} traces weakly reliable, unique intact READY", ex.traces.len()))
}

fn subjective_bracha() -> Outcome {
    let s = fixture("example19")?;
    let ScenarioStructure::Views(sfbqs) = &s.structure else {
        return Err("example19 is not subjective".into());
    };
    let report = sfbqs.induced_subjective_dqs().map_err(|e| e.to_string())?.check();
    if !report.passed() {
        return Err(format!("{report}"));
    }
    let n = reliable_everywhere("example19-bracha")?;
    Ok(format!("induced subjective DQS passes its axioms; {n} traces reliable"))
}

fn equivalence() -> Outcome {
    for name in ["example7-split", "example7-silent", "example7"] {
        let out = cmd_equiv(&fixture(name)?, &EquivOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        if out.status != 0 {
            return Err(format!("{name}:\n{}", out.stdout));
        }
    }
    Ok("history-equal pairs in both directions for 3 runs".into())
}

fn property_suites() -> Outcome {
    let mut cases = 0;
    for (name, prop) in props::ALL {
        let n = prop().map_err(|e| format!("{name}: {e}"))?;
        if n < 200 {
            return Err(format!("{name}: only {n} cases"));
        }
        cases += n;
    }
    Ok(format!("{} suites, {cases} cases", props::ALL.len()))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_fbqs");
    for name in FIXTURES {
        let path = fixture_path(name);
        let once = || Command::new(bin).arg("simulate").arg(&path).args(["--seed", "7"]).output();
        let (a, b) = (once().map_err(|e| e.to_string())?, once().map_err(|e| e.to_string())?);
        if a.stdout.is_empty() || a.status.code() != Some(0) {
            return Err(format!("{name}: status {:?}", a.status.code()));
        }
        if a.stdout != b.stdout || a.status.code() != b.status.code() {
            return Err(format!("{name}: outputs differ"));
        }
    }
    Ok(format!("{} fixtures byte-identical across runs", FIXTURES.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("structure fixtures", structure_fixtures),
        ("intact fixtures", intact_fixtures),
        ("bracha reliable", bracha_reliable),
        ("counterexamples", counterexamples),
        ("stellar weakly reliable", stellar_weak),
        ("subjective stellar", subjective_stellar),
        ("subjective bracha", subjective_bracha),
        ("equivalence", equivalence),
        ("property suites", property_suites),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(note) => println!("criterion {:>2} PASS {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
