use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn fbqs(args: &[&str], scenarios: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fbqs"));
    cmd.args(&args[..1]);
    for s in scenarios {
        cmd.arg(fixture(s));
    }
    cmd.args(&args[1..]).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn golden_single_server_trace() {
    let o = fbqs(&["simulate", "--format", "lines"], &["single"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "0\tSEND\tclient\t1\tBCAST\ta\n\
         1\tRECV\t1\tclient\tBCAST\ta\n\
         2\tSEND\t1\t1\tECHO\ta\n\
         3\tRECV\t1\t1\tECHO\ta\n\
         4\tSEND\t1\t1\tREADY\ta\n\
         5\tRECV\t1\t1\tREADY\ta\n\
         6\tDELIVER\t1\ta\n\
         END\tquiescent\n"
    );
}

#[test]
fn analyze_prints_quorums_and_intact() {
    let o = fbqs(&["analyze"], &["example7"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("minimal_quorums\t{{1,2},{1,3,4}}\n"), "{out}");
    assert!(out.contains("intact\t{1,2}\n"));
    assert!(out.contains("befouled\t{3,4}\n"));
}

#[test]
fn analyze_subjective_reports_each_view() {
    let out = stdout(&fbqs(&["analyze"], &["example19"]));
    assert!(out.contains("view 2\tfail_prone\t{{3,4}}\n"), "{out}");
    assert!(out.contains("view 1\tfail_prone\t{{2},{3,4}}\n"));
    assert!(out.contains("sd-consistency\tpass"));
}

#[test]
fn analyze_explicit_dqs() {
    let o = fbqs(&["analyze"], &["example2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("fail_prone\t{{2},{3,4}}\n"), "{out}");
    assert!(out.contains("d-availability\tpass"));
    assert!(out.contains("covering-fail-prone\tpass"));
}

#[test]
fn simulate_exit_status_follows_spec() {
    let reliable = fbqs(&["simulate", "--spec", "reliable"], &["example14"]);
    assert_eq!(reliable.status.code(), Some(1));
    assert!(stdout(&reliable).contains("spec\treliable\tfail\n"));
    let weak = fbqs(&["simulate", "--spec", "weakly-reliable"], &["example14"]);
    assert_eq!(weak.status.code(), Some(0));
    let plain = fbqs(&["simulate"], &["example14"]);
    assert_eq!(plain.status.code(), Some(0));
}

#[test]
fn simulate_without_amplification_fails_totality() {
    let o = fbqs(&["simulate", "--spec", "reliable"], &["example4-no-amplification"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("totality\tfail\tnodes=4"));
}

#[test]
fn simulate_sections_in_order() {
    let out = stdout(&fbqs(&["simulate", "--seed", "3"], &["example7"]));
    let pos: Vec<_> = ["# trace", "# history", "# properties", "# invariants"]
        .iter()
        .map(|h| out.find(h).unwrap_or_else(|| panic!("missing {h}")))
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn simulate_out_writes_trace_file() {
    let path = std::env::temp_dir().join(format!("fbqs-trace-{}.txt", std::process::id()));
    let o = fbqs(&["simulate", "--seed", "7", "--out", path.to_str().unwrap()], &["example1"]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(written.ends_with("END\tquiescent\n"));
    assert!(!stdout(&o).contains("# trace"));
    let lines = stdout(&fbqs(&["simulate", "--seed", "7", "--format", "lines"], &["example1"]));
    assert_eq!(lines, written);
}

#[test]
fn seeds_change_schedules() {
    let runs: std::collections::BTreeSet<String> = (0..8)
        .map(|s| stdout(&fbqs(&["simulate", "--format", "lines", "--seed", &s.to_string()], &["example1"])))
        .collect();
    assert!(runs.len() > 1);
}

#[test]
fn explore_keeps_argument_order_with_jobs() {
    let names = ["example7", "example1", "example14-open", "example4"];
    let serial = fbqs(&["explore"], &names);
    let parallel = fbqs(&["explore", "--jobs", "3"], &names);
    assert_eq!(serial.stdout, parallel.stdout);
    let order: Vec<_> = stdout(&serial)
        .lines()
        .filter_map(|l| l.strip_prefix("scenario\t").map(str::to_string))
        .collect();
    assert_eq!(order, names);
}

#[test]
fn explore_exit_status() {
    assert_eq!(fbqs(&["explore", "--spec", "reliable"], &["example14-open"]).status.code(), Some(0));
    assert_eq!(fbqs(&["explore", "--spec", "reliable"], &["example14"]).status.code(), Some(1));
    assert_eq!(fbqs(&["explore", "--spec", "weakly-reliable"], &["example14"]).status.code(), Some(0));
}

#[test]
fn equiv_reports_both_directions() {
    let o = fbqs(&["equiv", "--seed", "5"], &["example7-split"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("equivalent\tbracha->stellar-open\tpass\n"), "{out}");
    assert!(out.contains("equivalent\tstellar-open->bracha\tpass\n"));
}

#[test]
fn equiv_rejects_explicit_dqs() {
    let o = fbqs(&["equiv"], &["example1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("slice"));
}

#[test]
fn bad_input_exits_2() {
    let missing = Command::new(env!("CARGO_BIN_EXE_fbqs"))
        .args(["analyze", "/nonexistent/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let path = std::env::temp_dir().join(format!("fbqs-bad-{}.json", std::process::id()));
    std::fs::write(&path, r#"{"name":"x","universe":[1,2],"slices":{"1":[[2]],"2":[[2]]},"client":{"value":"a"},"variant":"stellar"}"#).unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_fbqs")).arg("analyze").arg(&path).output().unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("slices"));
}
