//! Command implementations behind the `fbqs` binary. Each command returns
//! its full output and exit status so it can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fbqs::checker::{check_exploration, check_invariants, check_trace, check_well_formed, Spec};
use fbqs::node::fmt_family;
use fbqs::sim::{
    build_equiv_execution, explore, extract_history, run, Direction, ScenarioStructure, SchedulerMode,
    SchedulerPolicy,
};
use fbqs::{parse_scenario, AxiomReport, Fbqs, Scenario};

/// Exit status when a requested check fails.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for unusable input.
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Sectioned report.
    #[default]
    Text,
    /// Trace lines only.
    Lines,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub status: i32,
}

impl Output {
    fn new(stdout: String, ok: bool) -> Self {
        Output {
            stdout,
            status: if ok { 0 } else { EXIT_FAILED },
        }
    }
}

/// Reads a scenario from `path`. A bare name such as `example14` is also
/// looked up as `scenarios/<name>.json`.
pub fn load(path: &Path) -> Result<Scenario> {
    let resolved = if path.exists() {
        path.to_path_buf()
    } else {
        let alt = PathBuf::from("scenarios").join(path).with_extension("json");
        if path.extension().is_none() && alt.exists() {
            alt
        } else {
            bail!("no such scenario file: {}", path.display());
        }
    };
    let text = std::fs::read_to_string(&resolved).with_context(|| format!("reading {}", resolved.display()))?;
    parse_scenario(&text).with_context(|| format!("in {}", resolved.display()))
}

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "# {title}");
}

fn fbqs_lines(out: &mut String, prefix: &str, f: &Fbqs, scenario: &Scenario) -> Result<()> {
    let minimal = f.minimal_quorums()?;
    let all: Vec<_> = f.enumerate_quorums()?.quorums().collect();
    let qi = f.has_quorum_intersection()?;
    let _ = writeln!(out, "{prefix}minimal_quorums\t{}", fmt_family(&minimal));
    let _ = writeln!(out, "{prefix}quorums\t{}", fmt_family(&all));
    let _ = writeln!(out, "{prefix}quorum_intersection\t{qi}");
    if !qi {
        return Ok(());
    }
    let intact = f.intact_set(&scenario.failure)?;
    let _ = writeln!(out, "{prefix}intact\t{intact}");
    let _ = writeln!(out, "{prefix}befouled\t{}", f.universe().difference(intact));
    let dqs = f.induced_dqs()?;
    let _ = writeln!(out, "{prefix}fail_prone\t{}", fmt_family(dqs.fail_prone.sets()));
    report_lines(out, prefix, &dqs.check(Some(&scenario.failure)));
    Ok(())
}

fn report_lines(out: &mut String, prefix: &str, report: &AxiomReport) {
    for line in report.to_string().lines() {
        let _ = writeln!(out, "{prefix}{line}");
    }
}

/// Quorums, intersection, intact and befouled servers, and the induced
/// (subjective) DQS with its axiom checks.
pub fn cmd_analyze(scenario: &Scenario) -> Result<Output> {
    let mut out = String::new();
    let _ = writeln!(out, "scenario\t{}", scenario.name);
    let _ = writeln!(out, "universe\t{}", scenario.universe());
    let _ = writeln!(out, "faulty\t{}", scenario.faulty());
    let _ = writeln!(out, "variant\t{}", scenario.variant());
    let ok = match &scenario.structure {
        ScenarioStructure::Dqs(d) => {
            let q: Vec<_> = d.quorum_system.quorums().collect();
            let _ = writeln!(out, "minimal_quorums\t{}", fmt_family(&d.quorum_system.minimal()));
            let _ = writeln!(out, "quorums\t{}", fmt_family(&q));
            let _ = writeln!(out, "fail_prone\t{}", fmt_family(d.fail_prone.sets()));
            let report = d.check(Some(&scenario.failure));
            report_lines(&mut out, "", &report);
            report.passed()
        }
        ScenarioStructure::Slices(f) => {
            fbqs_lines(&mut out, "", f, scenario)?;
            true
        }
        ScenarioStructure::Views(s) => {
            report_lines(&mut out, "", &s.validate_agreement());
            for (v, view) in s.views() {
                fbqs_lines(&mut out, &format!("view {v}\t"), view, scenario)?;
            }
            let qi = s.subjective_quorum_intersection()?;
            let _ = writeln!(out, "subjective_quorum_intersection\t{qi}");
            if qi {
                let intact = s.intact_set()?;
                let _ = writeln!(out, "intact\t{intact}");
                let _ = writeln!(out, "befouled\t{}", s.universe().difference(intact));
                if !intact.is_empty() {
                    let sdqs = s.induced_subjective_dqs()?;
                    report_lines(&mut out, "", &sdqs.check());
                }
            }
            true
        }
    };
    Ok(Output::new(out, ok))
}

#[derive(Clone, Debug, Default)]
pub struct SimulateOptions {
    /// Overrides the file's scheduler with a seeded random one.
    pub seed: Option<u64>,
    pub spec: Option<Spec>,
    pub format: Format,
    /// Write the trace here instead of standard output.
    pub out: Option<PathBuf>,
}

/// Runs one schedule and reports trace, history, properties and invariants.
pub fn cmd_simulate(scenario: &Scenario, opts: &SimulateOptions) -> Result<Output> {
    let scenario = match opts.seed {
        Some(seed) => scenario.clone().with_scheduler(SchedulerPolicy {
            mode: SchedulerMode::Random,
            seed,
        }),
        None => scenario.clone(),
    };
    let trace = run(&scenario)?;
    let lines = trace.to_lines();
    let mut out = String::new();
    match &opts.out {
        Some(path) => std::fs::write(path, &lines).with_context(|| format!("writing {}", path.display()))?,
        None if opts.format == Format::Lines => out.push_str(&lines),
        None => {
            section(&mut out, "trace");
            out.push_str(&lines);
        }
    }
    let report = check_trace(&trace, &scenario, scenario.intact());
    let ok = opts.spec.is_none_or(|s| report.passes(s));
    if opts.format == Format::Lines {
        return Ok(Output::new(out, ok));
    }
    section(&mut out, "history");
    out.push_str(&extract_history(&trace).to_lines());
    section(&mut out, "properties");
    out.push_str(&report.to_string());
    if let Some(spec) = opts.spec {
        let _ = writeln!(out, "spec\t{spec}\t{}", if ok { "pass" } else { "fail" });
    }
    section(&mut out, "invariants");
    out.push_str(&check_invariants(&trace, &scenario, scenario.intact()).to_string());
    out.push_str(&check_well_formed(&trace, &scenario).to_string());
    Ok(Output::new(out, ok))
}

#[derive(Clone, Debug, Default)]
pub struct ExploreOptions {
    pub spec: Option<Spec>,
}

/// Enumerates every schedule and aggregates the checks over all of them.
pub fn cmd_explore(scenario: &Scenario, opts: &ExploreOptions) -> Result<Output> {
    let scenario = scenario.clone().with_scheduler(SchedulerPolicy {
        mode: SchedulerMode::Exhaustive,
        seed: 0,
    });
    let ex = explore(&scenario)?;
    let spec = opts.spec.unwrap_or(if scenario.variant().is_federated() && !scenario.intact().is_empty() {
        Spec::WeaklyReliable
    } else {
        Spec::Reliable
    });
    let report = check_exploration(&ex.traces, &scenario, spec);
    let mut invariants = AxiomReport::new();
    let mut well_formed = AxiomReport::new();
    for (i, t) in ex.traces.iter().enumerate() {
        let tag = |r: AxiomReport| {
            let mut tagged = AxiomReport::new();
            for c in r.checks {
                let v = match c.verdict {
                    fbqs::Verdict::Fail(w) => {
                        let detail = format!("trace {i}: {}", w.detail);
                        fbqs::Verdict::Fail(w.with_detail(detail))
                    }
                    v => v,
                };
                tagged.push(c.name, v);
            }
            tagged
        };
        merge(&mut invariants, tag(check_invariants(t, &scenario, scenario.intact())));
        merge(&mut well_formed, tag(check_well_formed(t, &scenario)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "scenario\t{}", scenario.name);
    let _ = writeln!(out, "variant\t{}", scenario.variant());
    let _ = writeln!(out, "states\t{}", ex.states);
    section(&mut out, "properties");
    out.push_str(&report.to_string());
    section(&mut out, "invariants");
    out.push_str(&invariants.to_string());
    out.push_str(&well_formed.to_string());
    let ok = opts.spec.is_none_or(|s| report.passes(s));
    Ok(Output::new(out, ok))
}

/// Keeps, per check name, the first failure seen (else pass, else n/a).
fn merge(into: &mut AxiomReport, from: AxiomReport) {
    for c in from.checks {
        match into.checks.iter_mut().find(|x| x.name == c.name) {
            None => into.checks.push(c),
            Some(x) => {
                let replace = match (&x.verdict, &c.verdict) {
                    (fbqs::Verdict::Fail(_), _) => false,
                    (_, fbqs::Verdict::Fail(_)) => true,
                    (fbqs::Verdict::NotApplicable, fbqs::Verdict::Pass) => true,
                    _ => false,
                };
                if replace {
                    x.verdict = c.verdict;
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EquivOptions {
    pub seed: Option<u64>,
}

/// Runs the scenario under Bracha and under Stellar with open quorum
/// checks, translates each run into the other protocol, and checks that the
/// histories agree.
pub fn cmd_equiv(scenario: &Scenario, opts: &EquivOptions) -> Result<Output> {
    if !matches!(scenario.structure, ScenarioStructure::Slices(_)) {
        bail!("equivalence needs a single objective slice function");
    }
    if scenario.intact().is_empty() {
        bail!("equivalence needs at least one intact server");
    }
    let mut out = String::new();
    for direction in [Direction::BrachaToStellarOpen, Direction::StellarOpenToBracha] {
        let mut source = scenario.with_variant(direction.source())?;
        if let Some(seed) = opts.seed {
            source = source.with_scheduler(SchedulerPolicy {
                mode: SchedulerMode::Random,
                seed,
            });
        }
        let trace = run(&source)?;
        let target = match build_equiv_execution(direction, &trace, &source) {
            Ok(t) => t,
            Err(fbqs::Error::Invariant(diff)) => {
                let _ = writeln!(out, "equivalent\t{direction}\tfail\t{diff}");
                return Ok(Output::new(out, false));
            }
            Err(e) => return Err(e.into()),
        };
        section(&mut out, &format!("{direction} source"));
        out.push_str(&trace.to_lines());
        section(&mut out, &format!("{direction} target"));
        out.push_str(&target.to_lines());
        section(&mut out, &format!("{direction} history"));
        out.push_str(&extract_history(&target).to_lines());
        let _ = writeln!(out, "equivalent\t{direction}\tpass");
    }
    Ok(Output::new(out, true))
}
