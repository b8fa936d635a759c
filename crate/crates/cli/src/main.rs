use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use fbqs::Spec;
use fbqs_cli::{
    cmd_analyze, cmd_equiv, cmd_explore, cmd_simulate, load, EquivOptions, ExploreOptions, Format, Output,
    SimulateOptions, EXIT_ERROR,
};

#[derive(Parser)]
#[command(name = "fbqs", version, about = "Federated quorum analysis and broadcast simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecArg {
    Reliable,
    WeaklyReliable,
}

impl From<SpecArg> for Spec {
    fn from(s: SpecArg) -> Spec {
        match s {
            SpecArg::Reliable => Spec::Reliable,
            SpecArg::WeaklyReliable => Spec::WeaklyReliable,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print quorums, intact set and the induced DQS with its axiom checks.
    Analyze { scenario: PathBuf },
    /// Run one schedule and check it.
    Simulate {
        scenario: PathBuf,
        /// Use a seeded random scheduler instead of the file's.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 1 unless the trace satisfies this specification.
        #[arg(long, value_enum)]
        spec: Option<SpecArg>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Enumerate every schedule of one or more scenarios.
    Explore {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, value_enum)]
        spec: Option<SpecArg>,
        /// Scenarios explored in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Translate runs between Bracha and open-check Stellar and compare histories.
    Equiv {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn explore_all(paths: &[PathBuf], opts: &ExploreOptions, jobs: usize) -> Vec<Result<Output>> {
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<Output>>> = (0..paths.len()).map(|_| None).collect();
    for (chunk_paths, chunk_out) in paths.chunks(jobs).zip(results.chunks_mut(jobs)) {
        std::thread::scope(|s| {
            for (p, slot) in chunk_paths.iter().zip(chunk_out.iter_mut()) {
                s.spawn(move || *slot = Some(load(p).and_then(|sc| cmd_explore(&sc, opts))));
            }
        });
    }
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let results = match cli.command {
        Command::Analyze { scenario } => vec![load(&scenario).and_then(|s| cmd_analyze(&s))],
        Command::Simulate {
            scenario,
            seed,
            out,
            spec,
            format,
        } => {
            let opts = SimulateOptions {
                seed,
                spec: spec.map(Into::into),
                format,
                out,
            };
            vec![load(&scenario).and_then(|s| cmd_simulate(&s, &opts))]
        }
        Command::Explore { scenarios, spec, jobs } => {
            let opts = ExploreOptions {
                spec: spec.map(Into::into),
            };
            explore_all(&scenarios, &opts, jobs)
        }
        Command::Equiv { scenario, seed } => {
            vec![load(&scenario).and_then(|s| cmd_equiv(&s, &EquivOptions { seed }))]
        }
    };
    let mut status = 0;
    for r in results {
        match r {
            Ok(o) => {
                print!("{}", o.stdout);
                status = status.max(o.status);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                status = EXIT_ERROR;
            }
        }
    }
    ExitCode::from(status as u8)
}
