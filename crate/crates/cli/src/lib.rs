//! Command-line front end: MAC benchmarks, bound and overhead tables,
//! attacker-elimination experiments and test-vector checks.

pub mod analyze;
pub mod bench;
pub mod output;
pub mod simulate;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use spacemac::analysis::SchemeParams;
use spacemac_sim::experiment::load_topology;
use spacemac_sim::ExperimentConfig;

use crate::analyze::{LocatingRow, Table};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "spacemac", version, about = "Pollution detection and attacker locating for coded networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed; overrides the seed in --config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment config (TOML). Its dims and locating parameters also feed
    /// `bench` and `analyze`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write a JSONL event log per simulated round.
    #[arg(long, global = true)]
    pub trace: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time mac, combine and verify on this machine.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
        /// Tag counts to time.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 4])]
        tags: Vec<usize>,
        /// Tags folded per combine.
        #[arg(long, default_value_t = 4)]
        w: usize,
    },
    /// Attack bounds and overhead counts.
    Analyze {
        #[arg(long, value_enum, default_value_t = Table::All)]
        table: Table,
        /// Extra `lambda,delta,theta` row for the bound table; repeatable.
        #[arg(long = "row")]
        rows: Vec<LocatingRow>,
        /// Field size.
        #[arg(long, default_value_t = 256)]
        q: u64,
    },
    /// Run the attacker-elimination experiment, one row per η.
    Simulate {
        /// Attacker counts, e.g. `4,8,12`.
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<usize>>,
        #[arg(long)]
        rounds: Option<usize>,
        /// Nodes per random network, source and receivers included.
        #[arg(long)]
        nodes: Option<usize>,
        /// Payload symbols per packet.
        #[arg(long)]
        payload_len: Option<usize>,
        /// Use this network (TOML) for every round instead of random ones.
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// Recompute the tags in a test-vector file (default: the shipped one).
    VerifyVectors { path: Option<PathBuf> },
}

/// `Ok(false)` means the command ran but found mismatches.
pub fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let config = match &g.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let seed = g.seed.unwrap_or(config.seed);
    let mut out = output::sink(g.out.as_deref())?;
    match cli.command {
        Command::Bench { runs, tags, w } => {
            let cfg = bench::BenchConfig { n: config.dims.n, m: config.dims.m, tags, w, runs, seed };
            let rows = bench::run(&cfg)?;
            eprintln!("timings are for this machine only; compare ratios, not absolute values");
            output::write_records(&mut out, g.format, &rows)?;
        }
        Command::Analyze { table, rows, q } => {
            let l = config.locating;
            let p = SchemeParams {
                q,
                n: config.dims.n as u64,
                m: config.dims.m as u64,
                ..SchemeParams::default()
            };
            let mut extra = rows;
            if g.config.is_some() {
                extra.push(LocatingRow(l.lambda as u64, l.delta as u64, l.theta as u64));
            }
            output::write_records(&mut out, g.format, &analyze::run(table, &p, &extra)?)?;
        }
        Command::Simulate { etas, rounds, nodes, payload_len, topology } => {
            let mut c = config;
            c.seed = seed;
            if let Some(v) = etas {
                c.etas = v;
            }
            if let Some(v) = rounds {
                c.rounds = v;
            }
            let fixed = match &topology {
                Some(p) => Some(load_topology(p).with_context(|| format!("loading {}", p.display()))?),
                None => None,
            };
            if let Some(v) = nodes {
                c.node_count = v;
            } else if let Some(t) = &fixed {
                c.node_count = t.node_count();
            }
            if let Some(v) = payload_len {
                c.dims.n = v;
            }
            let mut traces = if g.trace { Some(simulate::TraceWriter::new(&trace_dir(g.out.as_deref()))?) } else { None };
            let rows = simulate::run(&c, fixed.as_ref(), traces.as_mut())?;
            if let Some(t) = &traces {
                eprintln!("wrote {} event logs to {}", t.written(), trace_dir(g.out.as_deref()).display());
            }
            output::write_records(&mut out, g.format, &rows)?;
        }
        Command::VerifyVectors { path } => {
            let text = match &path {
                Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                None => spacemac::vectors::SHIPPED.to_string(),
            };
            let name = path.as_ref().map_or("shipped vectors".to_string(), |p| p.display().to_string());
            let report = verify::check(&text).with_context(|| format!("parsing {name}"))?;
            if report.checked == 0 {
                eprintln!("warning: {name} contains no vectors");
            }
            output::write_records(&mut out, g.format, &verify::mismatch_rows(&report))?;
            eprintln!("{name}: {} checked, {} mismatched", report.checked, report.mismatches.len());
            return Ok(report.passed());
        }
    }
    Ok(true)
}

/// Event logs go next to the output file, or into `spacemac-trace/`.
pub fn trace_dir(out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let stem = p.file_stem().map_or("spacemac".into(), |s| s.to_string_lossy().into_owned());
            p.with_file_name(format!("{stem}-trace"))
        }
        None => PathBuf::from("spacemac-trace"),
    }
}
