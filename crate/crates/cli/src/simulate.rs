//! Attacker-elimination experiments.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spacemac::Topology;
use spacemac_sim::experiment::RoundRecord;
use spacemac_sim::{run_experiment_on, EtaSummary, ExperimentConfig, LogEntry, SimResult};

use crate::output::SCHEMA_VERSION;

/// One output row per η.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub eta: usize,
    pub avg_generations: f64,
    pub avg_delay_ms: f64,
    pub degenerate_rounds: usize,
}

impl From<&EtaSummary> for Row {
    fn from(s: &EtaSummary) -> Self {
        Row {
            eta: s.eta,
            avg_generations: s.avg_generations,
            avg_delay_ms: s.avg_delay_ms,
            degenerate_rounds: s.degenerate_rounds,
        }
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    schema_version: u32,
    eta: usize,
    round: usize,
    #[serde(flatten)]
    entry: &'a LogEntry,
}

/// Writes one JSONL event log per round into `dir`.
pub struct TraceWriter {
    dir: PathBuf,
    written: usize,
}

impl TraceWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(TraceWriter { dir: dir.to_path_buf(), written: 0 })
    }

    pub fn path_for(&self, eta: usize, round: usize) -> PathBuf {
        self.dir.join(format!("eta{eta}-round{round}.jsonl"))
    }

    pub fn write(&mut self, rec: &RoundRecord, res: &SimResult) -> Result<()> {
        let path = self.path_for(rec.eta, rec.round);
        let mut f = std::io::BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        for entry in &res.log {
            serde_json::to_writer(&mut f, &TraceLine { schema_version: SCHEMA_VERSION, eta: rec.eta, round: rec.round, entry })?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }
}

/// Runs the experiment, optionally on a fixed network and with traces.
pub fn run(config: &ExperimentConfig, topology: Option<&Topology>, mut traces: Option<&mut TraceWriter>) -> Result<Vec<Row>> {
    let mut trace_err = None;
    let summaries = run_experiment_on(config, topology, |rec, res| {
        if let Some(t) = traces.as_deref_mut() {
            if trace_err.is_none() {
                trace_err = t.write(rec, res).err();
            }
        }
    })?;
    if let Some(e) = trace_err {
        return Err(e);
    }
    Ok(summaries.iter().map(Row::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.dims.n = 16;
        c.node_count = 12;
        c.etas = vec![0, 1, 2];
        c.rounds = 3;
        c
    }

    #[test]
    fn rows_and_traces() {
        let dir = tempfile::tempdir().unwrap();
        let mut tw = TraceWriter::new(dir.path()).unwrap();
        let rows = run(&tiny(), None, Some(&mut tw)).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], Row { eta: 0, avg_generations: 0.0, avg_delay_ms: 0.0, degenerate_rounds: 0 });
        assert_eq!(rows[1].avg_generations, 1.0);
        assert_eq!(tw.written(), 9);
        let text = fs::read_to_string(tw.path_for(1, 0)).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["schema_version"], 1);
        assert_eq!(first["event"], "generation_start");
    }
}
