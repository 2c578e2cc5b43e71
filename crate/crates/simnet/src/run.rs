//! Repeating generations until every attacker is blacklisted.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use spacemac::NodeId;

use crate::engine::{DropRecord, GenerationRecord, LogEntry, Simulation};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLimits {
    /// Hard cap on generations before the run is declared degenerate.
    pub max_generations: u64,
    /// Extra generations sent after the last attacker is located, to confirm
    /// the network stays clean. They do not count towards the totals.
    pub confirm_generations: u64,
}

impl RunLimits {
    /// `2η + 10` generations, one confirmation.
    pub fn for_attackers(eta: usize) -> Self {
        RunLimits { max_generations: 2 * eta as u64 + 10, confirm_generations: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    /// A generation went by without pollution or alerts while attackers
    /// remained: the survivors cannot pollute anything.
    Stalled,
    /// The generation cap was hit.
    GenerationCap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResult {
    /// Generations sent until the last attacker was blacklisted (κ).
    pub generations_used: u64,
    /// Virtual time from the first send until the last attacker was located.
    pub sim_time_ms: u64,
    pub generations: Vec<GenerationRecord>,
    /// Confirmation generations sent after the last attacker was located.
    pub confirmation: Vec<GenerationRecord>,
    /// `(generation, node)` in blacklisting order.
    pub blacklist_trace: Vec<(u64, NodeId)>,
    pub remaining: BTreeSet<NodeId>,
    pub false_positives: BTreeSet<NodeId>,
    pub degenerate: Option<Degenerate>,
    pub log: Vec<LogEntry>,
}

impl SimResult {
    pub fn detection_events(&self) -> impl Iterator<Item = &DropRecord> + '_ {
        self.generations.iter().chain(&self.confirmation).flat_map(|g| &g.drops)
    }

    /// Every confirmation generation was clean.
    pub fn stays_clean(&self) -> bool {
        self.confirmation.iter().all(|g| g.is_clean() && !g.is_polluted())
    }

    /// Polluted generations in which no attacker was exposed, or in which a
    /// completed round blamed no attacker.
    pub fn exposure_violations(&self, malicious: &BTreeSet<NodeId>) -> usize {
        self.generations
            .iter()
            .filter(|g| g.is_polluted())
            .filter(|g| {
                g.exposed.is_empty()
                    || g.round.as_ref().is_some_and(|r| !r.polluted_edges.is_empty() && r.identified.is_disjoint(malicious))
            })
            .count()
    }

    pub fn span_violations(&self) -> u64 {
        self.generations.iter().chain(&self.confirmation).map(|g| g.span_violations).sum()
    }
}

/// Sends generations until all attackers are blacklisted, the survivors stop
/// polluting, or `limits.max_generations` is reached.
pub fn eliminate_all(sim: &mut Simulation, limits: RunLimits) -> Result<SimResult> {
    let malicious = sim.malicious().clone();
    let mut generations = Vec::new();
    let mut trace = Vec::new();
    let mut generations_used = 0;
    let mut sim_time_ms = 0;
    let mut degenerate = None;

    loop {
        let remaining: BTreeSet<NodeId> = malicious.difference(sim.blacklist()).copied().collect();
        if remaining.is_empty() {
            break;
        }
        if sim.generations_run() >= limits.max_generations {
            degenerate = Some(Degenerate::GenerationCap);
            break;
        }
        let rec = sim.run_generation()?;
        let identified = rec.identified();
        if !identified.is_empty() {
            for &n in &identified {
                trace.push((rec.index, n));
            }
            if identified.iter().any(|n| remaining.contains(n)) {
                generations_used = rec.index;
                sim_time_ms = rec.round.as_ref().map_or(rec.end_ms, |r| r.decided_ms);
            }
        }
        let stalled = rec.is_clean() && !rec.is_polluted();
        generations.push(rec);
        if stalled && !malicious.is_subset(sim.blacklist()) {
            degenerate = Some(Degenerate::Stalled);
            break;
        }
    }

    let mut confirmation = Vec::new();
    if degenerate.is_none() {
        for _ in 0..limits.confirm_generations {
            confirmation.push(sim.run_generation()?);
        }
    }
    let remaining = malicious.difference(sim.blacklist()).copied().collect();
    let false_positives = sim.blacklist().difference(&malicious).copied().collect();
    Ok(SimResult {
        generations_used,
        sim_time_ms,
        generations,
        confirmation,
        blacklist_trace: trace,
        remaining,
        false_positives,
        degenerate,
        log: sim.take_log(),
    })
}
