//! Random DAG generation.
//!
//! Nodes are laid out in a random topological order with the source first and
//! the receiver last. A chain through that order guarantees every node sits on
//! a source-to-receiver path; extra forward edges are then drawn uniformly
//! until the requested edge-to-node ratio is reached. The direct
//! source-to-receiver edge is never added.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use spacemac::topology::Edge;
use spacemac::{NodeId, Role, Topology};

use crate::error::{Result, SimError};

/// Inclusive range of integer delays in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayRange {
    pub min: u32,
    pub max: u32,
}

impl DelayRange {
    pub const fn new(min: u32, max: u32) -> Self {
        DelayRange { min, max }
    }

    pub fn fixed(ms: u32) -> Self {
        DelayRange { min: ms, max: ms }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(SimError::Config(format!("{field}: need 1 <= min <= max, got [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.min..=self.max)
    }
}

impl Default for DelayRange {
    fn default() -> Self {
        DelayRange::new(10, 100)
    }
}

const MAX_ATTEMPTS: usize = 16;

/// A random DAG with `node_count` nodes (source and receiver included) and
/// about `edge_ratio * node_count` edges, delays drawn from 10..=100 ms.
pub fn gen_topology<R: Rng + ?Sized>(rng: &mut R, node_count: usize, edge_ratio: f64) -> Result<Topology> {
    gen_topology_with(rng, node_count, edge_ratio, DelayRange::default())
}

pub fn gen_topology_with<R: Rng + ?Sized>(
    rng: &mut R,
    node_count: usize,
    edge_ratio: f64,
    delays: DelayRange,
) -> Result<Topology> {
    if node_count < 3 {
        return Err(SimError::Config(format!("node_count must be at least 3, got {node_count}")));
    }
    if node_count > u32::MAX as usize {
        return Err(SimError::Config("node_count too large".into()));
    }
    if !(1.0..=5.0).contains(&edge_ratio) {
        return Err(SimError::Config(format!("edge_ratio must lie in [1, 5], got {edge_ratio}")));
    }
    delays.validate("edge delay")?;

    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        match try_generate(rng, node_count, edge_ratio, delays) {
            Ok(t) => return Ok(t),
            Err(e) => last = Some(e),
        }
    }
    Err(SimError::TopologyGen(format!(
        "no valid DAG after {MAX_ATTEMPTS} attempts: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn try_generate<R: Rng + ?Sized>(
    rng: &mut R,
    node_count: usize,
    edge_ratio: f64,
    delays: DelayRange,
) -> spacemac::Result<Topology> {
    let source = NodeId(0);
    let receiver = NodeId(node_count as u32 - 1);
    let mut middle: Vec<NodeId> = (1..node_count as u32 - 1).map(NodeId).collect();
    middle.shuffle(rng);
    let mut order = Vec::with_capacity(node_count);
    order.push(source);
    order.extend(middle);
    order.push(receiver);

    // every ordered pair except source -> receiver
    let max_edges = node_count * (node_count - 1) / 2 - 1;
    let target = ((edge_ratio * node_count as f64).round() as usize).clamp(node_count - 1, max_edges);

    let mut pairs: BTreeSet<(usize, usize)> = (0..node_count - 1).map(|i| (i, i + 1)).collect();
    if target == max_edges {
        for i in 0..node_count {
            for j in i + 1..node_count {
                if (i, j) != (0, node_count - 1) {
                    pairs.insert((i, j));
                }
            }
        }
    }
    while pairs.len() < target {
        let a = rng.gen_range(0..node_count);
        let b = rng.gen_range(0..node_count);
        if a == b {
            continue;
        }
        let (i, j) = (a.min(b), a.max(b));
        if (i, j) != (0, node_count - 1) {
            pairs.insert((i, j));
        }
    }

    let edges = pairs
        .into_iter()
        .map(|(i, j)| Edge { from: order[i], to: order[j], delay_ms: delays.sample(rng) })
        .collect();
    let nodes = order.iter().map(|&id| {
        let role = if id == source {
            Role::Source
        } else if id == receiver {
            Role::Receiver
        } else {
            Role::Intermediate
        };
        (id, role)
    });
    Topology::new(nodes, edges)
}
