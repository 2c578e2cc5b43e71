//! Attacker models and placement.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use spacemac::{NodeId, Role, Topology};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Adds a fresh random payload error to every packet sent to every child.
    PolluteAllOutgoing,
    /// Reports a clean-looking space for edges from malicious parents, using
    /// tags the colluding parent supplies.
    LieAboutIncoming,
    /// Corrupts the helper tag attached for each child.
    TamperHelperTag,
    /// Buffers and recombines whatever it receives without checking it.
    ForwardCorrupted,
    /// Hands each malicious child the key its own children verify it with.
    LeakKeyToChild,
    /// Raises an alert at the start of every generation.
    AlertFlood,
}

impl Behavior {
    pub const ALL: [Behavior; 6] = [
        Behavior::PolluteAllOutgoing,
        Behavior::LieAboutIncoming,
        Behavior::TamperHelperTag,
        Behavior::ForwardCorrupted,
        Behavior::LeakKeyToChild,
        Behavior::AlertFlood,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackerSpec {
    pub node: NodeId,
    pub behaviors: BTreeSet<Behavior>,
    /// Parents to lie about. `None` means every malicious parent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lie_targets: Option<BTreeSet<NodeId>>,
}

impl AttackerSpec {
    pub fn new(node: NodeId, behaviors: impl IntoIterator<Item = Behavior>) -> Self {
        AttackerSpec { node, behaviors: behaviors.into_iter().collect(), lie_targets: None }
    }

    pub fn polluter(node: NodeId) -> Self {
        Self::new(node, [Behavior::PolluteAllOutgoing])
    }

    pub fn with_lie_targets(mut self, targets: impl IntoIterator<Item = NodeId>) -> Self {
        self.behaviors.insert(Behavior::LieAboutIncoming);
        self.lie_targets = Some(targets.into_iter().collect());
        self
    }

    pub fn has(&self, b: Behavior) -> bool {
        self.behaviors.contains(&b)
    }

    /// Whether this attacker lies about what it got from `parent`, given the
    /// set of malicious nodes.
    pub fn lies_about(&self, parent: NodeId, malicious: &BTreeSet<NodeId>) -> bool {
        self.has(Behavior::LieAboutIncoming)
            && malicious.contains(&parent)
            && self.lie_targets.as_ref().map_or(true, |t| t.contains(&parent))
    }
}

/// Index-based adjacency for repeated reachability checks.
struct Graph {
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    source: usize,
    receivers: Vec<usize>,
}

impl Graph {
    fn new(t: &Topology) -> Self {
        let ids: Vec<NodeId> = t.node_ids().collect();
        let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let adj = |f: fn(&Topology, NodeId) -> &[NodeId]| -> Vec<Vec<usize>> {
            ids.iter().map(|&n| f(t, n).iter().map(|c| index[c]).collect()).collect()
        };
        Graph {
            children: adj(Topology::children),
            parents: adj(Topology::parents),
            source: index[&t.source()],
            receivers: t.receivers().iter().map(|r| index[r]).collect(),
            ids,
            index,
        }
    }

    fn sweep(&self, starts: &[usize], next: &[Vec<usize>], removed: &[bool]) -> Vec<bool> {
        let mut seen = vec![false; self.ids.len()];
        let mut stack: Vec<usize> = starts.iter().copied().filter(|&s| !removed[s]).collect();
        for &s in &stack {
            seen[s] = true;
        }
        while let Some(n) = stack.pop() {
            for &c in &next[n] {
                if !removed[c] && !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        seen
    }

    fn can_still_pollute(&self, set: &[usize], node: usize) -> bool {
        let mut removed = vec![false; self.ids.len()];
        for &x in set {
            removed[x] = x != node;
        }
        let fwd = self.sweep(&[self.source], &self.children, &removed);
        if !fwd[node] {
            return false;
        }
        let back = self.sweep(&self.receivers, &self.parents, &removed);
        self.children[node].iter().any(|&c| back[c])
    }

    fn all_ok(&self, set: &[usize]) -> bool {
        set.iter().all(|&a| self.can_still_pollute(set, a))
    }
}

/// True if `node`, with every other member of `set` removed, is still
/// reachable from the source and still reaches a receiver through an honest
/// child.
pub fn can_still_pollute(topology: &Topology, set: &BTreeSet<NodeId>, node: NodeId) -> Result<bool> {
    let g = Graph::new(topology);
    let idx = |n: &NodeId| g.index.get(n).copied().ok_or(spacemac::Error::UnknownNode(*n));
    let set: Vec<usize> = set.iter().map(idx).collect::<std::result::Result<_, _>>()?;
    Ok(g.can_still_pollute(&set, idx(&node)?))
}

pub fn placement_ok(topology: &Topology, set: &BTreeSet<NodeId>) -> Result<bool> {
    for &a in set {
        if topology.role(a)? != Role::Intermediate {
            return Ok(false);
        }
    }
    let g = Graph::new(topology);
    let set: Vec<usize> = set.iter().map(|n| g.index[n]).collect();
    Ok(g.all_ok(&set))
}

const PLACEMENT_ATTEMPTS: usize = 200;

/// Picks `eta` random intermediate nodes, each able to pollute on its own,
/// all with [`Behavior::PolluteAllOutgoing`].
pub fn place_attackers<R: Rng + ?Sized>(topology: &Topology, eta: usize, rng: &mut R) -> Result<Vec<AttackerSpec>> {
    let candidates = topology.intermediates();
    if eta == 0 {
        return Ok(Vec::new());
    }
    if eta > candidates.len() {
        return Err(SimError::Placement(format!(
            "need at most one attacker per intermediate node ({eta} > {})",
            candidates.len()
        )));
    }
    let g = Graph::new(topology);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut order = candidates.clone();
        order.shuffle(rng);
        let mut chosen: Vec<usize> = Vec::with_capacity(eta);
        for c in order {
            chosen.push(g.index[&c]);
            if !g.all_ok(&chosen) {
                chosen.pop();
            }
            if chosen.len() == eta {
                let mut nodes: Vec<NodeId> = chosen.iter().map(|&i| g.ids[i]).collect();
                nodes.sort();
                return Ok(nodes.into_iter().map(AttackerSpec::polluter).collect());
            }
        }
    }
    Err(SimError::Placement(format!("no valid set of {eta} attackers found after {PLACEMENT_ATTEMPTS} attempts")))
}

/// Makes each attacker that has a malicious parent lie about its malicious
/// parents with probability `fraction`.
pub fn assign_liars<R: Rng + ?Sized>(topology: &Topology, specs: &mut [AttackerSpec], fraction: f64, rng: &mut R) {
    let malicious: BTreeSet<NodeId> = specs.iter().map(|s| s.node).collect();
    for s in specs.iter_mut() {
        let has_malicious_parent = topology.parents(s.node).iter().any(|p| malicious.contains(p));
        if has_malicious_parent && rng.gen_bool(fraction.clamp(0.0, 1.0)) {
            s.behaviors.insert(Behavior::LieAboutIncoming);
        }
    }
}
