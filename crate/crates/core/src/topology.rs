//! Directed acyclic network graphs with per-edge delays.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Intermediate,
    Receiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub delay_ms: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: NodeId,
    pub role: Role,
}

/// On-disk form of a topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyFile {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    roles: BTreeMap<NodeId, Role>,
    edges: Vec<Edge>,
    parents: BTreeMap<NodeId, Vec<NodeId>>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    order: Vec<NodeId>,
    source: NodeId,
}

impl Topology {
    /// Builds a topology and checks every structural invariant: known
    /// endpoints, no duplicate or self edges, acyclic, a single parentless
    /// source, at least one receiver, and every node on a source-to-receiver
    /// path.
    pub fn new(nodes: impl IntoIterator<Item = (NodeId, Role)>, edges: Vec<Edge>) -> Result<Self> {
        let t = Self::build(nodes, edges)?;
        t.check_paths()?;
        Ok(t)
    }

    pub fn from_file(file: &TopologyFile) -> Result<Self> {
        Self::new(file.nodes.iter().map(|e| (e.id, e.role)), file.edges.clone())
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            nodes: self.roles.iter().map(|(&id, &role)| NodeEntry { id, role }).collect(),
            edges: self.edges.clone(),
        }
    }

    fn build(nodes: impl IntoIterator<Item = (NodeId, Role)>, edges: Vec<Edge>) -> Result<Self> {
        let mut roles = BTreeMap::new();
        for (id, role) in nodes {
            if roles.insert(id, role).is_some() {
                return Err(Error::Topology(format!("duplicate node {id}")));
            }
        }
        let sources: Vec<_> = roles.iter().filter(|(_, r)| **r == Role::Source).map(|(id, _)| *id).collect();
        let source = match sources.as_slice() {
            [s] => *s,
            [] => return Err(Error::Topology("no source node".into())),
            _ => return Err(Error::Topology(format!("{} source nodes", sources.len()))),
        };
        if !roles.values().any(|r| *r == Role::Receiver) {
            return Err(Error::Topology("no receiver node".into()));
        }

        let mut parents: BTreeMap<NodeId, Vec<NodeId>> = roles.keys().map(|&id| (id, Vec::new())).collect();
        let mut children = parents.clone();
        let mut seen = BTreeSet::new();
        for e in &edges {
            for end in [e.from, e.to] {
                if !roles.contains_key(&end) {
                    return Err(Error::UnknownNode(end));
                }
            }
            if e.from == e.to {
                return Err(Error::Topology(format!("self loop at {}", e.from)));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::Topology(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            children.get_mut(&e.from).unwrap().push(e.to);
            parents.get_mut(&e.to).unwrap().push(e.from);
        }
        if !parents[&source].is_empty() {
            return Err(Error::Topology("source has incoming edges".into()));
        }

        // Kahn's algorithm; ties broken by node id for determinism.
        let mut indeg: BTreeMap<NodeId, usize> = parents.iter().map(|(&k, v)| (k, v.len())).collect();
        let mut ready: BTreeSet<NodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
        let mut order = Vec::with_capacity(roles.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for c in &children[&n] {
                let d = indeg.get_mut(c).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(*c);
                }
            }
        }
        if order.len() != roles.len() {
            return Err(Error::Topology("graph contains a cycle".into()));
        }

        Ok(Topology { roles, edges, parents, children, order, source })
    }

    fn check_paths(&self) -> Result<()> {
        let from_source = self.reachable_from(self.source);
        let to_receiver = self.reaching_receivers();
        for &id in self.roles.keys() {
            if !from_source.contains(&id) {
                return Err(Error::Topology(format!("node {id} is unreachable from the source")));
            }
            if !to_receiver.contains(&id) {
                return Err(Error::Topology(format!("node {id} reaches no receiver")));
            }
        }
        Ok(())
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn receivers(&self) -> Vec<NodeId> {
        self.roles.iter().filter(|(_, r)| **r == Role::Receiver).map(|(id, _)| *id).collect()
    }

    pub fn role(&self, id: NodeId) -> Result<Role> {
        self.roles.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.roles.contains_key(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roles.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn intermediates(&self) -> Vec<NodeId> {
        self.roles.iter().filter(|(_, r)| **r == Role::Intermediate).map(|(id, _)| *id).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        self.parents.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Nodes in a topological order (parents before children).
    pub fn topo_order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn max_delay_ms(&self) -> u32 {
        self.edges.iter().map(|e| e.delay_ms).max().unwrap_or(0)
    }

    /// All nodes reachable from `start`, including `start`.
    pub fn reachable_from(&self, start: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        if !self.contains(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(n) = queue.pop_front() {
            for &c in self.children(n) {
                if seen.insert(c) {
                    queue.push_back(c);
                }
            }
        }
        seen
    }

    /// All nodes with a directed path to some receiver (receivers included).
    pub fn reaching_receivers(&self) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = self.receivers().into_iter().collect();
        let mut queue: VecDeque<NodeId> = seen.iter().copied().collect();
        while let Some(n) = queue.pop_front() {
            for &p in self.parents(n) {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// The subgraph with `removed` nodes and all their edges deleted. The
    /// result may violate the path invariant, which pruning is allowed to do.
    pub fn without(&self, removed: &BTreeSet<NodeId>) -> Result<Topology> {
        if removed.contains(&self.source) {
            return Err(Error::Topology("cannot remove the source".into()));
        }
        let nodes = self.roles.iter().filter(|(id, _)| !removed.contains(id)).map(|(&id, &r)| (id, r));
        let edges = self
            .edges
            .iter()
            .filter(|e| !removed.contains(&e.from) && !removed.contains(&e.to))
            .copied()
            .collect();
        Self::build(nodes, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn edge(a: u32, b: u32) -> Edge {
        Edge { from: n(a), to: n(b), delay_ms: 10 }
    }

    fn chain() -> Topology {
        Topology::new(
            [(n(0), Role::Source), (n(1), Role::Intermediate), (n(2), Role::Receiver)],
            vec![edge(0, 1), edge(1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn chain_accessors() {
        let t = chain();
        assert_eq!(t.source(), n(0));
        assert_eq!(t.receivers(), vec![n(2)]);
        assert_eq!(t.parents(n(1)), &[n(0)]);
        assert_eq!(t.children(n(1)), &[n(2)]);
        assert_eq!(t.topo_order(), &[n(0), n(1), n(2)]);
    }

    #[test]
    fn rejects_cycles_and_dangling_nodes() {
        let nodes = [(n(0), Role::Source), (n(1), Role::Intermediate), (n(2), Role::Intermediate), (n(3), Role::Receiver)];
        let cyc = Topology::new(nodes, vec![edge(0, 1), edge(1, 2), edge(2, 1), edge(2, 3)]);
        assert!(matches!(cyc, Err(Error::Topology(_))));
        let dangling = Topology::new(nodes, vec![edge(0, 1), edge(1, 3), edge(0, 2)]);
        assert!(matches!(dangling, Err(Error::Topology(_))));
        let unknown = Topology::new(nodes, vec![edge(0, 9)]);
        assert!(matches!(unknown, Err(Error::UnknownNode(_))));
    }

    #[test]
    fn pruning_removes_edges() {
        let t = chain();
        let p = t.without(&BTreeSet::from([n(1)])).unwrap();
        assert_eq!(p.node_count(), 2);
        assert!(p.edges().is_empty());
        assert!(!p.reaching_receivers().contains(&n(0)));
    }

    #[test]
    fn file_round_trip() {
        let t = chain();
        assert_eq!(Topology::from_file(&t.to_file()).unwrap(), t);
    }
}
