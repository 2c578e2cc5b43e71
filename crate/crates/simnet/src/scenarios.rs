//! Small hand-built networks used in tests and by the CLI.

use std::collections::BTreeMap;

use spacemac::topology::Edge;
use spacemac::{NodeId, Role, Topology};

use crate::attacker::{AttackerSpec, Behavior};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub attackers: Vec<AttackerSpec>,
    pub names: BTreeMap<NodeId, &'static str>,
}

impl Scenario {
    pub fn id(&self, name: &str) -> NodeId {
        *self.names.iter().find(|(_, n)| **n == name).unwrap_or_else(|| panic!("no node named {name}")).0
    }

    pub fn name(&self, id: NodeId) -> &'static str {
        self.names.get(&id).copied().unwrap_or("?")
    }
}

/// Builds a scenario from named nodes (first is the source; names starting
/// with `R` are receivers) and `from -> to` pairs, all with `delay_ms`.
fn build(names: &[&'static str], links: &[(&str, &str)], delay_ms: u32) -> (Topology, BTreeMap<NodeId, &'static str>) {
    let ids: BTreeMap<&str, NodeId> = names.iter().enumerate().map(|(i, n)| (*n, NodeId(i as u32))).collect();
    let nodes = names.iter().enumerate().map(|(i, n)| {
        let role = if i == 0 {
            Role::Source
        } else if n.starts_with('R') {
            Role::Receiver
        } else {
            Role::Intermediate
        };
        (NodeId(i as u32), role)
    });
    let edges = links.iter().map(|(a, b)| Edge { from: ids[a], to: ids[b], delay_ms }).collect();
    let topology = Topology::new(nodes, edges).expect("hand-built topology is valid");
    (topology, ids.into_iter().map(|(n, id)| (id, n)).collect())
}

/// Line-plus-shortcut network with attacker `B`: S→A, A→B, B→C, A→C.
pub fn triangle() -> Scenario {
    let (topology, names) = build(&["S", "A", "B", "RC"], &[("S", "A"), ("A", "B"), ("B", "RC"), ("A", "RC")], 10);
    let b = NodeId(2);
    Scenario { topology, attackers: vec![AttackerSpec::polluter(b)], names }
}

/// Two-receiver network with a single polluter `B`.
pub fn single_polluter() -> Scenario {
    let (topology, names) = build(
        &["S", "A", "B", "C", "D", "E", "R1", "R2"],
        &[
            ("S", "A"),
            ("S", "B"),
            ("S", "C"),
            ("A", "D"),
            ("B", "D"),
            ("C", "D"),
            ("A", "R1"),
            ("D", "R1"),
            ("D", "E"),
            ("E", "R1"),
            ("E", "R2"),
            ("C", "R2"),
        ],
        10,
    );
    Scenario { topology, attackers: vec![AttackerSpec::polluter(NodeId(2))], names }
}

/// Three colluding polluters `B`, `E`, `A`; `A` lies about the edge from `B`.
pub fn colluders() -> Scenario {
    let (topology, names) = build(
        &["S", "A", "B", "C", "D", "E", "R"],
        &[
            ("S", "B"),
            ("S", "C"),
            ("B", "D"),
            ("B", "E"),
            ("B", "A"),
            ("C", "E"),
            ("C", "A"),
            ("E", "A"),
            ("D", "R"),
            ("E", "R"),
            ("A", "R"),
        ],
        10,
    );
    let (a, b, e) = (NodeId(1), NodeId(2), NodeId(5));
    let attackers = vec![AttackerSpec::polluter(a).with_lie_targets([b]), AttackerSpec::polluter(b), AttackerSpec::polluter(e)];
    Scenario { topology, attackers, names }
}

/// Chain S→T→H1→H2→R where `T` forwards honestly but corrupts the helper
/// tags it attaches for `H1`.
pub fn helper_tamper_chain() -> Scenario {
    let (topology, names) = build(&["S", "T", "H1", "H2", "R"], &[("S", "T"), ("T", "H1"), ("H1", "H2"), ("H2", "R")], 10);
    Scenario { topology, attackers: vec![AttackerSpec::new(NodeId(1), [Behavior::TamperHelperTag])], names }
}

/// Chain S→P→N→H→R with adjacent colluders: `P` pollutes and `N` recombines
/// without checking.
pub fn passive_collusion_chain() -> Scenario {
    let (topology, names) = build(&["S", "P", "N", "H", "R"], &[("S", "P"), ("P", "N"), ("N", "H"), ("H", "R")], 10);
    let attackers =
        vec![AttackerSpec::polluter(NodeId(1)), AttackerSpec::new(NodeId(2), [Behavior::ForwardCorrupted])];
    Scenario { topology, attackers, names }
}

/// Chain S→P→N→H→R where `P` leaks `N`'s verification key to `N`, which
/// then pollutes with valid hop tags.
pub fn active_collusion_chain() -> Scenario {
    let (topology, names) = build(&["S", "P", "N", "H", "R"], &[("S", "P"), ("P", "N"), ("N", "H"), ("H", "R")], 10);
    let attackers = vec![
        AttackerSpec::new(NodeId(1), [Behavior::LeakKeyToChild]),
        AttackerSpec::polluter(NodeId(2)),
    ];
    Scenario { topology, attackers, names }
}

pub fn by_name(name: &str) -> Option<Scenario> {
    Some(match name {
        "triangle" => triangle(),
        "single-polluter" => single_polluter(),
        "colluders" => colluders(),
        "helper-tamper" => helper_tamper_chain(),
        "passive-collusion" => passive_collusion_chain(),
        "active-collusion" => active_collusion_chain(),
        _ => return None,
    })
}

pub const NAMES: [&str; 6] =
    ["triangle", "single-polluter", "colluders", "helper-tamper", "passive-collusion", "active-collusion"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_scenarios_build() {
        for n in NAMES {
            let s = by_name(n).unwrap();
            for a in &s.attackers {
                assert_eq!(s.topology.role(a.node).unwrap(), Role::Intermediate, "{n}");
            }
        }
        let s = colluders();
        assert_eq!(s.id("A"), NodeId(1));
        assert_eq!(s.name(NodeId(5)), "E");
        assert!(by_name("nope").is_none());
    }
}
