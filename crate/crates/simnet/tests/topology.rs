use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spacemac::{NodeId, Role, Topology};
use spacemac_sim::experiment::{topology_from_toml, topology_to_toml};
use spacemac_sim::{gen_topology, place_attackers};

/// Plain edge-list view, independent of the topology's own indexes.
fn edge_list(t: &Topology) -> Vec<(NodeId, NodeId)> {
    t.edges().iter().map(|e| (e.from, e.to)).collect()
}

fn reach(edges: &[(NodeId, NodeId)], starts: &[NodeId], removed: &BTreeSet<NodeId>, forward: bool) -> BTreeSet<NodeId> {
    let mut seen: BTreeSet<NodeId> = starts.iter().copied().filter(|s| !removed.contains(s)).collect();
    let mut queue: VecDeque<NodeId> = seen.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        for &(a, b) in edges {
            let (from, to) = if forward { (a, b) } else { (b, a) };
            if from == n && !removed.contains(&to) && seen.insert(to) {
                queue.push_back(to);
            }
        }
    }
    seen
}

fn is_acyclic(nodes: &[NodeId], edges: &[(NodeId, NodeId)]) -> bool {
    let mut indegree: BTreeMap<NodeId, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for &(_, b) in edges {
        *indegree.get_mut(&b).unwrap() += 1;
    }
    let mut queue: VecDeque<NodeId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    let mut visited = 0;
    while let Some(n) = queue.pop_front() {
        visited += 1;
        for &(a, b) in edges {
            if a == n {
                let d = indegree.get_mut(&b).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push_back(b);
                }
            }
        }
    }
    visited == nodes.len()
}

#[test]
fn generated_networks_are_well_formed() {
    for seed in 0..100u64 {
        let ratio = 1.0 + (seed % 5) as f64;
        let t = gen_topology(&mut ChaCha8Rng::seed_from_u64(seed), 50, ratio).unwrap();
        let nodes: Vec<NodeId> = t.node_ids().collect();
        let edges = edge_list(&t);
        assert_eq!(nodes.len(), 50);
        assert!(is_acyclic(&nodes, &edges), "seed {seed}");
        let roles: Vec<Role> = nodes.iter().map(|&n| t.role(n).unwrap()).collect();
        assert_eq!(roles.iter().filter(|r| **r == Role::Source).count(), 1);
        assert!(roles.contains(&Role::Receiver));
        let from_source = reach(&edges, &[t.source()], &BTreeSet::new(), true);
        let to_receiver = reach(&edges, &t.receivers(), &BTreeSet::new(), false);
        for &n in &nodes {
            assert!(from_source.contains(&n) && to_receiver.contains(&n), "seed {seed}: {n} is off every path");
        }
        for e in t.edges() {
            assert!((10..=100).contains(&e.delay_ms));
        }
        let expected = ((ratio * 50.0).round() as usize).max(49);
        assert!(edges.len() <= expected && edges.len() >= 49, "seed {seed}: {} edges", edges.len());
    }
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let a = gen_topology(&mut ChaCha8Rng::seed_from_u64(5), 50, 2.5).unwrap();
    let b = gen_topology(&mut ChaCha8Rng::seed_from_u64(5), 50, 2.5).unwrap();
    assert_eq!(edge_list(&a), edge_list(&b));
    let c = gen_topology(&mut ChaCha8Rng::seed_from_u64(6), 50, 2.5).unwrap();
    assert_ne!(edge_list(&a), edge_list(&c));
    let back = topology_from_toml(&topology_to_toml(&a)).unwrap();
    assert_eq!(edge_list(&back), edge_list(&a));
    assert_eq!(back.source(), a.source());
    assert_eq!(back.receivers(), a.receivers());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_attacker_survives_the_removal_of_the_others(seed in any::<u64>(), nodes in 8usize..40, ratio in 1.0f64..5.0, eta in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = gen_topology(&mut rng, nodes, ratio).unwrap();
        let Ok(specs) = place_attackers(&t, eta, &mut rng) else { return Ok(()) };
        prop_assert_eq!(specs.len(), eta);
        let chosen: BTreeSet<NodeId> = specs.iter().map(|s| s.node).collect();
        prop_assert_eq!(chosen.len(), eta);
        let edges = edge_list(&t);
        for &a in &chosen {
            prop_assert_eq!(t.role(a).unwrap(), Role::Intermediate);
            let mut removed = chosen.clone();
            removed.remove(&a);
            let fwd = reach(&edges, &[t.source()], &removed, true);
            let back = reach(&edges, &t.receivers(), &removed, false);
            prop_assert!(fwd.contains(&a));
            prop_assert!(t.children(a).iter().any(|c| back.contains(c)));
        }
    }
}
