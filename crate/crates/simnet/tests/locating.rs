use std::collections::BTreeSet;

use spacemac::Dimensions;
use spacemac_sim::experiment::{run_round, ExperimentConfig};
use spacemac_sim::{eliminate_all, scenarios, RunLimits, SimParams, Simulation};

fn small() -> SimParams {
    SimParams { dims: Dimensions { n: 32, m: 32, l: 1 }, ..SimParams::default() }
}

fn config(node_count: usize, rounds: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dims.n = 32;
    c.node_count = node_count;
    c.rounds = rounds;
    c
}

#[test]
fn single_polluter_is_the_only_one_blamed() {
    for seed in 0..100 {
        let s = scenarios::single_polluter();
        let b = s.id("B");
        let mut sim = Simulation::new(s.topology, s.attackers, small(), seed).unwrap();
        let g = sim.run_generation().unwrap();
        assert_eq!(g.identified(), BTreeSet::from([b]), "seed {seed}");
        assert_eq!(sim.blacklist(), &BTreeSet::from([b]));
        assert!(!sim.topology().contains(b));
        let next = sim.run_generation().unwrap();
        assert!(next.is_clean() && !next.is_polluted());
        assert!(next.decoded.values().all(|&ok| ok));
    }
}

#[test]
fn colluders_are_all_found_within_three_generations() {
    for seed in 0..100 {
        let s = scenarios::colluders();
        let expected: BTreeSet<_> = ["A", "B", "E"].iter().map(|n| s.id(n)).collect();
        let mut sim = Simulation::new(s.topology, s.attackers, small(), seed).unwrap();
        let r = eliminate_all(&mut sim, RunLimits { max_generations: 3, confirm_generations: 2 }).unwrap();
        assert!(r.degenerate.is_none(), "seed {seed}: {:?}", r.blacklist_trace);
        assert!(r.generations_used <= 3);
        assert_eq!(sim.blacklist(), &expected, "seed {seed}");
        assert!(r.false_positives.is_empty());
        assert!(r.stays_clean());
    }
}

#[test]
fn colluders_fall_one_layer_at_a_time() {
    let s = scenarios::colluders();
    let (a, b, e) = (s.id("A"), s.id("B"), s.id("E"));
    let mut sim = Simulation::new(s.topology, s.attackers, small(), 4).unwrap();
    let r = eliminate_all(&mut sim, RunLimits::for_attackers(3)).unwrap();
    let order: Vec<_> = r.blacklist_trace.iter().map(|&(g, n)| (g, n)).collect();
    assert_eq!(order, vec![(1, b), (2, e), (3, a)]);
}

#[test]
fn lone_attacker_takes_one_generation() {
    let c = config(30, 1);
    for round in 0..40 {
        let (rec, res) = run_round(&c, 1, round).unwrap();
        assert!(!rec.degenerate, "round {round}");
        assert_eq!(rec.generations_used, 1, "round {round}");
        assert!(res.false_positives.is_empty());
    }
}

#[test]
fn random_networks_obey_the_audits() {
    let c = config(40, 1);
    for eta in [2, 5, 9] {
        for round in 0..6 {
            let (rec, res) = run_round(&c, eta, round).unwrap();
            let malicious: BTreeSet<_> = rec.attackers.iter().map(|a| a.node).collect();
            assert_eq!(res.exposure_violations(&malicious), 0, "eta {eta} round {round}");
            assert_eq!(res.span_violations(), 0);
            if !rec.degenerate {
                assert!(rec.generations_used <= eta as u64, "eta {eta} round {round}: {}", rec.generations_used);
                assert!(res.remaining.is_empty());
                // once the last attacker is gone the network stays clean
                assert!(res.stays_clean(), "eta {eta} round {round}");
                let last = res.blacklist_trace.last().unwrap().0;
                assert!(res.generations[last as usize..].iter().all(|g| g.is_clean() && !g.is_polluted()));
            }
            // blacklisting only grows: each node appears once
            let nodes: BTreeSet<_> = res.blacklist_trace.iter().map(|&(_, n)| n).collect();
            assert_eq!(nodes.len(), res.blacklist_trace.len());
            assert!(res.blacklist_trace.windows(2).all(|w| w[0].0 <= w[1].0));
        }
    }
}

#[test]
fn same_seed_same_log() {
    let c = config(30, 1);
    let (r1, s1) = run_round(&c, 4, 7).unwrap();
    let (r2, s2) = run_round(&c, 4, 7).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(s1, s2);
    let j1 = format!("{:?}", s1.log);
    let j2 = format!("{:?}", s2.log);
    assert_eq!(j1, j2);
    let (_, s3) = run_round(&c, 4, 8).unwrap();
    assert_ne!(format!("{:?}", s3.log), j1);
}
