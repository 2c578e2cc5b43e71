//! The η sweep over random networks, and its configuration file.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spacemac::locating::{DosPolicy, LocatingParams};
use spacemac::topology::TopologyFile;
use spacemac::{Dimensions, Topology};

use crate::attacker::{assign_liars, place_attackers, AttackerSpec, Behavior};
use crate::engine::{SimParams, Simulation};
use crate::error::{Result, SimError};
use crate::run::{eliminate_all, RunLimits, SimResult};
use crate::topogen::{gen_topology_with, DelayRange};

/// Behaviours given to randomly placed attackers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorToggles {
    pub pollute_all_outgoing: bool,
    /// Chance that an attacker with a malicious parent lies about it.
    pub lie_fraction: f64,
    pub tamper_helper_tag: bool,
    pub forward_corrupted: bool,
    pub leak_key_to_child: bool,
    pub alert_flood: bool,
}

impl Default for BehaviorToggles {
    fn default() -> Self {
        BehaviorToggles {
            pollute_all_outgoing: true,
            lie_fraction: 0.3,
            tamper_helper_tag: false,
            forward_corrupted: false,
            leak_key_to_child: false,
            alert_flood: false,
        }
    }
}

impl BehaviorToggles {
    fn apply(&self, specs: &mut [AttackerSpec]) {
        let toggles = [
            (self.pollute_all_outgoing, Behavior::PolluteAllOutgoing),
            (self.tamper_helper_tag, Behavior::TamperHelperTag),
            (self.forward_corrupted, Behavior::ForwardCorrupted),
            (self.leak_key_to_child, Behavior::LeakKeyToChild),
            (self.alert_flood, Behavior::AlertFlood),
        ];
        for s in specs {
            for (on, b) in toggles {
                if on {
                    s.behaviors.insert(b);
                } else {
                    s.behaviors.remove(&b);
                }
            }
        }
    }
}

/// Experiment configuration, read from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Nodes per random network, source and receiver included.
    pub node_count: usize,
    pub etas: Vec<usize>,
    pub rounds: usize,
    pub seed: u64,
    /// The edge-to-node ratio of each network is drawn uniformly from here.
    pub edge_ratio: [f64; 2],
    pub edge_delay_ms: DelayRange,
    pub control_delay_ms: DelayRange,
    pub round_timeout_ms: u64,
    pub dims: Dimensions,
    pub locating: LocatingParams,
    pub dos: DosPolicy,
    pub attackers: BehaviorToggles,
    /// Generation cap per round; `2η + 10` when absent.
    pub max_generations: Option<u64>,
    pub confirm_generations: u64,
    pub audit: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = SimParams::default();
        ExperimentConfig {
            node_count: 50,
            etas: vec![4, 8, 12, 16, 20],
            rounds: 100,
            seed: 1,
            edge_ratio: [1.0, 5.0],
            edge_delay_ms: DelayRange::default(),
            control_delay_ms: p.control_delay_ms,
            round_timeout_ms: p.round_timeout_ms,
            dims: p.dims,
            locating: p.locating,
            dos: p.dos,
            attackers: BehaviorToggles::default(),
            max_generations: None,
            confirm_generations: 1,
            audit: p.audit,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig =
            toml::from_str(text).map_err(|e| SimError::Parse { what: "experiment config", message: e.to_string() })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            dims: self.dims,
            locating: self.locating,
            dos: self.dos,
            control_delay_ms: self.control_delay_ms,
            round_timeout_ms: self.round_timeout_ms,
            audit: self.audit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_params().validate()?;
        self.edge_delay_ms.validate("edge delay")?;
        let [lo, hi] = self.edge_ratio;
        if !(1.0 <= lo && lo <= hi && hi <= 5.0) {
            return Err(SimError::Config(format!("edge_ratio must satisfy 1 <= lo <= hi <= 5, got [{lo}, {hi}]")));
        }
        if self.node_count < 3 {
            return Err(SimError::Config(format!("node_count must be at least 3, got {}", self.node_count)));
        }
        if let Some(&eta) = self.etas.iter().find(|&&e| e + 2 >= self.node_count) {
            return Err(SimError::Config(format!(
                "eta {eta} leaves no honest intermediate node among {} nodes",
                self.node_count
            )));
        }
        if !(0.0..=1.0).contains(&self.attackers.lie_fraction) {
            return Err(SimError::Config("attackers.lie_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn limits(&self, eta: usize) -> RunLimits {
        let mut l = RunLimits::for_attackers(eta);
        if let Some(m) = self.max_generations {
            l.max_generations = m;
        }
        l.confirm_generations = self.confirm_generations;
        l
    }
}

/// Parses a topology document (TOML with `nodes` and `edges` arrays).
pub fn topology_from_toml(text: &str) -> Result<Topology> {
    let file: TopologyFile =
        toml::from_str(text).map_err(|e| SimError::Parse { what: "topology", message: e.to_string() })?;
    Ok(Topology::from_file(&file)?)
}

pub fn load_topology(path: &Path) -> Result<Topology> {
    let text =
        std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    topology_from_toml(&text)
}

pub fn topology_to_toml(t: &Topology) -> String {
    toml::to_string(&t.to_file()).expect("topology serialises")
}

/// Seed of one round, mixed from the master seed, η and the round number.
pub fn round_seed(master: u64, eta: usize, round: usize) -> u64 {
    let mut z = master ^ (eta as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (round as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub eta: usize,
    pub round: usize,
    pub seed: u64,
    pub edge_ratio: f64,
    pub edges: usize,
    pub attackers: Vec<AttackerSpec>,
    pub generations_used: u64,
    pub sim_time_ms: u64,
    pub degenerate: bool,
    pub false_positives: usize,
    pub stays_clean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSummary {
    pub eta: usize,
    pub rounds: usize,
    pub avg_generations: f64,
    pub avg_delay_ms: f64,
    pub degenerate_rounds: usize,
    pub max_generations: u64,
    /// Non-degenerate rounds with more generations than attackers.
    pub over_bound_rounds: usize,
    pub false_positive_rounds: usize,
}

const TOPOLOGY_ATTEMPTS: usize = 50;

/// One round: a fresh network, fresh attackers, then [`eliminate_all`].
pub fn run_round(config: &ExperimentConfig, eta: usize, round: usize) -> Result<(RoundRecord, SimResult)> {
    run_round_on(config, None, eta, round)
}

/// Like [`run_round`], but on `fixed` instead of a fresh random network
/// when one is given. Only the attackers and keys change between rounds.
pub fn run_round_on(
    config: &ExperimentConfig,
    fixed: Option<&Topology>,
    eta: usize,
    round: usize,
) -> Result<(RoundRecord, SimResult)> {
    let seed = round_seed(config.seed, eta, round);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..TOPOLOGY_ATTEMPTS {
        let (topology, ratio) = match fixed {
            Some(t) => (t.clone(), t.edges().len() as f64 / t.node_count() as f64),
            None => {
                let [lo, hi] = config.edge_ratio;
                let ratio = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
                (gen_topology_with(&mut rng, config.node_count, ratio, config.edge_delay_ms)?, ratio)
            }
        };
        let mut specs = match place_attackers(&topology, eta, &mut rng) {
            Ok(s) => s,
            Err(e @ SimError::Placement(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        config.attackers.apply(&mut specs);
        assign_liars(&topology, &mut specs, config.attackers.lie_fraction, &mut rng);
        let edges = topology.edges().len();
        let mut sim = Simulation::new(topology, specs.clone(), config.sim_params(), rng.gen())?;
        let result = eliminate_all(&mut sim, config.limits(eta))?;
        let record = RoundRecord {
            eta,
            round,
            seed,
            edge_ratio: ratio,
            edges,
            attackers: specs,
            generations_used: result.generations_used,
            sim_time_ms: result.sim_time_ms,
            degenerate: result.degenerate.is_some(),
            false_positives: result.false_positives.len(),
            stays_clean: result.stays_clean(),
        };
        return Ok((record, result));
    }
    Err(last_err.unwrap_or_else(|| SimError::Placement("no attempts made".into())))
}

pub fn summarize(eta: usize, rounds: &[RoundRecord]) -> EtaSummary {
    let good: Vec<&RoundRecord> = rounds.iter().filter(|r| !r.degenerate).collect();
    let mean = |f: fn(&RoundRecord) -> u64| {
        if good.is_empty() {
            0.0
        } else {
            good.iter().map(|r| f(r) as f64).sum::<f64>() / good.len() as f64
        }
    };
    EtaSummary {
        eta,
        rounds: rounds.len(),
        avg_generations: mean(|r| r.generations_used),
        avg_delay_ms: mean(|r| r.sim_time_ms),
        degenerate_rounds: rounds.len() - good.len(),
        max_generations: good.iter().map(|r| r.generations_used).max().unwrap_or(0),
        over_bound_rounds: good.iter().filter(|r| r.generations_used > r.eta as u64).count(),
        false_positive_rounds: rounds.iter().filter(|r| r.false_positives > 0).count(),
    }
}

/// Runs every round of every η. `observe` sees each round as it finishes
/// (for traces); degenerate rounds are excluded from the averages.
pub fn run_experiment<F>(config: &ExperimentConfig, observe: F) -> Result<Vec<EtaSummary>>
where
    F: FnMut(&RoundRecord, &SimResult),
{
    run_experiment_on(config, None, observe)
}

/// [`run_experiment`] with an optional fixed network for every round.
pub fn run_experiment_on<F>(config: &ExperimentConfig, fixed: Option<&Topology>, mut observe: F) -> Result<Vec<EtaSummary>>
where
    F: FnMut(&RoundRecord, &SimResult),
{
    config.validate()?;
    if let Some(t) = fixed {
        if let Some(&eta) = config.etas.iter().find(|&&e| e > 0 && e > t.intermediates().len()) {
            return Err(SimError::Config(format!(
                "eta = {eta} exceeds the {} intermediate nodes of the given network",
                t.intermediates().len()
            )));
        }
    }
    let mut out = Vec::with_capacity(config.etas.len());
    for &eta in &config.etas {
        let mut records = Vec::with_capacity(config.rounds);
        for round in 0..config.rounds {
            let (rec, result) = run_round_on(config, fixed, eta, round)?;
            observe(&rec, &result);
            records.push(rec);
        }
        out.push(summarize(eta, &records));
    }
    Ok(out)
}
