//! Deterministic discrete-event simulation of pollution detection and
//! attacker locating on coded multicast networks.
//!
//! * [`topogen`]: random DAGs with per-edge delays.
//! * [`attacker`]: attacker behaviours and placement.
//! * [`engine`]: one network, generation by generation.
//! * [`run`]: repeat generations until every attacker is blacklisted.
//! * [`experiment`]: the attacker-count sweep and its config file.
//! * [`scenarios`]: small fixed networks.

pub mod attacker;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod run;
pub mod scenarios;
pub mod topogen;

pub use attacker::{place_attackers, AttackerSpec, Behavior};
pub use engine::{GenerationRecord, LogEntry, SimParams, Simulation};
pub use error::{Result, SimError};
pub use experiment::{run_experiment, run_experiment_on, EtaSummary, ExperimentConfig};
pub use run::{eliminate_all, RunLimits, SimResult};
pub use topogen::{gen_topology, DelayRange};
