//! Homomorphic subspace MACs and the pollution detection and attacker
//! locating protocols built on them for random linear network coding.
//!
//! * [`gf`]: GF(2^8) arithmetic, vectors and row-echelon subspaces.
//! * [`mac`]: the MAC (tag, combine, verify) and its forgery game.
//! * [`rlnc`]: generations, recoding, decoding and source-space checks.
//! * [`detection`]: hop-by-hop and end-to-end verification.
//! * [`locating`]: non-repudiable reports and controller-side attacker identification.
//! * [`analysis`]: closed-form bounds and overhead counts.
//! * [`vectors`]: known-answer test vector files.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod gf;
pub mod locating;
pub mod mac;
pub mod prf;
pub mod rlnc;
pub mod stats;
pub mod topology;
pub mod vectors;

pub use error::{Error, Result};
pub use gf::{Basis, FieldVector, Gf256};
pub use mac::{Dimensions, MacKey, SpaceId, Tag};
pub use topology::{NodeId, Role, Topology};
