//! Forgery game against the MAC.
//!
//! The adversary may ask for tags of arbitrary `(id, y)` pairs and then
//! outputs one forgery `(id*, y*, t*)`. It wins when `y*` has a nonzero
//! augmentation, `t*` verifies, and `y*` lies outside the span of the
//! vectors it queried under `id*`.

use std::collections::HashMap;

use rand::{Rng, RngCore};

use super::{Dimensions, KeyedSpace, MacKey, SpaceId, Tag};
use crate::error::Result;
use crate::gf::{Basis, FieldVector};

/// Tagging oracle handed to the adversary. Tracks every query.
pub struct Oracle {
    key: MacKey,
    dims: Dimensions,
    spaces: HashMap<SpaceId, KeyedSpace>,
    queried: HashMap<SpaceId, Vec<FieldVector>>,
}

impl Oracle {
    fn new(key: MacKey, dims: Dimensions) -> Self {
        Oracle { key, dims, spaces: HashMap::new(), queried: HashMap::new() }
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    fn space(&mut self, id: SpaceId) -> Result<&KeyedSpace> {
        if !self.spaces.contains_key(&id) {
            let ks = KeyedSpace::new(&self.key, id, self.dims)?;
            self.spaces.insert(id, ks);
        }
        Ok(&self.spaces[&id])
    }

    pub fn query(&mut self, id: SpaceId, y: &FieldVector) -> Result<Tag> {
        let t = self.space(id)?.mac(y)?;
        self.queried.entry(id).or_default().push(y.clone());
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct Forgery {
    pub id: SpaceId,
    pub y: FieldVector,
    pub tag: Tag,
}

pub trait Adversary {
    fn play(&mut self, oracle: &mut Oracle, rng: &mut dyn RngCore) -> Result<Forgery>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameStats {
    pub trials: u64,
    pub wins: u64,
    /// Forgeries whose tag verified, whether or not they counted as wins.
    pub verified: u64,
}

impl GameStats {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.wins as f64 / self.trials as f64
        }
    }
}

/// Plays `trials` independent games, each with a fresh random key.
pub fn attack_game<A, R>(adversary: &mut A, dims: Dimensions, trials: u64, rng: &mut R) -> Result<GameStats>
where
    A: Adversary + ?Sized,
    R: Rng,
{
    dims.validate()?;
    let mut stats = GameStats { trials, wins: 0, verified: 0 };
    for _ in 0..trials {
        let mut oracle = Oracle::new(MacKey::random(rng), dims);
        let f = adversary.play(&mut oracle, rng)?;
        let accepted = oracle.space(f.id)?.verify(&f.y, &f.tag)?;
        if accepted {
            stats.verified += 1;
        }
        let nonzero_aug = f.y.as_bytes()[dims.n..].iter().any(|&b| b != 0);
        let outside = match oracle.queried.get(&f.id) {
            Some(qs) => !Basis::from_vectors(dims.packet_len(), qs)?.contains(&f.y)?,
            None => true,
        };
        if nonzero_aug && accepted && outside {
            stats.wins += 1;
        }
    }
    Ok(stats)
}

/// Queries one vector and hands back the genuine pair.
pub struct ReplayAdversary;

impl Adversary for ReplayAdversary {
    fn play(&mut self, oracle: &mut Oracle, rng: &mut dyn RngCore) -> Result<Forgery> {
        let id = SpaceId(rng.gen());
        let y = FieldVector::random(oracle.dims().packet_len(), rng);
        let tag = oracle.query(id, &y)?;
        Ok(Forgery { id, y, tag })
    }
}

/// Learns the payload part of the key from two queries under one id and
/// transfers it to a fresh id. The forged tag always verifies, but the
/// augmentation is zero.
pub struct ZeroAugmentationAdversary;

impl Adversary for ZeroAugmentationAdversary {
    fn play(&mut self, oracle: &mut Oracle, rng: &mut dyn RngCore) -> Result<Forgery> {
        let d = oracle.dims();
        let id = SpaceId(rng.gen());
        let payload = FieldVector::random(d.n, rng);
        let with_payload = payload.concat(&FieldVector::unit(d.m, 0));
        let without = FieldVector::zeros(d.n).concat(&FieldVector::unit(d.m, 0));
        let mut tag = oracle.query(id, &with_payload)?;
        tag.add_scaled(crate::gf::Gf256::ONE, &oracle.query(id, &without)?)?;
        let y = payload.concat(&FieldVector::zeros(d.m));
        Ok(Forgery { id: SpaceId(id.0.wrapping_add(1)), y, tag })
    }
}

/// Queries `queries` random vectors, then guesses a uniformly random tag for
/// a fresh random vector with nonzero augmentation.
pub struct RandomTagAdversary {
    pub queries: usize,
}

impl Adversary for RandomTagAdversary {
    fn play(&mut self, oracle: &mut Oracle, rng: &mut dyn RngCore) -> Result<Forgery> {
        let d = oracle.dims();
        let id = SpaceId(rng.gen());
        for _ in 0..self.queries {
            let y = FieldVector::random(d.packet_len(), rng);
            oracle.query(id, &y)?;
        }
        let mut y = FieldVector::random(d.packet_len(), rng);
        if y.as_bytes()[d.n..].iter().all(|&b| b == 0) {
            y.as_bytes_mut()[d.n] = 1;
        }
        Ok(Forgery { id, y, tag: Tag::random(d.l, rng) })
    }
}
