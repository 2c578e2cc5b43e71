//! Homomorphic MAC for expanding subspaces.
//!
//! A vector `y = (payload ∥ augmentation)` of length `n + m` is tagged, per
//! parallel instance `i`, as
//!
//! ```text
//! t_i = r_i · y + Σ_j y[n + j] · F(k2, id, j, i)      r_i = G(k1_i, n + m)
//! ```
//!
//! Tags are linear in `y`, so a linear combination of tagged vectors is
//! tagged by the same combination of tags, and anything outside the span of
//! tagged vectors verifies only by chance (probability `q^-l`).

pub mod game;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{axpy, dot_bytes, FieldVector, Gf256};
use crate::prf::{self, BlockCipher, Key};

/// A `(k1, k2)` pair: PRG seed and PRF key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacKey {
    pub k1: Key,
    pub k2: Key,
}

impl MacKey {
    pub const LEN: usize = 32;

    pub fn new(k1: Key, k2: Key) -> Self {
        MacKey { k1, k2 }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut k1 = [0u8; 16];
        let mut k2 = [0u8; 16];
        rng.fill(&mut k1);
        rng.fill(&mut k2);
        MacKey { k1, k2 }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::LEN {
            return Err(Error::Malformed(format!("key must be {} bytes, got {}", Self::LEN, bytes.len())));
        }
        let mut k1 = [0u8; 16];
        let mut k2 = [0u8; 16];
        k1.copy_from_slice(&bytes[..16]);
        k2.copy_from_slice(&bytes[16..]);
        Ok(MacKey { k1, k2 })
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[..16].copy_from_slice(&self.k1);
        out[16..].copy_from_slice(&self.k2);
        out
    }
}

impl fmt::Debug for MacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacKey({}..)", hex::encode(&self.k1[..4]))
    }
}

/// Identifier of a source space (one per generation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceId(pub u64);

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Packet geometry: `n` payload symbols, generation size `m`, `l` parallel tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

impl Dimensions {
    pub fn new(n: usize, m: usize, l: usize) -> Result<Self> {
        let d = Dimensions { n, m, l };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        if self.l == 0 || self.l > u16::MAX as usize {
            return Err(Error::invalid("l", "must be in 1..=65535"));
        }
        Ok(())
    }

    pub fn packet_len(&self) -> usize {
        self.n + self.m
    }
}

/// `l` tag symbols.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag(Vec<u8>);

impl Tag {
    pub fn zero(l: usize) -> Self {
        Tag(vec![0; l])
    }

    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Tag(bytes.into())
    }

    pub fn random<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Self {
        let mut v = vec![0u8; l];
        rng.fill(v.as_mut_slice());
        Tag(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn get(&self, i: usize) -> Gf256 {
        Gf256(self.0[i])
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Tag> {
        hex::decode(s.trim()).map(Tag).map_err(|e| Error::Malformed(format!("bad hex tag: {e}")))
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Gf256, other: &Tag) -> Result<()> {
        Error::check_len(self.len(), other.len())?;
        axpy(&mut self.0, c, &other.0);
        Ok(())
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({})", self.to_hex())
    }
}

/// Per-instance PRG seed of a key.
pub fn instance_key(key: &MacKey, instance: usize) -> Key {
    prf::instance_seed(&key.k1, instance as u16)
}

/// MAC state for one `(key, id)` pair: for each instance the PRG vector and
/// the PRF row folded into a single coefficient vector, so a tag is one inner
/// product.
#[derive(Clone, Debug)]
pub struct KeyedSpace {
    dims: Dimensions,
    coeffs: Vec<FieldVector>,
}

impl KeyedSpace {
    pub fn new(key: &MacKey, id: SpaceId, dims: Dimensions) -> Result<Self> {
        dims.validate()?;
        let prf = BlockCipher::new(&key.k2);
        let coeffs = (0..dims.l)
            .map(|i| {
                let mut c = prf::prg(&instance_key(key, i), dims.packet_len());
                let bytes = c.as_bytes_mut();
                for j in 1..=dims.m {
                    bytes[dims.n + j - 1] ^= prf.prf_unchecked(id.0, j as u32, i as u16).0;
                }
                c
            })
            .collect();
        Ok(KeyedSpace { dims, coeffs })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn mac(&self, y: &FieldVector) -> Result<Tag> {
        Error::check_len(self.dims.packet_len(), y.len())?;
        Ok(Tag(self.coeffs.iter().map(|c| dot_bytes(c.as_bytes(), y.as_bytes())).collect()))
    }

    /// Tag symbol of a single instance.
    pub fn mac_instance(&self, instance: usize, y: &FieldVector) -> Result<Gf256> {
        Error::check_len(self.dims.packet_len(), y.len())?;
        let c = self.coeffs.get(instance).ok_or(Error::IndexOutOfRange { index: instance, max: self.dims.l })?;
        Ok(Gf256(dot_bytes(c.as_bytes(), y.as_bytes())))
    }

    pub fn verify(&self, y: &FieldVector, t: &Tag) -> Result<bool> {
        Error::check_len(self.dims.l, t.len())?;
        Ok(self.mac(y)? == *t)
    }
}

/// Tags `y` with a fresh keyed state.
pub fn mac(key: &MacKey, id: SpaceId, dims: Dimensions, y: &FieldVector) -> Result<Tag> {
    KeyedSpace::new(key, id, dims)?.mac(y)
}

/// Verifies `t` against `y`. Malformed lengths are errors; a wrong tag is `Ok(false)`.
pub fn verify(key: &MacKey, id: SpaceId, dims: Dimensions, y: &FieldVector, t: &Tag) -> Result<bool> {
    KeyedSpace::new(key, id, dims)?.verify(y, t)
}

/// Tag computed term by term, without folding: `r_i · y` and the PRF sum over
/// the augmentation are evaluated separately. Reference path for the cached
/// one.
pub fn mac_uncached(key: &MacKey, id: SpaceId, dims: Dimensions, y: &FieldVector) -> Result<Tag> {
    dims.validate()?;
    Error::check_len(dims.packet_len(), y.len())?;
    let mut out = Vec::with_capacity(dims.l);
    for i in 0..dims.l {
        let r = prf::prg(&instance_key(key, i), dims.packet_len());
        let a = crate::gf::dot(&r, y)?;
        let mut b = Gf256::ZERO;
        for j in 1..=dims.m {
            b += y.get(dims.n + j - 1) * prf::prf(&key.k2, id.0, j, i as u16, dims.m)?;
        }
        out.push((a + b).0);
    }
    Ok(Tag(out))
}

/// `Σ α_i t_i`. The vectors are carried for interface parity and only checked
/// for consistent lengths.
pub fn combine(items: &[(&FieldVector, &Tag, Gf256)]) -> Result<Tag> {
    let (first_y, first_t, _) = items.first().ok_or(Error::Empty("combine needs at least one tagged vector"))?;
    let mut out = Tag::zero(first_t.len());
    for (y, t, a) in items {
        Error::check_len(first_y.len(), y.len())?;
        out.add_scaled(*a, t)?;
    }
    Ok(out)
}

/// `Σ α_i t_i` over bare tags.
pub fn combine_tags<'a, I>(items: I) -> Result<Tag>
where
    I: IntoIterator<Item = (Gf256, &'a Tag)>,
{
    let mut it = items.into_iter().peekable();
    let l = it.peek().ok_or(Error::Empty("combine needs at least one tag"))?.1.len();
    let mut out = Tag::zero(l);
    for (a, t) in it {
        out.add_scaled(a, t)?;
    }
    Ok(out)
}

/// Thread-safe memo of [`KeyedSpace`] per `(key, id, dims)`.
#[derive(Default)]
pub struct MacCache {
    map: Mutex<HashMap<(MacKey, SpaceId, Dimensions), Arc<KeyedSpace>>>,
}

impl MacCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &MacKey, id: SpaceId, dims: Dimensions) -> Result<Arc<KeyedSpace>> {
        let mut map = self.map.lock().expect("mac cache poisoned");
        if let Some(ks) = map.get(&(*key, id, dims)) {
            return Ok(Arc::clone(ks));
        }
        let ks = Arc::new(KeyedSpace::new(key, id, dims)?);
        map.insert((*key, id, dims), Arc::clone(&ks));
        Ok(ks)
    }

    /// Drops every entry for `id`, e.g. when a generation is finished.
    pub fn retire(&self, id: SpaceId) {
        self.map.lock().expect("mac cache poisoned").retain(|(_, i, _), _| *i != id);
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("mac cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
