//! Block-cipher based pseudorandom function and generator.
//!
//! Both are built on AES-128 with fixed block encodings so tags are
//! reproducible bit for bit:
//!
//! * `F(k, id, j, inst)` encrypts `[id: 8 BE][j: 4 BE][inst: 2 BE][00 00]`
//!   under `k` and keeps the first byte.
//! * `G(k, len)` is the counter-mode keystream over blocks
//!   `[0^8][counter: 8 BE]`, counter starting at zero.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;

use crate::error::{Error, Result};
use crate::gf::{FieldVector, Gf256};

pub const KEY_LEN: usize = 16;
pub type Key = [u8; KEY_LEN];

/// A keyed AES-128 instance.
#[derive(Clone)]
pub struct BlockCipher(Aes128);

impl BlockCipher {
    pub fn new(key: &Key) -> Self {
        BlockCipher(Aes128::new(GenericArray::from_slice(key)))
    }

    pub fn encrypt(&self, block: [u8; 16]) -> [u8; 16] {
        let mut b = GenericArray::from(block);
        self.0.encrypt_block(&mut b);
        b.into()
    }

    fn prf_block(id: u64, j: u32, instance: u16) -> [u8; 16] {
        let mut block = [0u8; 16];
        block[..8].copy_from_slice(&id.to_be_bytes());
        block[8..12].copy_from_slice(&j.to_be_bytes());
        block[12..14].copy_from_slice(&instance.to_be_bytes());
        block
    }

    /// `F(k, id, j, instance)` without range checks.
    pub fn prf_unchecked(&self, id: u64, j: u32, instance: u16) -> Gf256 {
        Gf256(self.encrypt(Self::prf_block(id, j, instance))[0])
    }

    /// Counter-mode keystream of `len` symbols.
    pub fn keystream(&self, len: usize) -> FieldVector {
        let mut out = Vec::with_capacity(len.div_ceil(16) * 16);
        let mut counter = 0u64;
        while out.len() < len {
            let mut block = [0u8; 16];
            block[8..].copy_from_slice(&counter.to_be_bytes());
            out.extend_from_slice(&self.encrypt(block));
            counter += 1;
        }
        out.truncate(len);
        FieldVector::from_bytes(out)
    }
}

/// `F(key, id, j, instance)` for `1 <= j <= m`.
pub fn prf(key: &Key, id: u64, j: usize, instance: u16, m: usize) -> Result<Gf256> {
    if j == 0 || j > m {
        return Err(Error::IndexOutOfRange { index: j, max: m });
    }
    Ok(BlockCipher::new(key).prf_unchecked(id, j as u32, instance))
}

/// The row `F(key, id, 1..=m, instance)`.
pub fn prf_row(key: &Key, id: u64, instance: u16, m: usize) -> Vec<u8> {
    let c = BlockCipher::new(key);
    (1..=m).map(|j| c.prf_unchecked(id, j as u32, instance).0).collect()
}

/// `G(seed, len)`.
pub fn prg(seed: &Key, len: usize) -> FieldVector {
    BlockCipher::new(seed).keystream(len)
}

/// Seed of parallel instance `instance` derived from a master seed. Instance
/// zero is the master itself; later ones encrypt `[ff^8][instance: 8 BE]`,
/// a block the keystream never produces (its counter prefix is zero).
pub fn instance_seed(master: &Key, instance: u16) -> Key {
    if instance == 0 {
        return *master;
    }
    let mut block = [0xFFu8; 16];
    block[8..].copy_from_slice(&(instance as u64).to_be_bytes());
    BlockCipher::new(master).encrypt(block)
}
