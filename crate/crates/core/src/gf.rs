//! Arithmetic in GF(2^8) under the AES reduction polynomial `x^8+x^4+x^3+x+1`,
//! and the vector / subspace machinery every coding and MAC routine is built on.
//!
//! Multiplication is a single lookup into a 64 KiB product table that is built
//! once, on first use, from exp/log tables over the generator `0x03`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Sub, SubAssign};
use std::sync::LazyLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The reduction polynomial, including the `x^8` term.
pub const REDUCTION_POLY: u16 = 0x11B;

/// Number of elements in the field.
pub const FIELD_SIZE: usize = 256;

struct Tables {
    mul: Box<[[u8; 256]; 256]>,
    exp: [u8; 512],
    log: [u8; 256],
}

impl Tables {
    fn build() -> Self {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u8 = 1;
        for i in 0..255 {
            exp[i] = x;
            log[x as usize] = i as u8;
            // x * 0x03 = x * 0x02 + x
            let doubled = (x << 1) ^ if x & 0x80 != 0 { (REDUCTION_POLY & 0xFF) as u8 } else { 0 };
            x = doubled ^ x;
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }

        let mut mul = Box::new([[0u8; 256]; 256]);
        for a in 1..256 {
            for b in 1..256 {
                mul[a][b] = exp[log[a] as usize + log[b] as usize];
            }
        }
        Tables { mul, exp, log }
    }
}

static TABLES: LazyLock<Tables> = LazyLock::new(Tables::build);

#[inline(always)]
fn mul_row(c: u8) -> &'static [u8; 256] {
    &TABLES.mul[c as usize]
}

/// An element of GF(2^8).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    /// Multiplicative inverse.
    pub fn inv(self) -> Result<Gf256> {
        if self.0 == 0 {
            return Err(Error::NoInverse);
        }
        let t = &*TABLES;
        Ok(Gf256(t.exp[255 - t.log[self.0 as usize] as usize]))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Gf256 {
        Gf256(rng.gen())
    }

    /// A uniformly random element other than zero.
    pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Gf256 {
        Gf256(rng.gen_range(1..=255))
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(mul_row(self.0)[rhs.0 as usize])
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl SubAssign for Gf256 {
    fn sub_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl MulAssign for Gf256 {
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Gf256 {
    fn sum<I: Iterator<Item = Gf256>>(iter: I) -> Gf256 {
        iter.fold(Gf256::ZERO, |a, b| a + b)
    }
}

/// `dst += c * src`, elementwise. Slices must have equal length.
#[inline]
pub(crate) fn axpy(dst: &mut [u8], c: Gf256, src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    match c.0 {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        _ => {
            let row = mul_row(c.0);
            dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= row[*s as usize]);
        }
    }
}

/// `dst *= c`, elementwise.
#[inline]
pub(crate) fn scale(dst: &mut [u8], c: Gf256) {
    let row = mul_row(c.0);
    dst.iter_mut().for_each(|d| *d = row[*d as usize]);
}

#[inline]
pub(crate) fn dot_bytes(u: &[u8], v: &[u8]) -> u8 {
    debug_assert_eq!(u.len(), v.len());
    let t = &TABLES.mul;
    u.iter().zip(v).fold(0u8, |acc, (a, b)| acc ^ t[*a as usize][*b as usize])
}

/// A fixed-length vector over GF(2^8). Symbols can be rewritten, but the
/// length never changes after construction.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldVector(Box<[u8]>);

impl FieldVector {
    pub fn zeros(len: usize) -> Self {
        FieldVector(vec![0u8; len].into_boxed_slice())
    }

    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        FieldVector(bytes.into().into_boxed_slice())
    }

    pub fn from_elements(elems: &[Gf256]) -> Self {
        FieldVector(elems.iter().map(|e| e.0).collect())
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = vec![0u8; len];
        rng.fill(v.as_mut_slice());
        FieldVector(v.into_boxed_slice())
    }

    /// The unit vector `e_index` of the given length.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = 1;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Gf256 {
        Gf256(self.0[i])
    }

    pub fn set(&mut self, i: usize, v: Gf256) {
        self.0[i] = v.0;
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Gf256> + '_ {
        self.0.iter().map(|&b| Gf256(b))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// Copy of the symbols in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FieldVector {
        FieldVector::from_bytes(&self.0[range])
    }

    /// Concatenation `self ∥ other`.
    pub fn concat(&self, other: &FieldVector) -> FieldVector {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        FieldVector::from_bytes(v)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: Gf256, other: &FieldVector) -> Result<()> {
        Error::check_len(self.len(), other.len())?;
        axpy(&mut self.0, c, &other.0);
        Ok(())
    }

    pub fn add_assign(&mut self, other: &FieldVector) -> Result<()> {
        self.add_scaled(Gf256::ONE, other)
    }

    pub fn scale(&mut self, c: Gf256) {
        scale(&mut self.0, c);
    }

    /// Linear combination `Σ coeffs[i] * vectors[i]`.
    pub fn combination<'a, I>(len: usize, terms: I) -> Result<FieldVector>
    where
        I: IntoIterator<Item = (Gf256, &'a FieldVector)>,
    {
        let mut out = FieldVector::zeros(len);
        for (c, v) in terms {
            out.add_scaled(c, v)?;
        }
        Ok(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<FieldVector> {
        hex::decode(s.trim())
            .map(FieldVector::from_bytes)
            .map_err(|e| Error::Malformed(format!("bad hex vector: {e}")))
    }
}

impl fmt::Debug for FieldVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 32 {
            write!(f, "FieldVector({})", self.to_hex())
        } else {
            write!(f, "FieldVector({}..; len {})", hex::encode(&self.0[..16]), self.len())
        }
    }
}

/// Inner product `Σ u_i v_i`.
pub fn dot(u: &FieldVector, v: &FieldVector) -> Result<Gf256> {
    Error::check_len(u.len(), v.len())?;
    Ok(Gf256(dot_bytes(u.as_bytes(), v.as_bytes())))
}

/// A subspace of `GF(2^8)^len` held as a basis in reduced row-echelon form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    len: usize,
    rows: Vec<FieldVector>,
    pivots: Vec<usize>,
}

impl Basis {
    pub fn new(len: usize) -> Self {
        Basis { len, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn from_vectors<'a, I>(len: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FieldVector>,
    {
        let mut b = Basis::new(len);
        for v in vectors {
            b.insert(v)?;
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn vector_len(&self) -> usize {
        self.len
    }

    pub fn rows(&self) -> &[FieldVector] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Adds `v` to the spanning set. Returns `true` iff the dimension grew.
    pub fn insert(&mut self, v: &FieldVector) -> Result<bool> {
        Error::check_len(self.len, v.len())?;
        if self.rows.len() == self.len {
            return Ok(false);
        }
        let mut w = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let c = w.get(p);
            if !c.is_zero() {
                axpy(w.as_bytes_mut(), c, row.as_bytes());
            }
        }
        let Some(pivot) = w.as_bytes().iter().position(|&b| b != 0) else {
            return Ok(false);
        };
        let lead = w.get(pivot).inv()?;
        w.scale(lead);
        for row in &mut self.rows {
            let c = row.get(pivot);
            if !c.is_zero() {
                axpy(row.as_bytes_mut(), c, w.as_bytes());
            }
        }
        let at = self.pivots.partition_point(|&p| p < pivot);
        self.pivots.insert(at, pivot);
        self.rows.insert(at, w);
        Ok(true)
    }

    /// Membership test `v ∈ span(self)`. In reduced form the only candidate
    /// combination uses `v`'s pivot-column entries as coefficients.
    pub fn contains(&self, v: &FieldVector) -> Result<bool> {
        Error::check_len(self.len, v.len())?;
        let mut acc = vec![0u8; self.len];
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            axpy(&mut acc, v.get(p), row.as_bytes());
        }
        Ok(acc.as_slice() == v.as_bytes())
    }
}

/// Rank of a set of equal-length vectors.
pub fn rank<'a, I>(len: usize, vectors: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a FieldVector>,
{
    Ok(Basis::from_vectors(len, vectors)?.dim())
}
