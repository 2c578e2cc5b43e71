//! Generation-based random linear network coding.
//!
//! Every source payload is augmented with a unit coefficient vector, so any
//! honest packet carries its global coding coefficients in its last `m`
//! symbols.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{axpy, Basis, FieldVector, Gf256};
use crate::mac::SpaceId;

/// A packet of length `n + m`; the last `m` symbols are coding coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodedPacket {
    data: FieldVector,
    m: usize,
}

impl CodedPacket {
    pub fn new(data: FieldVector, m: usize) -> Result<Self> {
        if m == 0 || m > data.len() {
            return Err(Error::invalid("m", format!("{m} coefficients do not fit in {} symbols", data.len())));
        }
        Ok(CodedPacket { data, m })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        CodedPacket { data: FieldVector::zeros(n + m), m }
    }

    pub fn data(&self) -> &FieldVector {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut FieldVector {
        &mut self.data
    }

    pub fn into_data(self) -> FieldVector {
        self.data
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.data.len() - self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn payload(&self) -> &[u8] {
        &self.data.as_bytes()[..self.n()]
    }

    pub fn coefficients(&self) -> &[u8] {
        &self.data.as_bytes()[self.n()..]
    }
}

/// `m` source payloads with their augmented packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    id: SpaceId,
    payloads: Vec<FieldVector>,
    packets: Vec<CodedPacket>,
}

/// Builds a generation: packet `i` is `payload_i ∥ e_i`.
pub fn augment(payloads: Vec<FieldVector>, id: SpaceId) -> Result<Generation> {
    let m = payloads.len();
    let first = payloads.first().ok_or(Error::Empty("a generation needs at least one payload"))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::invalid("n", "payloads must be nonempty"));
    }
    let mut packets = Vec::with_capacity(m);
    for (i, p) in payloads.iter().enumerate() {
        Error::check_len(n, p.len())?;
        packets.push(CodedPacket { data: p.concat(&FieldVector::unit(m, i)), m });
    }
    Ok(Generation { id, payloads, packets })
}

impl Generation {
    pub fn random<R: Rng + ?Sized>(id: SpaceId, n: usize, m: usize, rng: &mut R) -> Result<Generation> {
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        augment((0..m).map(|_| FieldVector::random(n, rng)).collect(), id)
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.payloads[0].len()
    }

    pub fn m(&self) -> usize {
        self.payloads.len()
    }

    pub fn payloads(&self) -> &[FieldVector] {
        &self.payloads
    }

    pub fn packets(&self) -> &[CodedPacket] {
        &self.packets
    }

    pub fn source_basis(&self) -> Basis {
        Basis::from_vectors(self.n() + self.m(), self.packets.iter().map(|p| &p.data)).expect("consistent lengths")
    }
}

/// `Σ coeffs[i] · buffer[i]`.
pub fn recode<'a, I>(buffer: I, coeffs: &[Gf256]) -> Result<CodedPacket>
where
    I: IntoIterator<Item = &'a CodedPacket>,
{
    let mut it = buffer.into_iter().peekable();
    let first = it.peek().ok_or(Error::Empty("recode needs at least one packet"))?;
    let (len, m) = (first.len(), first.m);
    let mut out = FieldVector::zeros(len);
    let mut count = 0;
    for (i, p) in it.enumerate() {
        Error::check_len(len, p.len())?;
        if p.m != m {
            return Err(Error::LengthMismatch { expected: m, actual: p.m });
        }
        let c = *coeffs.get(i).ok_or(Error::LengthMismatch { expected: i + 1, actual: coeffs.len() })?;
        axpy(out.as_bytes_mut(), c, p.data.as_bytes());
        count += 1;
    }
    Error::check_len(count, coeffs.len())?;
    Ok(CodedPacket { data: out, m })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded(Vec<FieldVector>),
    /// Coefficient rank reached so far.
    InsufficientRank(usize),
}

/// Gaussian elimination on the received packets, pivoting only inside the
/// coefficient columns. A packet whose coefficients are already spanned but
/// whose payload is not is an inconsistency.
pub fn decode(packets: &[CodedPacket]) -> Result<DecodeOutcome> {
    let Some(first) = packets.first() else {
        return Ok(DecodeOutcome::InsufficientRank(0));
    };
    let (len, m) = (first.len(), first.m);
    let n = len - m;
    // rows[k] has its pivot at coefficient column pivots[k]
    let mut rows: Vec<FieldVector> = Vec::with_capacity(m);
    let mut pivots: Vec<usize> = Vec::with_capacity(m);
    for p in packets {
        Error::check_len(len, p.len())?;
        if p.m != m {
            return Err(Error::LengthMismatch { expected: m, actual: p.m });
        }
        let mut w = p.data.clone();
        for (row, &pc) in rows.iter().zip(&pivots) {
            let c = w.get(n + pc);
            if !c.is_zero() {
                axpy(w.as_bytes_mut(), c, row.as_bytes());
            }
        }
        match w.as_bytes()[n..].iter().position(|&b| b != 0) {
            Some(pc) => {
                let inv = w.get(n + pc).inv()?;
                w.scale(inv);
                for row in rows.iter_mut() {
                    let c = row.get(n + pc);
                    if !c.is_zero() {
                        axpy(row.as_bytes_mut(), c, w.as_bytes());
                    }
                }
                rows.push(w);
                pivots.push(pc);
            }
            None => {
                if !w.is_zero() {
                    return Err(Error::Inconsistent);
                }
            }
        }
    }
    if rows.len() < m {
        return Ok(DecodeOutcome::InsufficientRank(rows.len()));
    }
    let mut out = vec![FieldVector::zeros(0); m];
    for (row, pc) in rows.into_iter().zip(pivots) {
        out[pc] = row.slice(0..n);
    }
    Ok(DecodeOutcome::Decoded(out))
}

/// Whether `p` equals the combination of source packets named by its own
/// coefficients. One pass of `m · n` multiplications.
pub fn in_source_space(g: &Generation, p: &CodedPacket) -> bool {
    if p.len() != g.n() + g.m() || p.m != g.m() {
        return false;
    }
    let mut acc = vec![0u8; g.n()];
    for (c, src) in p.coefficients().iter().zip(&g.payloads) {
        axpy(&mut acc, Gf256(*c), src.as_bytes());
    }
    acc.as_slice() == p.payload()
}

/// A uniformly random combination of `packets` together with the
/// coefficients used.
pub fn sample_space<R: Rng + ?Sized>(packets: &[CodedPacket], rng: &mut R) -> Result<(CodedPacket, Vec<Gf256>)> {
    if packets.is_empty() {
        return Err(Error::Empty("cannot sample from an empty set of packets"));
    }
    let alphas: Vec<Gf256> = (0..packets.len()).map(|_| Gf256::random(rng)).collect();
    Ok((recode(packets, &alphas)?, alphas))
}
