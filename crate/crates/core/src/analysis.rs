//! Closed-form security bounds and overhead counts.
//!
//! Probabilities are evaluated exactly over the rationals and converted to
//! `f64` at the end, so large binomials such as `C(29, 14)` never overflow or
//! lose precision along the way.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locating::binomial;

/// Parameters shared by the bounds and the overhead formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Field size.
    pub q: u64,
    /// Payload symbols per packet.
    pub n: u64,
    /// Generation size.
    pub m: u64,
    /// Average number of packets a node combines.
    pub w: u64,
    /// Parallel tags per MAC.
    pub l: u64,
    pub lambda: u64,
    pub delta: u64,
    pub theta: u64,
    /// Network level (longest source path), for the level-based baseline.
    pub ell: u64,
    /// Tags carried per packet in the cover-free baseline.
    pub cover_x: u64,
    /// Tags verified per node in the cover-free baseline.
    pub cover_b: u64,
    /// Collusion resistance of the cover-free baseline.
    pub c: u64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            q: 256,
            n: 1024,
            m: 32,
            w: 4,
            l: 1,
            lambda: 19,
            delta: 9,
            theta: 3,
            ell: 9,
            cover_x: 49,
            cover_b: 7,
            c: 2,
        }
    }
}

impl SchemeParams {
    pub fn with_locating(self, lambda: u64, delta: u64, theta: u64) -> Self {
        SchemeParams { lambda, delta, theta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("q", self.q),
            ("n", self.n),
            ("m", self.m),
            ("w", self.w),
            ("l", self.l),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("theta", self.theta),
            ("ell", self.ell),
            ("cover_x", self.cover_x),
            ("cover_b", self.cover_b),
            ("c", self.c),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::invalid(field, "must be positive"));
            }
        }
        if self.q < 2 {
            return Err(Error::invalid("q", "must be at least 2"));
        }
        if self.delta >= self.lambda {
            return Err(Error::invalid("delta", format!("must be below lambda = {}", self.lambda)));
        }
        if self.theta > self.lambda - self.delta {
            return Err(Error::invalid("theta", format!("must be at most lambda - delta = {}", self.lambda - self.delta)));
        }
        if self.lambda > 128 {
            return Err(Error::invalid("lambda", "must be at most 128"));
        }
        Ok(())
    }

    /// `⌈log2 q⌉`.
    pub fn symbol_bits(&self) -> u64 {
        (64 - (self.q - 1).leading_zeros()) as u64
    }
}

fn big(v: u128) -> BigInt {
    BigInt::from(v)
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(big(num), big(den))
}

fn q_pow(q: u64, e: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(q).pow(e as u32))
}

/// Bound on a lying child getting a fabricated report accepted:
/// `Σ_{i=θ}^{λ-δ} C(λ-δ, i) q^-i (1 - 1/q)^(λ-δ-i)`.
pub fn lemma4_exact(p: &SchemeParams) -> Result<BigRational> {
    p.validate()?;
    let k = (p.lambda - p.delta) as usize;
    let miss = BigRational::one() - ratio(1, p.q as u128);
    let mut sum = BigRational::zero();
    for i in p.theta as usize..=k {
        let term = ratio(binomial(k, i), 1) / q_pow(p.q, i as u64) * pow(&miss, (k - i) as u64);
        sum += term;
    }
    Ok(sum)
}

fn pow(base: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= base;
    }
    acc
}

pub fn lemma4_prob(p: &SchemeParams) -> Result<f64> {
    Ok(to_f64(&lemma4_exact(p)?))
}

/// Bound for a parent that computes exactly `x` of the `λ` tags correctly:
/// `Σ_{i=max(x-θ+1,0)}^{min(δ,x)} C(δ,i) C(λ-δ,x-i) / (C(λ,x) q^(δ-i))`.
pub fn lemma5_term(p: &SchemeParams, x: u64) -> Result<BigRational> {
    p.validate()?;
    if x > p.lambda {
        return Err(Error::invalid("x", format!("must be at most lambda = {}", p.lambda)));
    }
    let (lambda, delta, theta) = (p.lambda as usize, p.delta as usize, p.theta as usize);
    let x = x as usize;
    let lo = (x + 1).saturating_sub(theta);
    let hi = delta.min(x);
    let mut sum = BigRational::zero();
    for i in lo..=hi {
        if x - i > lambda - delta {
            continue;
        }
        sum += ratio(binomial(delta, i) * binomial(lambda - delta, x - i), 1) / q_pow(p.q, (delta - i) as u64);
    }
    Ok(sum / ratio(binomial(lambda, x), 1))
}

/// `max_{0 ≤ x ≤ δ+θ-1} p(x)` and the maximizing `x` (smallest on ties).
pub fn lemma5_exact(p: &SchemeParams) -> Result<(BigRational, u64)> {
    p.validate()?;
    let mut best = (BigRational::zero(), 0);
    for x in 0..p.delta + p.theta {
        let v = lemma5_term(p, x)?;
        if v > best.0 {
            best = (v, x);
        }
    }
    Ok(best)
}

pub fn lemma5_prob(p: &SchemeParams) -> Result<f64> {
    Ok(to_f64(&lemma5_exact(p)?.0))
}

/// Rational to float, exact up to `f64` rounding even for tiny values.
pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let Some(v) = r.to_f64() {
        if v != 0.0 && v.is_finite() {
            return v;
        }
    }
    // scale into range, convert, scale back
    let shift = r.denom().bits() as i64 - r.numer().bits() as i64;
    let scaled = r * BigRational::from_integer(BigInt::one() << shift.max(0) as usize);
    scaled.to_f64().unwrap_or(0.0) * 2f64.powi(-(shift.max(0) as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Hop-by-hop detection only.
    Ours,
    /// Level-based tag peeling baseline.
    Ripple,
    /// Cover-free family baseline.
    Broadcast,
    /// Locating tags only.
    OursLocating,
    /// Detection plus locating.
    OursFull,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Ours, Scheme::Ripple, Scheme::Broadcast, Scheme::OursLocating, Scheme::OursFull];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ours => "ours",
            Scheme::Ripple => "ripple",
            Scheme::Broadcast => "broadcast",
            Scheme::OursLocating => "ours_locating",
            Scheme::OursFull => "ours_full",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Tag bits carried per packet.
pub fn comm_overhead(scheme: Scheme, p: &SchemeParams) -> Result<u64> {
    p.validate()?;
    let b = p.symbol_bits();
    Ok(match scheme {
        Scheme::Ours => 3 * b,
        // ℓ/2 tags on average, rounded up to whole bits
        Scheme::Ripple => (p.ell * b).div_ceil(2),
        Scheme::Broadcast => p.cover_x * b,
        Scheme::OursLocating => p.lambda * b,
        Scheme::OursFull => (3 + p.lambda) * b,
    })
}

/// Field multiplications per packet per node.
pub fn comp_overhead(scheme: Scheme, p: &SchemeParams) -> Result<u64> {
    p.validate()?;
    let per_mac = p.n + 2 * p.m;
    Ok(match scheme {
        Scheme::Ours => 3 * per_mac + p.w,
        // w(ℓ-1)/2 + n + m + (ℓ-1)/2, rounded up
        Scheme::Ripple => (p.w * (p.ell - 1) + 2 * (p.n + p.m) + (p.ell - 1)).div_ceil(2),
        Scheme::Broadcast => p.w * p.cover_x + p.cover_b * per_mac,
        Scheme::OursLocating => (p.delta + p.lambda) * per_mac,
        Scheme::OursFull => (3 + p.delta + p.lambda) * per_mac + p.w,
    })
}

/// Locating tag bytes per packet as tabulated next to the bounds.
pub fn locating_space_bytes(p: &SchemeParams) -> u64 {
    ((p.lambda + 1) * p.symbol_bits()).div_ceil(8)
}

/// One row of the bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub q: u64,
    pub lambda: u64,
    pub delta: u64,
    pub theta: u64,
    pub pr_parent: f64,
    pub pr_parent_log2: f64,
    pub pr_child: f64,
    pub pr_child_log2: f64,
    pub worst_x: u64,
    pub space_bytes: u64,
}

pub fn bound_row(p: &SchemeParams) -> Result<BoundRow> {
    let (pp, x) = lemma5_exact(p)?;
    let pp = to_f64(&pp);
    let pc = lemma4_prob(p)?;
    Ok(BoundRow {
        q: p.q,
        lambda: p.lambda,
        delta: p.delta,
        theta: p.theta,
        pr_parent: pp,
        pr_parent_log2: pp.log2(),
        pr_child: pc,
        pr_child_log2: pc.log2(),
        worst_x: x,
        space_bytes: locating_space_bytes(p),
    })
}

/// The three `(λ, δ, θ)` rows tabulated at `q = 2^8`.
pub const STANDARD_LOCATING_ROWS: [(u64, u64, u64); 3] = [(19, 9, 3), (24, 12, 3), (29, 14, 4)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommRow {
    pub scheme: Scheme,
    pub formula: &'static str,
    pub bits: u64,
}

pub fn comm_rows(p: &SchemeParams) -> Result<Vec<CommRow>> {
    let formulas = [
        (Scheme::Ours, "3*ceil(log2 q)"),
        (Scheme::Ripple, "(ell/2)*ceil(log2 q)"),
        (Scheme::Broadcast, "|X|*ceil(log2 q)"),
        (Scheme::OursLocating, "lambda*ceil(log2 q)"),
        (Scheme::OursFull, "(3+lambda)*ceil(log2 q)"),
    ];
    formulas
        .into_iter()
        .map(|(scheme, formula)| Ok(CommRow { scheme, formula, bits: comm_overhead(scheme, p)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompRow {
    pub scheme: Scheme,
    pub formula: &'static str,
    pub multiplications: u64,
    /// Tabulated count at the default parameters, where one exists.
    pub listed: Option<u64>,
    /// Set when the formula and the tabulated count disagree.
    pub mismatch: bool,
}

/// Tabulated multiplication counts at the default parameters.
pub fn listed_multiplications(scheme: Scheme) -> Option<u64> {
    match scheme {
        Scheme::Ours => Some(3268),
        Scheme::Ripple => Some(1096),
        Scheme::Broadcast => Some(7812),
        Scheme::OursFull => Some(33732),
        Scheme::OursLocating => None,
    }
}

pub fn comp_rows(p: &SchemeParams) -> Result<Vec<CompRow>> {
    let formulas = [
        (Scheme::Ripple, "w*(ell-1)/2+(n+m+(ell-1)/2)"),
        (Scheme::Broadcast, "w*|X|+|B|*(n+2m)"),
        (Scheme::Ours, "3*(n+2m)+w"),
        (Scheme::OursLocating, "(delta+lambda)*(n+2m)"),
        (Scheme::OursFull, "(3+delta+lambda)*(n+2m)+w"),
    ];
    let at_defaults = *p == SchemeParams::default();
    formulas
        .into_iter()
        .map(|(scheme, formula)| {
            let multiplications = comp_overhead(scheme, p)?;
            let listed = if at_defaults { listed_multiplications(scheme) } else { None };
            let mismatch = listed.is_some_and(|v| v != multiplications);
            Ok(CompRow { scheme, formula, multiplications, listed, mismatch })
        })
        .collect()
}
