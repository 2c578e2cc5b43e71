//! Known-answer test vectors for the MAC.
//!
//! Line-oriented text. Blank lines and lines starting with `#` are ignored.
//! `m = <int>` sets the generation size for the records that follow. Each
//! record is `key_hex, id_hex, y_hex, tag_hex`: a 32-byte key (`k1 ∥ k2`),
//! an 8-byte big-endian space id, the `n + m` symbol vector and the `l` tag
//! symbols.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::gf::FieldVector;
use crate::mac::{self, Dimensions, MacKey, SpaceId, Tag};

/// The vector file shipped with the crate.
pub const SHIPPED: &str = include_str!("../data/spacemac_vectors.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub line: usize,
    pub key: MacKey,
    pub id: SpaceId,
    pub dims: Dimensions,
    pub y: FieldVector,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub line: usize,
    pub expected: Tag,
    pub computed: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn decode_hex(line: usize, what: &str, s: &str) -> Result<Vec<u8>> {
    hex::decode(s).map_err(|e| parse_err(line, format!("bad {what} hex: {e}")))
}

pub fn parse(text: &str) -> Result<Vec<TestVector>> {
    let mut m: Option<usize> = None;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(rest) = s.strip_prefix("m") {
            if let Some(v) = rest.trim_start().strip_prefix('=') {
                let v: usize = v.trim().parse().map_err(|_| parse_err(line, format!("bad generation size `{}`", v.trim())))?;
                if v == 0 {
                    return Err(parse_err(line, "generation size must be positive"));
                }
                m = Some(v);
                continue;
            }
        }
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        let [key, id, y, tag] = fields.as_slice() else {
            return Err(parse_err(line, format!("expected 4 comma-separated fields, got {}", fields.len())));
        };
        let m = m.ok_or_else(|| parse_err(line, "record before any `m = <int>` line"))?;
        let key = MacKey::from_bytes(&decode_hex(line, "key", key)?).map_err(|e| parse_err(line, e.to_string()))?;
        let id_bytes: [u8; 8] = decode_hex(line, "id", id)?
            .try_into()
            .map_err(|v: Vec<u8>| parse_err(line, format!("id must be 8 bytes, got {}", v.len())))?;
        let y = FieldVector::from_bytes(decode_hex(line, "vector", y)?);
        let tag = Tag::from_bytes(decode_hex(line, "tag", tag)?);
        if y.len() <= m {
            return Err(parse_err(line, format!("vector of {} symbols cannot hold {m} coefficients and a payload", y.len())));
        }
        let dims = Dimensions::new(y.len() - m, m, tag.len()).map_err(|e| parse_err(line, e.to_string()))?;
        out.push(TestVector { line, key, id: SpaceId(u64::from_be_bytes(id_bytes)), dims, y, tag });
    }
    Ok(out)
}

/// Recomputes every tag.
pub fn verify_all(vectors: &[TestVector]) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for v in vectors {
        let computed = mac::mac(&v.key, v.id, v.dims, &v.y)?;
        report.checked += 1;
        if computed != v.tag {
            report.mismatches.push(Mismatch { line: v.line, expected: v.tag.clone(), computed });
        }
    }
    Ok(report)
}

pub fn verify_text(text: &str) -> Result<VerifyReport> {
    verify_all(&parse(text)?)
}

/// One record line for `key`, `id`, `y`, tagged with dims `dims`.
pub fn format_record(key: &MacKey, id: SpaceId, dims: Dimensions, y: &FieldVector) -> Result<String> {
    let tag = mac::mac(key, id, dims, y)?;
    let mut s = String::new();
    write!(s, "{}, {}, {}, {}", hex::encode(key.to_bytes()), hex::encode(id.0.to_be_bytes()), y.to_hex(), tag.to_hex())
        .expect("writing to a String");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = Dimensions::new(6, 2, 2).unwrap();
        let mut s = String::from("# sample\nm = 2\n\n");
        for i in 0..3 {
            let k = MacKey::random(&mut rng);
            let y = FieldVector::random(8, &mut rng);
            s.push_str(&format_record(&k, SpaceId(i), dims, &y).unwrap());
            s.push('\n');
        }
        s
    }

    #[test]
    fn round_trip() {
        let vs = parse(&sample()).unwrap();
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[0].line, 4);
        assert_eq!(vs[0].dims, Dimensions::new(6, 2, 2).unwrap());
        let r = verify_all(&vs).unwrap();
        assert_eq!(r.checked, 3);
        assert!(r.passed());
    }

    #[test]
    fn one_corrupted_digit_is_one_failure() {
        let text = sample();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let last = lines[4].pop().unwrap();
        lines[4].push(if last == '0' { '1' } else { '0' });
        let r = verify_text(&lines.join("\n")).unwrap();
        assert_eq!(r.checked, 3);
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].line, 5);
    }

    #[test]
    fn empty_and_malformed() {
        assert_eq!(verify_text("").unwrap(), VerifyReport::default());
        assert!(matches!(parse("00, 00, 00, 00"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("m = 2\n\nzz, 00, 00, 00"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("m = x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("m = 2\n00,00"), Err(Error::Parse { line: 2, .. })));
    }
}
