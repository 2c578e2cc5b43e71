//! Security bounds and overhead tables.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use clap::ValueEnum;
use serde::Serialize;
use spacemac::analysis::{self, SchemeParams, STANDARD_LOCATING_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    All,
    /// Attack bounds and tag storage per (λ, δ, θ).
    Bounds,
    /// Tag bits per packet.
    Comm,
    /// Multiplications per packet per node.
    Comp,
}

/// A `λ,δ,θ` triple from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocatingRow(pub u64, pub u64, pub u64);

impl FromStr for LocatingRow {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [l, d, t] = parts.as_slice() else {
            return Err(format!("expected lambda,delta,theta, got `{s}`"));
        };
        let num = |name: &str, v: &str| v.parse::<u64>().map_err(|_| format!("bad {name} `{v}`"));
        Ok(LocatingRow(num("lambda", l)?, num("delta", d)?, num("theta", t)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Float(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
        }
    }
}

/// One value of one table, in long form so all tables share a header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub table: &'static str,
    pub row: String,
    pub quantity: &'static str,
    pub value: Value,
    pub note: String,
    /// `mismatch` when a formula disagrees with the tabulated count.
    pub flag: &'static str,
}

impl Record {
    fn new(table: &'static str, row: impl Into<String>, quantity: &'static str, value: Value) -> Self {
        Record { table, row: row.into(), quantity, value, note: String::new(), flag: "" }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

pub fn bounds(base: &SchemeParams, extra: &[LocatingRow]) -> Result<Vec<Record>> {
    let mut rows: Vec<LocatingRow> = STANDARD_LOCATING_ROWS.iter().map(|&(l, d, t)| LocatingRow(l, d, t)).collect();
    rows.extend(extra.iter().filter(|r| !rows.contains(r)).copied().collect::<Vec<_>>());
    let mut out = Vec::new();
    for LocatingRow(l, d, t) in rows {
        let p = base.with_locating(l, d, t);
        let b = match analysis::bound_row(&p) {
            Ok(b) => b,
            Err(e) => bail!("row {l},{d},{t}: {e}"),
        };
        let label = format!("{l}/{d}/{t}");
        out.push(Record::new("bounds", &label, "pr_parent", Value::Float(b.pr_parent)).note(format!("worst x = {}", b.worst_x)));
        out.push(Record::new("bounds", &label, "pr_parent_log2", Value::Float(b.pr_parent_log2)));
        out.push(Record::new("bounds", &label, "pr_child", Value::Float(b.pr_child)));
        out.push(Record::new("bounds", &label, "pr_child_log2", Value::Float(b.pr_child_log2)));
        out.push(Record::new("bounds", &label, "space_bytes", Value::Int(b.space_bytes)));
    }
    Ok(out)
}

pub fn comm(p: &SchemeParams) -> Result<Vec<Record>> {
    Ok(analysis::comm_rows(p)?
        .into_iter()
        .map(|r| Record::new("comm", r.scheme.name(), "bits", Value::Int(r.bits)).note(r.formula))
        .collect())
}

pub fn comp(p: &SchemeParams) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for r in analysis::comp_rows(p)? {
        let mut rec = Record::new("comp", r.scheme.name(), "multiplications", Value::Int(r.multiplications)).note(r.formula);
        if let Some(listed) = r.listed {
            if r.mismatch {
                rec.flag = "mismatch";
                rec.note = format!("{}; tabulated value is {listed}", r.formula);
            }
            out.push(rec);
            out.push(Record::new("comp", r.scheme.name(), "listed_multiplications", Value::Int(listed)));
        } else {
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn run(table: Table, p: &SchemeParams, extra: &[LocatingRow]) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    if matches!(table, Table::All | Table::Bounds) {
        out.extend(bounds(p, extra)?);
    }
    if matches!(table, Table::All | Table::Comm) {
        out.extend(comm(p)?);
    }
    if matches!(table, Table::All | Table::Comp) {
        out.extend(comp(p)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(rs: &'a [Record], table: &str, row: &str, q: &str) -> &'a Record {
        rs.iter().find(|r| r.table == table && r.row == row && r.quantity == q).unwrap()
    }

    #[test]
    fn headline_values() {
        let rs = run(Table::All, &SchemeParams::default(), &[]).unwrap();
        assert_eq!(find(&rs, "comm", "ours", "bits").value, Value::Int(24));
        assert_eq!(find(&rs, "comp", "ours_full", "multiplications").value, Value::Int(33732));
        assert_eq!(find(&rs, "comp", "ours", "multiplications").value, Value::Int(3268));
        assert_eq!(find(&rs, "comp", "broadcast", "multiplications").value, Value::Int(7812));
        let ripple = find(&rs, "comp", "ripple", "multiplications");
        assert_eq!((ripple.value, ripple.flag), (Value::Int(1076), "mismatch"));
        assert_eq!(find(&rs, "comp", "ripple", "listed_multiplications").value, Value::Int(1096));
        assert_eq!(find(&rs, "bounds", "19/9/3", "space_bytes").value, Value::Int(20));
        let Value::Float(child) = find(&rs, "bounds", "19/9/3", "pr_child_log2").value else { panic!() };
        assert!((child + 17.12).abs() < 0.01, "{child}");
    }

    #[test]
    fn extra_rows_and_errors() {
        let rs = bounds(&SchemeParams::default(), &["5,2,1".parse().unwrap(), "19,9,3".parse().unwrap()]).unwrap();
        assert_eq!(rs.len(), 4 * 5);
        assert!(rs.iter().any(|r| r.row == "5/2/1"));
        let err = bounds(&SchemeParams::default(), &[LocatingRow(5, 5, 1)]).unwrap_err().to_string();
        assert!(err.contains("delta"), "{err}");
        assert!("1,2".parse::<LocatingRow>().is_err());
        assert!("a,2,3".parse::<LocatingRow>().is_err());
    }
}
