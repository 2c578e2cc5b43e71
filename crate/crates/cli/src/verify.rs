//! Recomputes the tags of a test-vector file.

use serde::Serialize;
use spacemac::vectors::{self, VerifyReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MismatchRow {
    pub line: usize,
    pub expected: String,
    pub computed: String,
}

pub fn check(text: &str) -> spacemac::Result<VerifyReport> {
    vectors::verify_text(text)
}

pub fn mismatch_rows(report: &VerifyReport) -> Vec<MismatchRow> {
    report
        .mismatches
        .iter()
        .map(|m| MismatchRow { line: m.line, expected: m.expected.to_hex(), computed: m.computed.to_hex() })
        .collect()
}
