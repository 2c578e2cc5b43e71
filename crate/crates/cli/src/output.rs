//! CSV and JSONL writers shared by the subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

/// Bumped whenever a JSONL record changes shape.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a T,
}

/// Opens `path`, or stdout when there is none.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Writes one line per record; JSONL lines carry `schema_version`.
pub fn write_records<T: Serialize>(out: &mut dyn Write, format: Format, records: &[T]) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut *out, &Versioned { schema_version: SCHEMA_VERSION, record: r })?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Renders records to a string, for tests and for callers that post-process.
pub fn render<T: Serialize>(format: Format, records: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, format, records)?;
    Ok(String::from_utf8(buf)?)
}
