//! Deterministic report assembly and serialization.

use crate::error::{FinslerError, Result};
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

pub const REPORT_VERSION: &str = "1";

/// The conventions document the numerical results depend on; its hash is
/// embedded in every report so results are only compared across runs that
/// used identical conventions.
const CONVENTIONS: &str = include_str!("../../../docs/conventions.md");

/// FNV-1a 64-bit hash, hex-encoded.
pub fn conventions_hash() -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in CONVENTIONS.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{:016x}", h)
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub conventions: String,
    pub config: Value,
    pub records: Value,
    pub summary: Value,
    pub passed: bool,
}

impl Report {
    pub fn new(
        command: &str,
        config: Value,
        records: Value,
        summary: Value,
        passed: bool,
    ) -> Report {
        Report {
            command: command.to_string(),
            version: REPORT_VERSION.to_string(),
            conventions: conventions_hash(),
            config,
            records,
            summary,
            passed,
        }
    }

    /// Serialized form; serde_json orders map keys deterministically and
    /// float formatting is shortest-roundtrip, so equal reports are
    /// byte-identical.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| FinslerError::Config(format!("cannot write {}: {}", path.display(), e)))
    }
}

/// Writes CSV rows (already formatted cells) with a header, deterministic.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>], footer: &[String]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    for line in footer {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| FinslerError::Config(format!("cannot write {}: {}", path.display(), e)))
}

/// Canonical float cell formatting for CSV output (shortest roundtrip).
pub fn fmt_f64(v: f64) -> String {
    let mut s = format!("{}", v);
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}
