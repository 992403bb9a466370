//! Small deterministic CSV helpers shared by the experiment writers.

use std::path::Path;

use crate::{Error, Result};

/// Shortest decimal representation that round-trips the exact value.
pub fn fmt_f64(v: f64) -> String {
    v.to_string()
}

/// Header plus one comma-joined line per row, newline-terminated. Empty
/// rows produce a header-only file.
pub fn render_csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::with_capacity(header.len() + 1 + rows.len() * 16);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, render_csv(header, rows)).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_csv`]: returns the header and the field
/// rows. Used by tests and the round-trip contract; no quoting, since no
/// writer here emits commas inside fields.
pub fn read_csv(path: &Path) -> Result<(String, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "empty file, expected a header".into(),
        })?
        .to_string();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}
