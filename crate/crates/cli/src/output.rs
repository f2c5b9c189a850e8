//! Output files. Every file is written to a temporary sibling and renamed
//! into place, so a reader sees either the complete file or none.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Builds a CSV in memory from a header and rows of preformatted fields.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(internal)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(internal)?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn full(v: f64) -> String {
    format!("{v}")
}

pub fn two_dp(v: f64) -> String {
    format!("{v:.2}")
}
