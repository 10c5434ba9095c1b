use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// Bumped whenever any report's column set changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Writes `rows` under a `# <table> v<N>` comment line and a header row.
pub fn write_csv<T: Serialize>(path: &Path, table: &str, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        super::ensure_dir(parent)?;
    }
    let mut buf = format!("# {table} v{CSV_SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)
                .map_err(|e| Error::corrupt(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a table written by [`write_csv`], checking its schema line.
pub fn read_csv<T: DeserializeOwned>(path: &Path, table: &str) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let expected = format!("# {table} v{CSV_SCHEMA_VERSION}");
    if text.lines().next() != Some(expected.as_str()) {
        return Err(Error::corrupt(
            path,
            format!("expected schema line {expected:?}"),
        ));
    }
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::corrupt(path, e.to_string()))
}
