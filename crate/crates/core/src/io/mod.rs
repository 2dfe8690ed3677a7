//! Reading and writing libraries, manifests, checkpoints, candidate caches
//! and reports.
//!
//! Tabular files start with `# key=value` lines recording how they were
//! made, followed by a header row and the data.

pub mod candidates;
pub mod checkpoint;
pub mod config;
pub mod manifest;
pub mod msp;
pub mod reports;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered `key=value` provenance lines.
pub type Meta = Vec<(String, String)>;

pub(crate) fn write_meta(out: &mut String, meta: &[(String, String)]) {
    for (k, v) in meta {
        out.push_str("# ");
        out.push_str(k);
        out.push('=');
        out.push_str(&v.replace('\n', " "));
        out.push('\n');
    }
}

/// Splits leading `#` lines off `text`. Lines without `=` are kept with an
/// empty value.
pub(crate) fn split_meta(text: &str) -> (Meta, &str) {
    let mut meta = Vec::new();
    let mut rest = text;
    while rest.starts_with('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        let body = line.trim_start_matches('#').trim();
        let (k, v) = body.split_once('=').unwrap_or((body, ""));
        meta.push((k.trim().to_string(), v.trim().to_string()));
        rest = tail;
    }
    (meta, rest)
}

pub(crate) fn meta_value<'a>(meta: &'a [(String, String)], key: &str) -> Option<&'a str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub(crate) fn tsv_reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .from_reader(body.as_bytes())
}

pub(crate) fn csv_reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().from_reader(body.as_bytes())
}

pub(crate) fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str], what: &str) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Data(format!(
            "{what} header is `{}`, expected `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
