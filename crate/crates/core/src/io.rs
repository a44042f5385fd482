//! CSV sample files, JSON reports and run manifests.
//!
//! Sample files are headerless by default: one sample per line, comma
//! separated decimals. Values are written with Rust's shortest round-trip
//! formatting, so writing and reloading a sample reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::synth::{Origin, RawSampleSet};

/// Reads an `n x p` numeric CSV. With `header`, the first line is skipped.
/// With `center`, the per-column mean is subtracted.
pub fn load_csv_samples(path: &Path, center: bool, header: bool) -> Result<RawSampleSet> {
    let text = fs::read_to_string(path).map_err(|e| with_path(e, path))?;
    let raw = parse_csv_samples(&text, header)
        .map_err(|e| match e {
            Error::EmptyFile(_) => Error::EmptyFile(path.display().to_string()),
            other => other,
        })?;
    let raw = RawSampleSet::new(
        raw.rows().to_vec(),
        Origin::File {
            path: path.display().to_string(),
        },
    )?;
    Ok(if center { raw.centered() } else { raw })
}

/// Parses CSV text. Row and column numbers in errors are 1-based file positions.
pub fn parse_csv_samples(text: &str, header: bool) -> Result<RawSampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Ragged {
                row: line,
                expected,
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row: line,
                        column: j + 1,
                        message: format!("not a finite number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile("<input>".into()));
    }
    RawSampleSet::new(rows, Origin::Memory)
}

/// Renders rows as headerless CSV with round-trip-exact decimals.
pub fn format_csv_rows(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv_rows(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    write_text(path, &format_csv_rows(rows))
}

/// CSV with a header line.
pub fn write_csv_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| with_path(e, path))?;
    Ok(hex_digest(&bytes))
}

fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Provenance embedded in every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub input_digest: Option<String>,
    pub started_at_ms: u64,
    pub finished_at_ms: u64,
}

impl RunManifest {
    pub fn start(command: &str, parameters: serde_json::Value, seed: Option<u64>) -> Self {
        let now = now_ms();
        Self {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: None,
            started_at_ms: now,
            finished_at_ms: now,
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        self.input_digest = Some(file_digest(path)?);
        Ok(self)
    }

    pub fn finish(mut self) -> Self {
        self.finished_at_ms = now_ms();
        self
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// A report with its manifest attached under the `manifest` key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WithManifest<T> {
    #[serde(flatten)]
    pub body: T,
    pub manifest: RunManifest,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_centers() {
        let raw = parse_csv_samples("1,0\n0,1\n", false).unwrap();
        assert_eq!(raw.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = raw.centered();
        assert_eq!(c.rows(), &[vec![0.5, -0.5], vec![-0.5, 0.5]]);
    }

    #[test]
    fn parse_error_names_cell() {
        match parse_csv_samples("1,a\n", false) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("{other:?}"),
        }
        match parse_csv_samples("1,2\n3,4\n5,x\n", false) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_and_empty() {
        assert!(matches!(
            parse_csv_samples("1,2\n3\n", false),
            Err(Error::Ragged { row: 2, expected: 2, found: 1 })
        ));
        assert!(matches!(parse_csv_samples("", false), Err(Error::EmptyFile(_))));
        assert!(matches!(parse_csv_samples("a,b\n", true), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn header_is_skipped() {
        let raw = parse_csv_samples("x,y\n1.5,2\n", true).unwrap();
        assert_eq!(raw.rows(), &[vec![1.5, 2.0]]);
    }

    #[test]
    fn rendering_round_trips() {
        let rows = vec![vec![0.1 + 0.2, -1e-300, 1.0 / 3.0], vec![123456789.125, 5e-324, -0.0]];
        let back = parse_csv_samples(&format_csv_rows(&rows), false).unwrap();
        for (a, b) in rows.iter().flatten().zip(back.rows().iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
