//! NDJSON record series and binary velocity snapshots.
//!
//! Snapshot layout (little endian): `b"STNS"`, `u32` version, `u32` grid
//! modes, `f64` box length, `f64` time, `u32` component count (3), then
//! `3·N³` `f64` values, component-major with `x` fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use stns_core::diagnostics::EnergyRecord;
use stns_core::{GridSpec, RealVectorField};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"STNS";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}, line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {reason} at byte offset {offset}")]
    Corrupt {
        path: PathBuf,
        offset: usize,
        reason: String,
    },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one JSON object per line.
pub fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path).map_err(file_err(path))?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        writeln!(w, "{line}").map_err(file_err(path))?;
    }
    w.flush().map_err(file_err(path))
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let r = BufReader::new(File::open(path).map_err(file_err(path))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(file_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[EnergyRecord]) -> Result<(), IoError> {
    write_ndjson(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<EnergyRecord>, IoError> {
    read_ndjson(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: RealVectorField,
}

pub fn encode_snapshot(t: f64, field: &RealVectorField) -> Vec<u8> {
    let g = field.grid();
    let mut buf = Vec::with_capacity(HEADER_LEN + 24 * g.points());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.modes() as u32).to_le_bytes());
    buf.extend_from_slice(&g.length().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&3u32.to_le_bytes());
    for c in 0..3 {
        for v in field.component(c) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn decode_snapshot(path: &Path, bytes: &[u8]) -> Result<Snapshot, IoError> {
    let corrupt = |offset: usize, reason: String| IoError::Corrupt {
        path: path.to_path_buf(),
        offset,
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(
            bytes.len(),
            format!("header truncated, need {HEADER_LEN} bytes"),
        ));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(corrupt(0, "bad magic".into()));
    }
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(corrupt(4, format!("unsupported version {version}")));
    }
    let modes = u32_at(8) as usize;
    let length = f64_at(12);
    let t = f64_at(20);
    let comps = u32_at(28);
    if comps != 3 {
        return Err(corrupt(28, format!("component count {comps}, expected 3")));
    }
    let grid = GridSpec::new(modes, length).map_err(|e| corrupt(8, e.to_string()))?;
    let want = HEADER_LEN + 24 * grid.points();
    if bytes.len() != want {
        return Err(corrupt(
            bytes.len().min(want),
            format!(
                "payload length {} bytes, expected {}",
                bytes.len() - HEADER_LEN,
                want - HEADER_LEN
            ),
        ));
    }
    let n = grid.points();
    let comp = |c: usize| -> Vec<f64> { (0..n).map(|i| f64_at(HEADER_LEN + 8 * (c * n + i))).collect() };
    let field = RealVectorField::from_components(grid, [comp(0), comp(1), comp(2)])
        .map_err(|e| corrupt(HEADER_LEN, e.to_string()))?;
    Ok(Snapshot { t, field })
}

pub fn write_snapshot(path: &Path, t: f64, field: &RealVectorField) -> Result<(), IoError> {
    std::fs::write(path, encode_snapshot(t, field)).map_err(file_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(file_err(path))?;
    decode_snapshot(path, &bytes)
}
