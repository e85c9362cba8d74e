//! Low-level pieces of the on-disk container: a line-oriented `key=value`
//! manifest plus raw little-endian payload files. Everything round-trips
//! bitwise; nothing here depends on host byte order.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &str = "S2FLv1";

/// Ordered key=value pairs. Order is part of the format so that a re-save
/// is byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, path: &Path, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(path, format!("missing manifest key `{key}`")))
    }

    pub fn require_parse<T: std::str::FromStr>(&self, path: &Path, key: &str) -> Result<T> {
        let raw = self.require(path, key)?;
        raw.parse().map_err(|_| {
            Error::format(path, format!("manifest key `{key}` has invalid value `{raw}`"))
        })
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            if k.contains(['\n', '=']) || v.contains('\n') {
                return Err(Error::format(
                    path,
                    format!("manifest entry `{k}` contains a newline or `=`"),
                ));
            }
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            // values may contain `=`; only the first one splits
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected key=value", i + 1))
            })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Manifest { entries })
    }

    /// Validates the magic entry, which must come first.
    pub fn check_magic(&self, path: &Path) -> Result<()> {
        match self.entries.first() {
            Some((k, v)) if k == "magic" && v == MAGIC => Ok(()),
            Some((k, v)) => Err(Error::format(
                path,
                format!("bad magic: expected `magic={MAGIC}`, found `{k}={v}`"),
            )),
            None => Err(Error::format(path, "empty manifest")),
        }
    }
}

/// Row-major little-endian f64 payload.
pub fn write_f64_matrix(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.len() * 8);
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            bytes.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a payload whose shape the caller knows from the manifest. `what`
/// names the payload in dimension errors (for example the modality).
pub fn read_f64_matrix(path: &Path, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(path, format!("{what}: declared shape overflows")))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "{what}: dimension mismatch, manifest declares {rows}x{cols} \
                 ({expected} bytes) but payload holds {} bytes",
                bytes.len()
            ),
        ));
    }
    let mut matrix = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for i in 0..rows {
        for j in 0..cols {
            let chunk: [u8; 8] = bytes[offset..offset + 8].try_into().unwrap();
            matrix[(i, j)] = f64::from_le_bytes(chunk);
            offset += 8;
        }
    }
    Ok(matrix)
}

pub fn write_u32_vec(path: &Path, values: &[u32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_u32_vec(path: &Path, len: usize, what: &str) -> Result<Vec<u32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != len * 4 {
        return Err(Error::format(
            path,
            format!(
                "{what}: expected {len} values ({} bytes), payload holds {} bytes",
                len * 4,
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
