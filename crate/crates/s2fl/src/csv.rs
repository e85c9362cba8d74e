//! Minimal CSV dialect: comma separators, `.` decimal point, no quoting,
//! LF line endings, at most one header row which is auto-detected (a first
//! row with any cell that does not parse as a number).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, idx: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[idx])
    }
}

fn parse_error(path: &Path, row: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        row,
        col,
        message: message.into(),
    }
}

/// Reads a rectangular numeric table. Row and column numbers in errors are
/// 1-based physical positions (the header line counts as row 1).
pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;

    for (line_idx, line) in text.lines().enumerate() {
        let row_no = line_idx + 1;
        if line.is_empty() {
            return Err(parse_error(path, row_no, 1, "empty line inside table"));
        }
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if cells.len() != w => {
                return Err(parse_error(
                    path,
                    row_no,
                    cells.len().min(w) + 1,
                    format!("ragged row: expected {w} cells, found {}", cells.len()),
                ));
            }
            Some(_) => {}
        }

        let mut parsed = Vec::with_capacity(cells.len());
        let mut failed_at = None;
        for (col_idx, cell) in cells.iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) => parsed.push(v),
                Err(_) => {
                    failed_at = Some(col_idx + 1);
                    break;
                }
            }
        }
        match failed_at {
            None => rows.push(parsed),
            Some(col) if line_idx == 0 && header.is_none() => {
                header = Some(cells.iter().map(|c| c.trim().to_string()).collect());
                let _ = col;
            }
            Some(col) => {
                return Err(parse_error(
                    path,
                    row_no,
                    col,
                    format!("cannot parse `{}` as a number", cells[col - 1].trim()),
                ));
            }
        }
    }

    if rows.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Ok(Table { header, rows })
}

/// Writes a table with `{}`-formatted numbers (shortest exact decimal), so
/// repeated runs produce byte-identical files.
pub fn write_table(path: &Path, header: Option<&[&str]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    if let Some(cols) = header {
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format_cell(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// NaN is spelled lowercase so the file re-parses with this module.
pub fn format_cell(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Reads a labels file of `index,label` rows (header optional), returning
/// pairs in file order.
pub fn read_labels(path: &Path) -> Result<Vec<(usize, usize)>> {
    let table = read_table(path)?;
    let header_lines = usize::from(table.header.is_some());
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let row_no = i + 1 + header_lines;
        if row.len() != 2 {
            return Err(parse_error(
                path,
                row_no,
                row.len().min(2) + 1,
                format!("expected `index,label`, found {} cells", row.len()),
            ));
        }
        let index = as_integer(path, row_no, 1, row[0])?;
        let label = as_integer(path, row_no, 2, row[1])?;
        out.push((index, label));
    }
    Ok(out)
}

pub fn write_labels(path: &Path, pairs: &[(usize, usize)]) -> Result<()> {
    let rows: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(i, l)| vec![i as f64, l as f64])
        .collect();
    write_table(path, Some(&["index", "label"]), &rows)
}

fn as_integer(path: &Path, row: usize, col: usize, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
        return Err(parse_error(
            path,
            row,
            col,
            format!("expected a nonnegative integer, found {v}"),
        ));
    }
    Ok(v as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    #[test]
    fn header_is_auto_detected() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.csv");
        write(&with, "a,b\n1,2\n3.5,4\n");
        let t = read_table(&with).unwrap();
        assert_eq!(t.header, Some(vec!["a".into(), "b".into()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.5, 4.0]]);

        let without = dir.path().join("without.csv");
        write(&without, "1,2\n3.5,4\n");
        let t = read_table(&without).unwrap();
        assert_eq!(t.header, None);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn bad_cell_is_cited_by_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        write(&path, "1,2\nabc,4\n");
        let err = read_table(&path).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!((row, col), (2, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        write(&path, "1,2\n3,4,5\n");
        let err = read_table(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err:?}");
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![vec![1.0, -2.25], vec![1e-9, 3.0]];
        write_table(&path, Some(&["x", "y"]), &rows).unwrap();
        let t = read_table(&path).unwrap();
        assert_eq!(t.rows, rows);

        let bytes = fs::read(&path).unwrap();
        write_table(&path, Some(&["x", "y"]), &rows).unwrap();
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn labels_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        write_labels(&path, &[(0, 1), (7, 2)]).unwrap();
        assert_eq!(read_labels(&path).unwrap(), [(0, 1), (7, 2)]);

        write(&path, "index,label\n1.5,2\n");
        assert!(read_labels(&path).is_err());
    }
}
