//! Builds a bundle from plain CSV files: one table per modality (rows are
//! pixels, columns are channels) and a labels table with `train,test`
//! columns.

use std::path::Path;

use nalgebra::DMatrix;
use s2fl_core::ModalityBlock;

use crate::bundle::DatasetBundle;
use crate::csv;
use crate::error::{Error, Result};

pub fn import_csv(
    modality_paths: &[&Path],
    labels_path: &Path,
    grid: (usize, usize),
) -> Result<DatasetBundle> {
    let n_all = grid.0 * grid.1;
    if modality_paths.is_empty() {
        return Err(Error::Invalid("at least one modality CSV is required".into()));
    }

    let mut modalities = Vec::with_capacity(modality_paths.len());
    for (pos, path) in modality_paths.iter().enumerate() {
        let table = csv::read_table(path)?;
        if table.rows.len() != n_all {
            return Err(Error::format(
                *path,
                format!(
                    "expected {n_all} pixel rows for a {}x{} grid, found {}",
                    grid.0,
                    grid.1,
                    table.rows.len()
                ),
            ));
        }
        let channels = table.rows[0].len();
        // CSV rows are pixels; the in-memory layout is channels x pixels
        let data = DMatrix::from_fn(channels, n_all, |r, c| table.rows[c][r]);
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("modality_{}", pos + 1));
        modalities.push(ModalityBlock::new(pos + 1, name, data).map_err(Error::from)?);
    }

    let labels = csv::read_table(labels_path)?;
    if labels.rows.len() != n_all {
        return Err(Error::format(
            labels_path,
            format!("expected {n_all} label rows, found {}", labels.rows.len()),
        ));
    }
    let header_lines = usize::from(labels.header.is_some());
    let mut train = Vec::with_capacity(n_all);
    let mut test = Vec::with_capacity(n_all);
    for (i, row) in labels.rows.iter().enumerate() {
        let row_no = i + 1 + header_lines;
        if row.len() != 2 {
            return Err(Error::Parse {
                path: labels_path.into(),
                row: row_no,
                col: row.len().min(2) + 1,
                message: format!("expected `train,test` columns, found {} cells", row.len()),
            });
        }
        train.push(mask_value(labels_path, row_no, 1, row[0])?);
        test.push(mask_value(labels_path, row_no, 2, row[1])?);
    }

    DatasetBundle::new(modalities, train, test, vec![], grid)
}

fn mask_value(path: &Path, row: usize, col: usize, v: f64) -> Result<u32> {
    if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
        return Err(Error::Parse {
            path: path.into(),
            row,
            col,
            message: format!("mask entries must be nonnegative integers, found {v}"),
        });
    }
    Ok(v as u32)
}
