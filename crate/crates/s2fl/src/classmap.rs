//! Classification map output: binary PGM (P5) with pixel value = class id,
//! 0 = unlabeled, plus a text legend sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub fn legend_path(map_path: &Path) -> PathBuf {
    let mut s = map_path.as_os_str().to_os_string();
    s.push(".legend.txt");
    PathBuf::from(s)
}

pub fn write_class_map(
    path: &Path,
    predictions: &[u32],
    grid: (usize, usize),
    class_names: &[String],
) -> Result<()> {
    let (h, w) = grid;
    if predictions.len() != h * w {
        return Err(Error::Invalid(format!(
            "map needs {} predictions for a {h}x{w} grid, got {}",
            h * w,
            predictions.len()
        )));
    }
    if let Some(&big) = predictions.iter().find(|&&p| p > 255) {
        return Err(Error::format(
            path,
            format!("unsupported format: class id {big} exceeds the 8-bit PGM range (255)"),
        ));
    }
    if class_names.len() > 255 {
        return Err(Error::format(
            path,
            format!(
                "unsupported format: {} classes exceed the 8-bit PGM range (255)",
                class_names.len()
            ),
        ));
    }

    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(predictions.iter().map(|&p| p as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let mut legend = String::from("0=unlabeled\n");
    for (i, name) in class_names.iter().enumerate() {
        legend.push_str(&format!("{}={name}\n", i + 1));
    }
    let lp = legend_path(path);
    fs::write(&lp, legend).map_err(|e| Error::io(&lp, e))
}
