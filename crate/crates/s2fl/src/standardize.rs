//! Per-band standardization. Statistics come from training-mask pixels
//! only and are applied to the whole grid, so the test set never leaks
//! into the fit.

use nalgebra::DMatrix;

use crate::bundle::DatasetBundle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizeMode {
    None,
    #[default]
    PerBandZscore,
}

impl StandardizeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StandardizeMode::None),
            "zscore" => Ok(StandardizeMode::PerBandZscore),
            other => Err(Error::Invalid(format!(
                "unknown standardize mode `{other}` (expected none or zscore)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StandardizeMode::None => "none",
            StandardizeMode::PerBandZscore => "zscore",
        }
    }
}

/// Fitted per-band statistics for one modality. A band whose training
/// deviation is below 1e-12 is only centered; its `centered_only` flag is
/// set and its scale stored as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub centered_only: Vec<bool>,
}

impl BandStats {
    /// Packs into a 3 x d matrix (mean, scale, flags) for persistence.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.mean.len();
        DMatrix::from_fn(3, d, |r, c| match r {
            0 => self.mean[c],
            1 => self.scale[c],
            _ => f64::from(u8::from(self.centered_only[c])),
        })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 3 {
            return Err(Error::Invalid(format!(
                "band statistics need 3 rows, found {}",
                m.nrows()
            )));
        }
        Ok(BandStats {
            mean: m.row(0).iter().copied().collect(),
            scale: m.row(1).iter().copied().collect(),
            centered_only: m.row(2).iter().map(|&v| v != 0.0).collect(),
        })
    }
}

/// Fits per-band moments over training-mask pixels.
pub fn fit_stats(bundle: &DatasetBundle) -> Result<Vec<BandStats>> {
    let train: Vec<usize> = (0..bundle.pixel_count())
        .filter(|&i| bundle.train_mask()[i] != 0)
        .collect();
    if train.is_empty() {
        return Err(Error::Invalid(
            "cannot standardize: the training mask is empty".into(),
        ));
    }
    let n = train.len() as f64;

    let mut all = Vec::with_capacity(bundle.modalities().len());
    for block in bundle.modalities() {
        let data = block.data();
        let d = block.channels();
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        let mut centered_only = vec![false; d];
        for band in 0..d {
            let mut sum = 0.0;
            for &i in &train {
                sum += data[(band, i)];
            }
            let m = sum / n;
            let mut var = 0.0;
            for &i in &train {
                let dev = data[(band, i)] - m;
                var += dev * dev;
            }
            let sd = (var / n).sqrt();
            mean[band] = m;
            if sd < 1e-12 {
                scale[band] = 1.0;
                centered_only[band] = true;
            } else {
                scale[band] = sd;
            }
        }
        all.push(BandStats {
            mean,
            scale,
            centered_only,
        });
    }
    Ok(all)
}

/// Applies fitted statistics to every pixel of every band.
pub fn apply_stats(bundle: &DatasetBundle, stats: &[BandStats]) -> Result<DatasetBundle> {
    if stats.len() != bundle.modalities().len() {
        return Err(Error::Invalid(format!(
            "statistics cover {} modalities, bundle has {}",
            stats.len(),
            bundle.modalities().len()
        )));
    }
    let mut transformed = Vec::with_capacity(stats.len());
    for (block, st) in bundle.modalities().iter().zip(stats) {
        if st.mean.len() != block.channels() {
            return Err(Error::Invalid(format!(
                "statistics for modality {} cover {} bands, block has {}",
                block.id(),
                st.mean.len(),
                block.channels()
            )));
        }
        let src = block.data();
        transformed.push(DMatrix::from_fn(src.nrows(), src.ncols(), |r, c| {
            (src[(r, c)] - st.mean[r]) / st.scale[r]
        }));
    }
    bundle.with_data(transformed)
}

/// Fit-and-apply in one step. `None` mode is the identity and returns no
/// statistics.
pub fn standardize(
    bundle: &DatasetBundle,
    mode: StandardizeMode,
) -> Result<(DatasetBundle, Option<Vec<BandStats>>)> {
    match mode {
        StandardizeMode::None => Ok((bundle.clone(), None)),
        StandardizeMode::PerBandZscore => {
            let stats = fit_stats(bundle)?;
            let out = apply_stats(bundle, &stats)?;
            Ok((out, Some(stats)))
        }
    }
}
