//! The dataset container: co-registered modalities over a pixel grid plus
//! disjoint train/test masks.
//!
//! On disk a bundle is a directory holding `manifest.txt`, one
//! `modality_<k>.f64` payload per modality (row-major d_k x N_all,
//! little-endian), and `train_mask.u32` / `test_mask.u32`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use s2fl_core::{ModalityBlock, TrainingStack};

use crate::container::{self, Manifest, MAGIC};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    modalities: Vec<ModalityBlock>,
    train_mask: Vec<u32>,
    test_mask: Vec<u32>,
    class_names: Vec<String>,
    grid: (usize, usize),
}

/// Samples selected by a mask: per-modality column subsets plus their
/// labels and original pixel indices.
#[derive(Debug, Clone)]
pub struct LabeledSubset {
    pub data: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
}

impl DatasetBundle {
    /// Validates and assembles a bundle. An empty `class_names` list is
    /// filled in with generated names covering every id in the masks.
    pub fn new(
        modalities: Vec<ModalityBlock>,
        train_mask: Vec<u32>,
        test_mask: Vec<u32>,
        class_names: Vec<String>,
        grid: (usize, usize),
    ) -> Result<Self> {
        let n_all = grid.0 * grid.1;
        if n_all == 0 {
            return Err(Error::Invalid("grid must have at least one pixel".into()));
        }
        if modalities.is_empty() {
            return Err(Error::Invalid("bundle needs at least one modality".into()));
        }
        for (pos, block) in modalities.iter().enumerate() {
            if block.id() != pos + 1 {
                return Err(Error::Invalid(format!(
                    "modality ids must be 1..=K in order, found id {} at position {}",
                    block.id(),
                    pos + 1
                )));
            }
            if block.samples() != n_all {
                return Err(Error::Invalid(format!(
                    "modality {} covers {} samples, grid has {}",
                    block.id(),
                    block.samples(),
                    n_all
                )));
            }
        }
        if train_mask.len() != n_all || test_mask.len() != n_all {
            return Err(Error::Invalid(format!(
                "masks must have one entry per pixel ({n_all})"
            )));
        }
        if let Some(pixel) = (0..n_all).find(|&i| train_mask[i] != 0 && test_mask[i] != 0) {
            return Err(Error::Invalid(format!(
                "train and test masks overlap at pixel index {pixel}"
            )));
        }

        let max_id = train_mask
            .iter()
            .chain(&test_mask)
            .copied()
            .max()
            .unwrap_or(0) as usize;
        let class_names = if class_names.is_empty() {
            (1..=max_id).map(|c| format!("class_{c}")).collect()
        } else {
            class_names
        };
        if max_id > class_names.len() {
            return Err(Error::Invalid(format!(
                "masks reference class {max_id} but only {} class names are defined",
                class_names.len()
            )));
        }
        Ok(DatasetBundle {
            modalities,
            train_mask,
            test_mask,
            class_names,
            grid,
        })
    }

    pub fn modalities(&self) -> &[ModalityBlock] {
        &self.modalities
    }

    pub fn train_mask(&self) -> &[u32] {
        &self.train_mask
    }

    pub fn test_mask(&self) -> &[u32] {
        &self.test_mask
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn pixel_count(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    /// Replaces the modality data, keeping ids, names, masks, and grid.
    /// Used by standardization.
    pub(crate) fn with_data(&self, data: Vec<DMatrix<f64>>) -> Result<Self> {
        let modalities = self
            .modalities
            .iter()
            .zip(data)
            .map(|(b, d)| ModalityBlock::new(b.id(), b.name().to_string(), d).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        DatasetBundle::new(
            modalities,
            self.train_mask.clone(),
            self.test_mask.clone(),
            self.class_names.clone(),
            self.grid,
        )
    }

    fn subset(&self, mask: &[u32]) -> LabeledSubset {
        let indices: Vec<usize> = (0..self.pixel_count()).filter(|&i| mask[i] != 0).collect();
        let labels = indices.iter().map(|&i| mask[i] as usize).collect();
        let data = self
            .modalities
            .iter()
            .map(|b| {
                let src = b.data();
                DMatrix::from_fn(src.nrows(), indices.len(), |r, c| src[(r, indices[c])])
            })
            .collect();
        LabeledSubset {
            data,
            labels,
            indices,
        }
    }

    pub fn train_subset(&self) -> LabeledSubset {
        self.subset(&self.train_mask)
    }

    pub fn test_subset(&self) -> LabeledSubset {
        self.subset(&self.test_mask)
    }

    /// Training samples as the solver's input type.
    pub fn training_stack(&self) -> Result<TrainingStack> {
        let subset = self.train_subset();
        let blocks = self
            .modalities
            .iter()
            .zip(subset.data)
            .map(|(b, d)| ModalityBlock::new(b.id(), b.name().to_string(), d).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        TrainingStack::new(blocks, subset.labels, self.class_count()).map_err(Error::from)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest::new();
        manifest.push("magic", MAGIC);
        manifest.push("height", self.grid.0.to_string());
        manifest.push("width", self.grid.1.to_string());
        manifest.push("modalities", self.modalities.len().to_string());
        for block in &self.modalities {
            manifest.push(format!("modality_{}_name", block.id()), block.name());
            manifest.push(
                format!("modality_{}_channels", block.id()),
                block.channels().to_string(),
            );
        }
        manifest.push("classes", self.class_names.len().to_string());
        for (c, name) in self.class_names.iter().enumerate() {
            manifest.push(format!("class_{}_name", c + 1), name);
        }
        manifest.save(&dir.join("manifest.txt"))?;

        for block in &self.modalities {
            container::write_f64_matrix(
                &dir.join(format!("modality_{}.f64", block.id())),
                block.data(),
            )?;
        }
        container::write_u32_vec(&dir.join("train_mask.u32"), &self.train_mask)?;
        container::write_u32_vec(&dir.join("test_mask.u32"), &self.test_mask)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let manifest = Manifest::load(&manifest_path)?;
        manifest.check_magic(&manifest_path)?;

        let height: usize = manifest.require_parse(&manifest_path, "height")?;
        let width: usize = manifest.require_parse(&manifest_path, "width")?;
        let k: usize = manifest.require_parse(&manifest_path, "modalities")?;
        let classes: usize = manifest.require_parse(&manifest_path, "classes")?;
        let n_all = height * width;

        let mut modalities = Vec::with_capacity(k);
        for id in 1..=k {
            let name = manifest
                .require(&manifest_path, &format!("modality_{id}_name"))?
                .to_string();
            let channels: usize =
                manifest.require_parse(&manifest_path, &format!("modality_{id}_channels"))?;
            let payload = dir.join(format!("modality_{id}.f64"));
            let data = container::read_f64_matrix(
                &payload,
                channels,
                n_all,
                &format!("modality {id} ({name})"),
            )?;
            let block = ModalityBlock::new(id, name, data)
                .map_err(|e| Error::format(&payload, e.to_string()))?;
            modalities.push(block);
        }

        let class_names = (1..=classes)
            .map(|c| {
                manifest
                    .require(&manifest_path, &format!("class_{c}_name"))
                    .map(str::to_string)
            })
            .collect::<Result<Vec<_>>>()?;

        let train_mask = container::read_u32_vec(&dir.join("train_mask.u32"), n_all, "train mask")?;
        let test_mask = container::read_u32_vec(&dir.join("test_mask.u32"), n_all, "test mask")?;

        DatasetBundle::new(modalities, train_mask, test_mask, class_names, (height, width))
    }
}
