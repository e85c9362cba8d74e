//! Model persistence, reusing the container conventions: a manifest plus
//! one `.f64` payload per matrix. A stored model carries everything a later
//! transform needs, including the fitted standardization statistics.

use std::fs;
use std::path::Path;

use s2fl_core::ProjectionModel;

use crate::container::{self, Manifest, MAGIC};
use crate::error::{Error, Result};
use crate::standardize::{BandStats, StandardizeMode};

#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub model: ProjectionModel,
    pub standardize: StandardizeMode,
    pub stats: Option<Vec<BandStats>>,
}

impl StoredModel {
    pub fn new(
        model: ProjectionModel,
        standardize: StandardizeMode,
        stats: Option<Vec<BandStats>>,
    ) -> Result<Self> {
        match (standardize, &stats) {
            (StandardizeMode::PerBandZscore, None) => Err(Error::Invalid(
                "zscore models must carry their fitted statistics".into(),
            )),
            (StandardizeMode::None, Some(_)) => Err(Error::Invalid(
                "unstandardized models must not carry statistics".into(),
            )),
            _ => Ok(StoredModel {
                model,
                standardize,
                stats,
            }),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let model = &self.model;

        let mut manifest = Manifest::new();
        manifest.push("magic", MAGIC);
        manifest.push("kind", "model");
        manifest.push("subspace_dim", model.subspace_dim().to_string());
        manifest.push("classes", model.class_count().to_string());
        manifest.push("modalities", model.modality_count().to_string());
        for (k, d) in model.block_dims().iter().enumerate() {
            manifest.push(format!("modality_{}_channels", k + 1), d.to_string());
        }
        manifest.push("standardize", self.standardize.as_str());
        manifest.save(&dir.join("manifest.txt"))?;

        container::write_f64_matrix(&dir.join("theta0.f64"), model.shared())?;
        for k in 1..=model.modality_count() {
            container::write_f64_matrix(&dir.join(format!("theta_{k}.f64")), model.specific(k))?;
        }
        container::write_f64_matrix(&dir.join("p.f64"), model.regressor())?;

        if let Some(stats) = &self.stats {
            for (k, st) in stats.iter().enumerate() {
                container::write_f64_matrix(
                    &dir.join(format!("stats_modality_{}.f64", k + 1)),
                    &st.to_matrix(),
                )?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.txt");
        let manifest = Manifest::load(&manifest_path)?;
        manifest.check_magic(&manifest_path)?;
        if manifest.get("kind") != Some("model") {
            return Err(Error::format(
                &manifest_path,
                "not a model directory (missing `kind=model`)",
            ));
        }

        let ds: usize = manifest.require_parse(&manifest_path, "subspace_dim")?;
        let classes: usize = manifest.require_parse(&manifest_path, "classes")?;
        let k: usize = manifest.require_parse(&manifest_path, "modalities")?;
        let dims: Vec<usize> = (1..=k)
            .map(|i| manifest.require_parse(&manifest_path, &format!("modality_{i}_channels")))
            .collect::<Result<_>>()?;
        let total: usize = dims.iter().sum();
        let standardize =
            StandardizeMode::parse(manifest.require(&manifest_path, "standardize")?)?;

        let shared = container::read_f64_matrix(&dir.join("theta0.f64"), ds, total, "theta0")?;
        let specific = (1..=k)
            .map(|i| {
                container::read_f64_matrix(
                    &dir.join(format!("theta_{i}.f64")),
                    ds,
                    dims[i - 1],
                    &format!("theta_{i}"),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let regressor = container::read_f64_matrix(&dir.join("p.f64"), classes, ds, "p")?;
        let model =
            ProjectionModel::new(shared, specific, regressor, dims.clone()).map_err(Error::from)?;

        let stats = match standardize {
            StandardizeMode::None => None,
            StandardizeMode::PerBandZscore => Some(
                (1..=k)
                    .map(|i| {
                        let m = container::read_f64_matrix(
                            &dir.join(format!("stats_modality_{i}.f64")),
                            3,
                            dims[i - 1],
                            &format!("stats_modality_{i}"),
                        )?;
                        BandStats::from_matrix(&m)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        StoredModel::new(model, standardize, stats)
    }
}
