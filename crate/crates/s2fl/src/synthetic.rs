//! Deterministic synthetic multimodal benchmark.
//!
//! Every class owns a shared latent center and, per modality, a private
//! latent center. A sample draws a shared code and per-modality private
//! codes around those centers; each modality observes a fixed random linear
//! map of `shared_fraction * shared + (1 - shared_fraction) * private`,
//! plus isotropic Gaussian noise. The shared fraction therefore controls
//! exactly how much cross-modality structure exists beyond class identity.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use s2fl_core::ModalityBlock;

use crate::bundle::DatasetBundle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub modality_dims: Vec<usize>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Scale of class centers in latent space; within-class scatter is 1.
    pub separation: f64,
    /// Standard deviation of the additive observation noise.
    pub noise: f64,
    /// 0 = modalities share nothing beyond class identity, 1 = no private
    /// signal.
    pub shared_fraction: f64,
    pub latent_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 5,
            modality_dims: vec![12, 6],
            train_per_class: 60,
            test_per_class: 40,
            separation: 4.0,
            noise: 0.3,
            shared_fraction: 0.5,
            latent_dim: 4,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Invalid("classes must be at least 1".into()));
        }
        if self.modality_dims.is_empty() || self.modality_dims.contains(&0) {
            return Err(Error::Invalid(
                "modality dims must be a nonempty list of positive channel counts".into(),
            ));
        }
        if self.train_per_class == 0 {
            return Err(Error::Invalid("train samples per class must be at least 1".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::Invalid("latent dim must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return Err(Error::Invalid("shared fraction must lie in [0, 1]".into()));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::Invalid("noise must be finite and nonnegative".into()));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::Invalid("separation must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

pub fn make_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let c = spec.classes;
    let l = spec.latent_dim;
    let k = spec.modality_dims.len();
    let per_class = spec.train_per_class + spec.test_per_class;
    let n_all = c * per_class;
    let map_scale = 1.0 / (l as f64).sqrt();

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    let shared_centers = gaussian_matrix(&mut rng, l, c, spec.separation);
    let mut maps_shared = Vec::with_capacity(k);
    let mut maps_private = Vec::with_capacity(k);
    let mut private_centers = Vec::with_capacity(k);
    for &d in &spec.modality_dims {
        maps_shared.push(gaussian_matrix(&mut rng, d, l, map_scale));
        maps_private.push(gaussian_matrix(&mut rng, d, l, map_scale));
        private_centers.push(gaussian_matrix(&mut rng, l, c, spec.separation));
    }

    let mut data: Vec<DMatrix<f64>> = spec
        .modality_dims
        .iter()
        .map(|&d| DMatrix::zeros(d, n_all))
        .collect();
    let mut train_mask = vec![0u32; n_all];
    let mut test_mask = vec![0u32; n_all];

    let f = spec.shared_fraction;
    for class in 0..c {
        for s in 0..per_class {
            let pixel = class * per_class + s;
            if s < spec.train_per_class {
                train_mask[pixel] = (class + 1) as u32;
            } else {
                test_mask[pixel] = (class + 1) as u32;
            }

            let mut shared = shared_centers.column(class).into_owned();
            for v in shared.iter_mut() {
                *v += rng.sample::<f64, _>(StandardNormal);
            }
            for m in 0..k {
                let mut private = private_centers[m].column(class).into_owned();
                for v in private.iter_mut() {
                    *v += rng.sample::<f64, _>(StandardNormal);
                }
                let observed = &maps_shared[m] * (&shared * f)
                    + &maps_private[m] * (&private * (1.0 - f));
                let d = spec.modality_dims[m];
                for r in 0..d {
                    data[m][(r, pixel)] =
                        observed[r] + spec.noise * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }

    let modalities = data
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            ModalityBlock::new(i + 1, format!("synthetic_{}", i + 1), d).map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetBundle::new(modalities, train_mask, test_mask, vec![], (n_all, 1))
}
