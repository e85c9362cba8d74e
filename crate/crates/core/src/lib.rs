//! Shared-and-specific subspace learning for multimodal data.
//!
//! Each sample is observed through several modalities with different channel
//! counts. The model learns one orthogonal projection per modality plus a
//! shared projection and a label regressor, so that every modality lands in a
//! common low-dimensional space where a plain nearest-neighbour rule works,
//! even for samples missing all but one modality.
//!
//! The crate is `no_std` (with `alloc`): all heavy lifting goes through
//! [`nalgebra`] and [`libm`], so the solver can run in embedded or wasm hosts.
//! IO, file formats and the CLI live in the companion `s2fl` crate.
//!
//! Entry points:
//! - [`solver::fit`] trains a [`ProjectionModel`] from a [`TrainingStack`].
//! - [`classify::extract_features`] embeds new data with a trained model.
//! - [`classify::nn_classify`] and [`classify::evaluate`] close the loop.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classify;
pub mod error;
pub mod graph;
mod lpp;
pub mod model;
pub mod solver;

pub use classify::{EmbedMode, EmbeddingConfig, EvalReport, Fusion};
pub use error::{Error, Result};
pub use graph::{GraphMatrix, JointGraph};
pub use model::{
    ConvergenceTrace, HyperParams, ModalityBlock, ProjectionModel, Termination, TrainingStack,
};
pub use solver::{fit, fit_with_progress, AdmmState, OuterProgress, SubproblemTarget};
