//! File formats, dataset plumbing, and experiment orchestration around the
//! `s2fl-core` solver: a bit-exact dataset container, CSV import, per-band
//! standardization, a deterministic synthetic benchmark generator,
//! classification-map output, metric reports, and stratified grid-search
//! cross-validation. The `s2fl` binary wires these into a pipeline.

pub mod bundle;
pub mod classmap;
pub mod container;
pub mod csv;
pub mod cv;
pub mod error;
pub mod import;
pub mod model_store;
pub mod report;
pub mod standardize;
pub mod synthetic;

pub use bundle::{DatasetBundle, LabeledSubset};
pub use error::{Error, Result};
pub use model_store::StoredModel;
pub use standardize::{standardize, BandStats, StandardizeMode};
pub use synthetic::{make_synthetic, SyntheticSpec};
