//! Data containers, hyperparameters, the trained model, and the objective.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::graph::GraphMatrix;

/// One modality's observations: a `channels x samples` matrix plus identity.
///
/// Ids are 1-based and must match the block's position inside a
/// [`TrainingStack`]; the name is free-form and only surfaces in error
/// messages and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBlock {
    id: usize,
    name: String,
    data: DMatrix<f64>,
}

impl ModalityBlock {
    /// Wraps a data matrix, rejecting empty shapes, a zero id, and non-finite
    /// entries.
    pub fn new(id: usize, name: impl Into<String>, data: DMatrix<f64>) -> Result<Self> {
        if id == 0 {
            return Err(Error::Validation("modality ids are 1-based".into()));
        }
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "modality {id} has shape {}x{}, both dimensions must be positive",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "modality {id} contains non-finite entries"
            )));
        }
        Ok(Self {
            id,
            name: name.into(),
            data,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Channel count (matrix rows).
    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    /// Sample count (matrix columns).
    pub fn samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Aligned multimodal training data with 1-based class labels.
///
/// All blocks observe the same samples in the same column order, so every
/// block has the same column count as `labels`. Labels run `1..=classes` and
/// every class must occur at least once; downstream graph weights divide by
/// per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStack {
    blocks: Vec<ModalityBlock>,
    labels: Vec<usize>,
    classes: usize,
}

impl TrainingStack {
    pub fn new(blocks: Vec<ModalityBlock>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Validation("at least one modality is required".into()));
        }
        if classes == 0 {
            return Err(Error::Validation("class count must be positive".into()));
        }
        for (pos, block) in blocks.iter().enumerate() {
            if block.id() != pos + 1 {
                return Err(Error::Validation(format!(
                    "modality id {} at position {} (ids must be 1..=K in order)",
                    block.id(),
                    pos
                )));
            }
        }
        let samples = blocks[0].samples();
        for block in &blocks[1..] {
            if block.samples() != samples {
                return Err(Error::Dimension(format!(
                    "modality {} has {} samples, expected {}",
                    block.id(),
                    block.samples(),
                    samples
                )));
            }
        }
        if labels.len() != samples {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                labels.len(),
                samples
            )));
        }
        let mut seen = vec![false; classes];
        for (j, &label) in labels.iter().enumerate() {
            if label == 0 || label > classes {
                return Err(Error::Validation(format!(
                    "label {label} at sample {j} is outside 1..={classes}"
                )));
            }
            seen[label - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|present| !present) {
            return Err(Error::Validation(format!(
                "class {} has no training samples",
                missing + 1
            )));
        }
        Ok(Self {
            blocks,
            labels,
            classes,
        })
    }

    pub fn modality_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn sample_count(&self) -> usize {
        self.labels.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blocks(&self) -> &[ModalityBlock] {
        &self.blocks
    }

    /// Data matrix of modality `k` (1-based).
    ///
    /// Panics when `k` is zero or exceeds the modality count.
    pub fn modality_data(&self, k: usize) -> &DMatrix<f64> {
        self.blocks[k - 1].data()
    }

    /// Total channel count across modalities.
    pub fn total_channels(&self) -> usize {
        self.blocks.iter().map(|b| b.channels()).sum()
    }

    /// Row offset of modality `k` (1-based) inside the stacked channel axis.
    pub fn channel_offset(&self, k: usize) -> usize {
        assert!(k >= 1 && k <= self.blocks.len(), "modality index {k}");
        self.blocks[..k - 1].iter().map(|b| b.channels()).sum()
    }

    /// Class indicator matrix, `classes x samples`, one 1.0 per column.
    pub fn one_hot(&self) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.classes, self.labels.len());
        for (j, &label) in self.labels.iter().enumerate() {
            y[(label - 1, j)] = 1.0;
        }
        y
    }

    /// Indicator matrix tiled once per modality, `classes x (K * samples)`.
    pub fn replicated_one_hot(&self) -> DMatrix<f64> {
        let y = self.one_hot();
        let n = y.ncols();
        let mut tiled = DMatrix::zeros(self.classes, self.blocks.len() * n);
        for k in 0..self.blocks.len() {
            tiled.columns_mut(k * n, n).copy_from(&y);
        }
        tiled
    }

    /// Per-class sample counts, indexed by class minus one.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes];
        for &label in &self.labels {
            counts[label - 1] += 1;
        }
        counts
    }

    /// Borrowed view of the blocks for products against the virtual
    /// block-diagonal data matrix.
    pub fn data_blocks(&self) -> DataBlocks<'_> {
        DataBlocks {
            blocks: self.blocks.iter().map(|b| b.data()).collect(),
        }
    }
}

/// The block-diagonal stacked data matrix, kept virtual.
///
/// Conceptually this is the `total_channels x (K * N)` matrix with the K
/// modality blocks on its diagonal. It is never materialized; every product
/// is computed block by block, which is both the memory bound and the speed
/// bound for the solver.
#[derive(Debug, Clone)]
pub struct DataBlocks<'a> {
    blocks: Vec<&'a DMatrix<f64>>,
}

impl<'a> DataBlocks<'a> {
    /// A one-block view, used by the modality-specific subproblems.
    pub fn single(data: &'a DMatrix<f64>) -> Self {
        Self { blocks: vec![data] }
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Shared column count of every block.
    pub fn samples(&self) -> usize {
        self.blocks[0].ncols()
    }

    /// Sum of block row counts.
    pub fn channels(&self) -> usize {
        self.blocks.iter().map(|b| b.nrows()).sum()
    }

    fn offset(&self, k: usize) -> usize {
        self.blocks[..k].iter().map(|b| b.nrows()).sum()
    }

    /// `M * X` for `M: r x total_channels`, giving `r x (K * N)`.
    ///
    /// Column block `k` of the result is `M_k * X_k` where `M_k` slices the
    /// columns of `M` belonging to modality `k`.
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.ncols(), self.channels(), "left factor column count");
        let n = self.samples();
        let mut out = DMatrix::zeros(m.nrows(), self.blocks.len() * n);
        for (k, block) in self.blocks.iter().enumerate() {
            let slice = m.columns(self.offset(k), block.nrows());
            out.columns_mut(k * n, n).copy_from(&(slice * *block));
        }
        out
    }

    /// `R * X^T` for `R: m x (K * N)`, giving `m x total_channels`.
    pub fn apply_transpose(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.samples();
        assert_eq!(r.ncols(), self.blocks.len() * n, "right factor column count");
        let mut out = DMatrix::zeros(r.nrows(), self.channels());
        for (k, block) in self.blocks.iter().enumerate() {
            let slice = r.columns(k * n, n);
            out.columns_mut(self.offset(k), block.nrows())
                .copy_from(&(slice * block.transpose()));
        }
        out
    }

    /// `X * X^T`, block-diagonal with `X_k * X_k^T` on the diagonal.
    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.channels();
        let mut out = DMatrix::zeros(d, d);
        for (k, block) in self.blocks.iter().enumerate() {
            let off = self.offset(k);
            out.view_mut((off, off), (block.nrows(), block.nrows()))
                .copy_from(&(*block * block.transpose()));
        }
        out
    }

    /// `X * B` for `B: (K * N) x c`, giving `total_channels x c`.
    pub fn premultiply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.samples();
        assert_eq!(b.nrows(), self.blocks.len() * n, "right factor row count");
        let mut out = DMatrix::zeros(self.channels(), b.ncols());
        for (k, block) in self.blocks.iter().enumerate() {
            let slice = b.rows(k * n, n);
            out.rows_mut(self.offset(k), block.nrows())
                .copy_from(&(*block * slice));
        }
        out
    }
}

/// Everything the solver and graph builder can be tuned with.
///
/// `seed` is carried for provenance only: fitting is deterministic and never
/// draws random numbers, but downstream tooling records the seed that
/// produced the data split next to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Ridge weight on the regressor.
    pub alpha: f64,
    /// Weight of the graph alignment term on the shared projection.
    pub beta: f64,
    /// Bandwidth of the similarity kernel for intra-modality edges.
    pub sigma: f64,
    /// Neighbour count for intra-modality edges.
    pub q: usize,
    /// Rows of every projection; must not exceed the stacked channel count.
    pub subspace_dim: usize,
    /// Outer iteration cap.
    pub max_outer: usize,
    /// Inner solver iteration cap per subproblem.
    pub max_admm: usize,
    /// Relative objective change that stops the outer loop.
    pub outer_tol: f64,
    /// Residual norm that stops the inner solver.
    pub admm_tol: f64,
    /// Initial penalty of the inner solver.
    pub penalty_init: f64,
    /// Multiplicative penalty growth per inner iteration.
    pub penalty_growth: f64,
    /// Penalty ceiling.
    pub penalty_max: f64,
    /// Provenance tag, not consumed by the solver.
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.1,
            sigma: 1.0,
            q: 10,
            subspace_dim: 10,
            max_outer: 100,
            max_admm: 200,
            outer_tol: 1e-4,
            admm_tol: 1e-6,
            penalty_init: 1e-3,
            penalty_growth: 1.5,
            penalty_max: 1e6,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive_finite: [(&str, f64); 3] = [
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("penalty_init", self.penalty_init),
        ];
        for (name, value) in positive_finite {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        // Tolerances and the penalty cap may be +inf (degenerate but legal:
        // an infinite tolerance stops after one iteration, an infinite cap
        // never clips).
        let positive: [(&str, f64); 3] = [
            ("outer_tol", self.outer_tol),
            ("admm_tol", self.admm_tol),
            ("penalty_max", self.penalty_max),
        ];
        for (name, value) in positive {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Validation(format!(
                "beta must be nonnegative and finite, got {}",
                self.beta
            )));
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth >= 1.0) {
            return Err(Error::Validation(format!(
                "penalty_growth must be at least 1, got {}",
                self.penalty_growth
            )));
        }
        if self.penalty_max < self.penalty_init {
            return Err(Error::Validation(
                "penalty_max must be at least penalty_init".into(),
            ));
        }
        if self.q == 0 {
            return Err(Error::Validation("q must be at least 1".into()));
        }
        if self.subspace_dim == 0 {
            return Err(Error::Validation("subspace_dim must be at least 1".into()));
        }
        if self.max_outer == 0 || self.max_admm == 0 {
            return Err(Error::Validation(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A trained model: shared projection, per-modality specific projections,
/// and the label regressor.
///
/// `shared` is `subspace_dim x total_channels` and splits column-wise into
/// per-modality slices; `specific[k]` matches modality `k + 1`'s channel
/// count. The regressor maps the subspace to class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub(crate) shared: DMatrix<f64>,
    pub(crate) specific: Vec<DMatrix<f64>>,
    pub(crate) regressor: DMatrix<f64>,
    pub(crate) block_dims: Vec<usize>,
}

impl ProjectionModel {
    /// Assembles a model from its parts, checking shape agreement and
    /// finiteness. `block_dims` lists per-modality channel counts in order.
    pub fn new(
        shared: DMatrix<f64>,
        specific: Vec<DMatrix<f64>>,
        regressor: DMatrix<f64>,
        block_dims: Vec<usize>,
    ) -> Result<Self> {
        if block_dims.is_empty() || specific.len() != block_dims.len() {
            return Err(Error::Dimension(format!(
                "{} specific projections for {} modalities",
                specific.len(),
                block_dims.len()
            )));
        }
        let total: usize = block_dims.iter().sum();
        let ds = shared.nrows();
        if ds == 0 || shared.ncols() != total {
            return Err(Error::Dimension(format!(
                "shared projection is {}x{}, expected {}x{}",
                shared.nrows(),
                shared.ncols(),
                ds.max(1),
                total
            )));
        }
        for (k, (theta, &dk)) in specific.iter().zip(&block_dims).enumerate() {
            if theta.nrows() != ds || theta.ncols() != dk {
                return Err(Error::Dimension(format!(
                    "specific projection {} is {}x{}, expected {}x{}",
                    k + 1,
                    theta.nrows(),
                    theta.ncols(),
                    ds,
                    dk
                )));
            }
        }
        if regressor.ncols() != ds || regressor.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "regressor is {}x{}, expected a positive class count by {}",
                regressor.nrows(),
                regressor.ncols(),
                ds
            )));
        }
        let finite = shared.iter().all(|v| v.is_finite())
            && regressor.iter().all(|v| v.is_finite())
            && specific.iter().all(|t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Validation(
                "model parameters contain non-finite entries".into(),
            ));
        }
        Ok(Self {
            shared,
            specific,
            regressor,
            block_dims,
        })
    }

    pub fn shared(&self) -> &DMatrix<f64> {
        &self.shared
    }

    /// Specific projection of modality `k` (1-based).
    pub fn specific(&self, k: usize) -> &DMatrix<f64> {
        &self.specific[k - 1]
    }

    pub fn specific_all(&self) -> &[DMatrix<f64>] {
        &self.specific
    }

    pub fn regressor(&self) -> &DMatrix<f64> {
        &self.regressor
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn modality_count(&self) -> usize {
        self.block_dims.len()
    }

    pub fn subspace_dim(&self) -> usize {
        self.shared.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.regressor.nrows()
    }

    fn offset(&self, k: usize) -> usize {
        self.block_dims[..k - 1].iter().sum()
    }

    /// Columns of the shared projection belonging to modality `k` (1-based).
    pub fn shared_block(&self, k: usize) -> DMatrixView<'_, f64> {
        assert!(k >= 1 && k <= self.block_dims.len(), "modality index {k}");
        self.shared.columns(self.offset(k), self.block_dims[k - 1])
    }

    /// Shared plus specific slice for modality `k` (1-based): the full
    /// projection a sample of that modality passes through.
    pub fn combined_block(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from(self.shared_block(k)) + &self.specific[k - 1]
    }

    /// All specific projections side by side, matching the shared layout.
    pub fn specific_concat(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.subspace_dim(), self.shared.ncols());
        for k in 1..=self.block_dims.len() {
            out.columns_mut(self.offset(k), self.block_dims[k - 1])
                .copy_from(&self.specific[k - 1]);
        }
        out
    }

    /// The generalized projection: shared plus the concatenated specifics.
    pub fn generalized(&self) -> DMatrix<f64> {
        &self.shared + self.specific_concat()
    }
}

/// Which rule ended the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative objective change fell below `outer_tol`.
    Tolerance,
    /// `max_outer` iterations ran without reaching the tolerance.
    MaxIterations,
}

/// Per-iteration record of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// Objective value after each outer iteration.
    pub outer_objectives: Vec<f64>,
    /// `|E_t - E_{t-1}| / E_{t-1}` for every iteration after the first, so
    /// one entry shorter than `outer_objectives`.
    pub relative_deltas: Vec<f64>,
    /// Final inner-solver residual pair per subproblem, grouped by outer
    /// iteration: the shared solve first, then one entry per modality.
    pub admm_residuals: Vec<Vec<(f64, f64)>>,
    pub terminated_by: Termination,
}

/// Training objective: squared regression error of the replicated labels,
/// ridge penalty on the regressor, and the graph alignment of the shared
/// embedding.
///
/// When `beta` is zero the alignment term is skipped outright, so the result
/// is bit-identical for any Laplacian of the right size.
pub fn objective(
    model: &ProjectionModel,
    stack: &TrainingStack,
    laplacian: &GraphMatrix,
    hp: &HyperParams,
) -> Result<f64> {
    let k_count = stack.modality_count();
    let n = stack.sample_count();
    if model.block_dims.len() != k_count
        || (1..=k_count).any(|k| model.block_dims[k - 1] != stack.modality_data(k).nrows())
    {
        return Err(Error::Dimension(
            "model channel layout does not match the stack".into(),
        ));
    }
    if model.class_count() != stack.class_count() {
        return Err(Error::Dimension(format!(
            "regressor has {} classes, stack has {}",
            model.class_count(),
            stack.class_count()
        )));
    }
    if laplacian.nrows() != k_count * n {
        return Err(Error::Dimension(format!(
            "laplacian is {0}x{0}, expected {1}x{1}",
            laplacian.nrows(),
            k_count * n
        )));
    }

    let y = stack.one_hot();
    let mut data_term = 0.0;
    for k in 1..=k_count {
        let fitted = &model.regressor * (model.combined_block(k) * stack.modality_data(k));
        data_term += (&y - fitted).norm_squared();
    }
    let ridge = model.regressor.norm_squared();

    let alignment = if hp.beta != 0.0 {
        let mut shared_proj = DMatrix::zeros(model.subspace_dim(), k_count * n);
        for k in 1..=k_count {
            shared_proj
                .columns_mut((k - 1) * n, n)
                .copy_from(&(model.shared_block(k) * stack.modality_data(k)));
        }
        hp.beta * laplacian.quadratic_trace(&shared_proj)
    } else {
        0.0
    };

    Ok(0.5 * data_term + 0.5 * hp.alpha * ridge + 0.5 * alignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn block(id: usize, data: DMatrix<f64>) -> ModalityBlock {
        ModalityBlock::new(id, format!("m{id}"), data).unwrap()
    }

    fn two_block_stack() -> TrainingStack {
        let x1 = dmatrix![1.0, 2.0, 3.0, 4.0;
                          0.5, -1.0, 0.0, 2.0];
        let x2 = dmatrix![2.0, 0.0, 1.0, -1.0;
                          1.0, 1.0, 0.0, 0.0;
                          0.0, 3.0, -2.0, 1.0];
        TrainingStack::new(
            vec![block(1, x1), block(2, x2)],
            vec![1, 2, 1, 2],
            2,
        )
        .unwrap()
    }

    #[test]
    fn rejects_structural_problems() {
        let data = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert!(matches!(
            ModalityBlock::new(0, "x", data.clone()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            ModalityBlock::new(1, "x", dmatrix![1.0, f64::NAN]),
            Err(Error::Validation(_))
        ));

        // Mismatched sample counts across blocks.
        let b1 = block(1, dmatrix![1.0, 2.0]);
        let b2 = block(2, dmatrix![1.0, 2.0, 3.0]);
        assert!(matches!(
            TrainingStack::new(vec![b1.clone(), b2], vec![1, 1], 1),
            Err(Error::Dimension(_))
        ));

        // Label outside 1..=classes.
        assert!(matches!(
            TrainingStack::new(vec![b1.clone()], vec![1, 3], 2),
            Err(Error::Validation(_))
        ));

        // Class 2 never occurs.
        assert!(matches!(
            TrainingStack::new(vec![b1.clone()], vec![1, 1], 2),
            Err(Error::Validation(_))
        ));

        // Ids must match positions.
        let wrong = block(3, dmatrix![1.0, 2.0]);
        assert!(matches!(
            TrainingStack::new(vec![b1, wrong], vec![1, 2], 2),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn one_hot_layout() {
        let stack = two_block_stack();
        let y = stack.one_hot();
        assert_eq!(y, dmatrix![1.0, 0.0, 1.0, 0.0;
                               0.0, 1.0, 0.0, 1.0]);
        let tiled = stack.replicated_one_hot();
        assert_eq!(tiled.ncols(), 8);
        assert_eq!(tiled.columns(0, 4), tiled.columns(4, 4));
        assert_eq!(stack.class_counts(), vec![2, 2]);
    }

    #[test]
    fn offsets_and_totals() {
        let stack = two_block_stack();
        assert_eq!(stack.total_channels(), 5);
        assert_eq!(stack.channel_offset(1), 0);
        assert_eq!(stack.channel_offset(2), 2);
    }

    /// Blockwise products must agree with the explicit block-diagonal matrix.
    #[test]
    fn virtual_blockdiag_products() {
        let stack = two_block_stack();
        let blocks = stack.data_blocks();
        let (d, n, k) = (5, 4, 2);

        let mut dense = DMatrix::zeros(d, k * n);
        dense
            .view_mut((0, 0), (2, n))
            .copy_from(stack.modality_data(1));
        dense
            .view_mut((2, n), (3, n))
            .copy_from(stack.modality_data(2));

        let m = DMatrix::from_fn(3, d, |i, j| (i as f64) - 0.7 * (j as f64));
        assert_eq!(blocks.apply(&m), &m * &dense);

        let r = DMatrix::from_fn(3, k * n, |i, j| 0.3 * (i as f64) + (j as f64) * (j as f64));
        assert_eq!(blocks.apply_transpose(&r), &r * dense.transpose());
        assert_eq!(blocks.gram(), &dense * dense.transpose());

        let b = DMatrix::from_fn(k * n, 2, |i, j| (i + 2 * j) as f64 * 0.25);
        assert_eq!(blocks.premultiply(&b), &dense * &b);
    }

    #[test]
    fn hyperparam_validation() {
        assert!(HyperParams::default().validate().is_ok());
        let bad = [
            HyperParams { alpha: 0.0, ..HyperParams::default() },
            HyperParams { beta: -0.5, ..HyperParams::default() },
            HyperParams { penalty_growth: 0.9, ..HyperParams::default() },
            HyperParams { penalty_max: 1e-9, ..HyperParams::default() },
        ];
        for hp in bad {
            assert!(hp.validate().is_err());
        }
    }

    #[test]
    fn model_shapes_and_slices() {
        let shared = DMatrix::from_fn(2, 5, |i, j| (i * 5 + j) as f64);
        let s1 = DMatrix::from_element(2, 2, 1.0);
        let s2 = DMatrix::from_element(2, 3, -1.0);
        let p = DMatrix::identity(2, 2);
        let model =
            ProjectionModel::new(shared.clone(), vec![s1.clone(), s2], p, vec![2, 3]).unwrap();

        assert_eq!(model.shared_block(1), shared.columns(0, 2));
        assert_eq!(model.shared_block(2), shared.columns(2, 3));
        assert_eq!(model.combined_block(1), shared.columns(0, 2) + s1);
        assert_eq!(model.generalized(), shared + model.specific_concat());

        // Wrong specific width is rejected.
        let bad = ProjectionModel::new(
            DMatrix::zeros(2, 5),
            vec![DMatrix::zeros(2, 3), DMatrix::zeros(2, 3)],
            DMatrix::zeros(2, 2),
            vec![2, 3],
        );
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }

    #[test]
    fn objective_terms_add_up() {
        let stack = two_block_stack();
        let shared = DMatrix::from_fn(2, 5, |i, j| 0.1 * ((i + j) as f64) - 0.05);
        let specific = vec![
            DMatrix::from_fn(2, 2, |i, j| 0.2 * (i as f64) - 0.1 * (j as f64)),
            DMatrix::from_fn(2, 3, |i, j| 0.05 * ((i * 3 + j) as f64)),
        ];
        let regressor = dmatrix![0.4, -0.2; 0.1, 0.3];
        let model =
            ProjectionModel::new(shared, specific, regressor.clone(), vec![2, 3]).unwrap();

        let hp = HyperParams {
            alpha: 0.3,
            beta: 0.0,
            ..HyperParams::default()
        };
        let lap = GraphMatrix::Dense(DMatrix::zeros(8, 8));

        // Hand-computed: residual against the replicated one-hot plus ridge.
        let y = stack.one_hot();
        let mut expected = 0.0;
        for k in 1..=2 {
            let fitted = &regressor * (model.combined_block(k) * stack.modality_data(k));
            expected += 0.5 * (&y - fitted).norm_squared();
        }
        expected += 0.5 * 0.3 * regressor.norm_squared();
        let got = objective(&model, &stack, &lap, &hp).unwrap();
        assert!((got - expected).abs() < 1e-14);

        // With beta = 0 the Laplacian content is irrelevant bit for bit.
        let other = GraphMatrix::Dense(DMatrix::from_fn(8, 8, |i, j| ((i + j) % 3) as f64));
        assert_eq!(got.to_bits(), objective(&model, &stack, &other, &hp).unwrap().to_bits());

        // Wrong Laplacian size is a dimension error even when beta = 0.
        let tiny = GraphMatrix::Dense(DMatrix::zeros(3, 3));
        assert!(objective(&model, &stack, &tiny, &hp).is_err());
    }
}
