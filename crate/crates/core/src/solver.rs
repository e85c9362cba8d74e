//! Block-coordinate outer loop and the ADMM inner solver.
//!
//! The outer loop cycles through the regressor (closed form), the shared
//! projection, and each modality's specific projection. Every projection
//! subproblem carries an orthogonality constraint, handled by splitting: an
//! auxiliary variable shadows the projected data, another shadows the
//! projection itself and is snapped onto the set of partial isometries by a
//! thin SVD each iteration, while multipliers and a growing penalty pull the
//! splits together.
//!
//! All closed-form updates are exposed as free functions so they can be
//! verified in isolation against finite-difference gradients of their
//! subproblem objectives; the solver loop calls exactly these functions.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{GraphMatrix, JointGraph};
use crate::model::{
    objective, ConvergenceTrace, DataBlocks, HyperParams, ProjectionModel, Termination,
    TrainingStack,
};

pub use crate::lpp::lpp_init;

/// Inner-solver state: split variables, their multipliers, the penalty, and
/// the full residual and penalty history for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Shadows the projected data (projection times data block).
    pub split_features: DMatrix<f64>,
    /// Shadows the projection; kept on the partial-isometry set.
    pub split_projection: DMatrix<f64>,
    /// Multiplier paired with `split_features`.
    pub multiplier_features: DMatrix<f64>,
    /// Multiplier paired with `split_projection`.
    pub multiplier_projection: DMatrix<f64>,
    /// Current penalty weight.
    pub penalty: f64,
    /// Iterations run so far.
    pub iterations: usize,
    /// Frobenius norms of (feature residual, projection residual), one pair
    /// per iteration.
    pub residuals: Vec<(f64, f64)>,
    /// Penalty in effect at each iteration, recorded before growth.
    pub penalty_trace: Vec<f64>,
}

impl AdmmState {
    /// Warm start at an iterate: splits equal their targets exactly,
    /// multipliers zero. Starting from a zero iterate this reduces to the
    /// cold start.
    pub fn warm(projection: &DMatrix<f64>, projected: &DMatrix<f64>, penalty: f64) -> Self {
        Self {
            split_features: projected.clone(),
            split_projection: projection.clone(),
            multiplier_features: DMatrix::zeros(projected.nrows(), projected.ncols()),
            multiplier_projection: DMatrix::zeros(projection.nrows(), projection.ncols()),
            penalty,
            iterations: 0,
            residuals: Vec::new(),
            penalty_trace: Vec::new(),
        }
    }

    /// True when the most recent residual pair is below `tol` in both parts.
    pub fn converged(&self, tol: f64) -> bool {
        self.residuals
            .last()
            .is_some_and(|&(h, g)| h < tol && g < tol)
    }
}

/// Which projection a subproblem solve targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemTarget {
    /// The shared projection over all modalities' channels.
    Shared,
    /// The specific projection of one modality (1-based).
    Specific(usize),
}

/// Closed-form regressor update: minimizes the replicated-label squared
/// error plus the ridge, with every projection held fixed.
///
/// Solves `P (F F^T + alpha I) = Y F^T` for `F` the generalized projection
/// applied to the stacked data.
pub fn update_regressor(
    stack: &TrainingStack,
    theta: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Validation(alloc::format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if theta.ncols() != stack.total_channels() {
        return Err(Error::Dimension(alloc::format!(
            "projection has {} columns, stack has {} channels",
            theta.ncols(),
            stack.total_channels()
        )));
    }
    let features = stack.data_blocks().apply(theta);
    let labels = stack.replicated_one_hot();
    let ds = theta.nrows();
    let mut system = &features * features.transpose();
    for i in 0..ds {
        system[(i, i)] += alpha;
    }
    let chol = nalgebra::Cholesky::new(system).ok_or(Error::NonFinite {
        stage: "regressor update",
        iteration: 0,
    })?;
    Ok(chol.solve(&(&features * labels.transpose())).transpose())
}

/// Update of the feature-split variable.
///
/// Minimizes the squared error of the effective labels against the regressed
/// split, plus the multiplier coupling and penalty pulling the split toward
/// `projected` (the current projection applied to its data). Closed form:
/// `(P^T P + mu I)^{-1} (P^T y_eff + mu * projected - multiplier)`.
pub fn update_feature_split(
    state: &AdmmState,
    regressor: &DMatrix<f64>,
    effective_labels: &DMatrix<f64>,
    projected: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let ds = regressor.ncols();
    let mut system = regressor.transpose() * regressor;
    for i in 0..ds {
        system[(i, i)] += state.penalty;
    }
    let rhs = regressor.transpose() * effective_labels + projected * state.penalty
        - &state.multiplier_features;
    let chol = nalgebra::Cholesky::new(system).ok_or(Error::NonFinite {
        stage: "feature split update",
        iteration: 0,
    })?;
    Ok(chol.solve(&rhs))
}

/// Update of the projection variable.
///
/// Minimizes the two split couplings plus, when `alignment` is given, the
/// graph term `(beta/2) tr(T X L X^T T^T)`; `alignment` carries the
/// precomputed `X L X^T` and beta. Closed form: the right factor solves
/// against `mu (X X^T + I) + beta X L X^T`.
pub fn update_projection(
    state: &AdmmState,
    data: &DataBlocks<'_>,
    gram: &DMatrix<f64>,
    alignment: Option<(&DMatrix<f64>, f64)>,
) -> Result<DMatrix<f64>> {
    let mu = state.penalty;
    let numerator = data
        .apply_transpose(&(&state.split_features * mu + &state.multiplier_features))
        + &state.split_projection * mu
        + &state.multiplier_projection;

    let d = gram.nrows();
    let mut system = gram * mu;
    for i in 0..d {
        system[(i, i)] += mu;
    }
    if let Some((align, beta)) = alignment {
        system += align * beta;
    }
    let chol = nalgebra::Cholesky::new(system).ok_or(Error::NonFinite {
        stage: "projection update",
        iteration: 0,
    })?;
    // System is symmetric, so solving on the transpose side is exact.
    Ok(chol.solve(&numerator.transpose()).transpose())
}

/// Nearest partial isometry to `projection - multiplier / penalty`.
///
/// Thin SVD, singular values replaced by ones. For wide-or-square inputs the
/// result has orthonormal rows; for tall inputs orthonormal columns.
pub fn soc_project(
    projection: &DMatrix<f64>,
    multiplier: &DMatrix<f64>,
    penalty: f64,
) -> Result<DMatrix<f64>> {
    let target = projection - multiplier / penalty;
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "orthogonal projection",
            iteration: 0,
        });
    }
    let (u, v_t) = signed_svd(target)?;
    Ok(u * v_t)
}

/// Thin SVD factors with a deterministic sign convention: each left vector's
/// largest-magnitude entry is positive, the paired right vector flips along.
fn signed_svd(m: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let svd = m.try_svd(true, true, f64::EPSILON, 100_000).ok_or(Error::NonFinite {
        stage: "orthogonal projection",
        iteration: 0,
    })?;
    let mut u = svd.u.expect("left factor requested");
    let mut v_t = svd.v_t.expect("right factor requested");
    for c in 0..u.ncols() {
        let col = u.column(c);
        let mut lead = 0;
        for i in 1..col.nrows() {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            u.column_mut(c).neg_mut();
            v_t.row_mut(c).neg_mut();
        }
    }
    Ok((u, v_t))
}

/// Multiplier ascent at the current penalty. Returns the Frobenius norms of
/// the two residuals (features, projection) the step was based on.
pub fn update_multipliers(
    state: &mut AdmmState,
    projection: &DMatrix<f64>,
    projected: &DMatrix<f64>,
) -> (f64, f64) {
    let feature_residual = &state.split_features - projected;
    let projection_residual = &state.split_projection - projection;
    let norms = (feature_residual.norm(), projection_residual.norm());
    state.multiplier_features += feature_residual * state.penalty;
    state.multiplier_projection += projection_residual * state.penalty;
    norms
}

/// Penalty growth, clipped at the cap.
pub fn update_penalty(penalty: f64, growth: f64, cap: f64) -> f64 {
    let grown = penalty * growth;
    if grown > cap {
        cap
    } else {
        grown
    }
}

/// Precomputes the alignment matrix `X L X^T` blockwise against the virtual
/// block-diagonal data layout, symmetrized.
pub fn alignment_gram(stack: &TrainingStack, laplacian: &GraphMatrix) -> Result<DMatrix<f64>> {
    let k_count = stack.modality_count();
    let n = stack.sample_count();
    let total = stack.total_channels();
    if laplacian.nrows() != k_count * n || laplacian.ncols() != k_count * n {
        return Err(Error::Dimension(alloc::format!(
            "laplacian is {}x{}, expected {2}x{2}",
            laplacian.nrows(),
            laplacian.ncols(),
            k_count * n
        )));
    }

    // First L X^T, one column block of L at a time, then X times the result.
    let mut lx_t = DMatrix::zeros(k_count * n, total);
    for l in 1..=k_count {
        let block_t = stack.modality_data(l).transpose();
        let cols = laplacian.mul_columns_block((l - 1) * n, &block_t);
        lx_t.columns_mut(stack.channel_offset(l), block_t.ncols())
            .copy_from(&cols);
    }
    let mut out = DMatrix::zeros(total, total);
    for k in 1..=k_count {
        let x_k = stack.modality_data(k);
        out.rows_mut(stack.channel_offset(k), x_k.nrows())
            .copy_from(&(x_k * lx_t.rows((k - 1) * n, n)));
    }
    let out_t = out.transpose();
    Ok((out + out_t) * 0.5)
}

/// Solves one orthogonality-constrained subproblem by ADMM, warm-started at
/// the model's current iterate.
///
/// The shared target couples all modalities and carries the alignment term;
/// a specific target sees only its own modality's data and never the
/// alignment term, whatever beta says.
pub fn solve_subproblem(
    target: SubproblemTarget,
    model: &ProjectionModel,
    stack: &TrainingStack,
    laplacian: &GraphMatrix,
    hp: &HyperParams,
) -> Result<(DMatrix<f64>, AdmmState)> {
    match target {
        SubproblemTarget::Shared => {
            let data = stack.data_blocks();
            let specific_features = data.apply(&model.specific_concat());
            let effective = stack.replicated_one_hot() - model.regressor() * specific_features;
            let alignment = if hp.beta != 0.0 {
                Some(alignment_gram(stack, laplacian)?)
            } else {
                None
            };
            run_admm(
                model.shared().clone(),
                &data,
                &effective,
                model.regressor(),
                alignment.as_ref().map(|a| (a, hp.beta)),
                hp,
            )
        }
        SubproblemTarget::Specific(k) => {
            if k == 0 || k > stack.modality_count() {
                return Err(Error::Validation(alloc::format!(
                    "modality {k} is outside 1..={}",
                    stack.modality_count()
                )));
            }
            let x_k = stack.modality_data(k);
            let data = DataBlocks::single(x_k);
            let effective =
                stack.one_hot() - model.regressor() * (model.shared_block(k) * x_k);
            run_admm(
                model.specific(k).clone(),
                &data,
                &effective,
                model.regressor(),
                None,
                hp,
            )
        }
    }
}

fn run_admm(
    initial: DMatrix<f64>,
    data: &DataBlocks<'_>,
    effective_labels: &DMatrix<f64>,
    regressor: &DMatrix<f64>,
    alignment: Option<(&DMatrix<f64>, f64)>,
    hp: &HyperParams,
) -> Result<(DMatrix<f64>, AdmmState)> {
    let gram = data.gram();
    let mut theta = initial;
    let mut projected = data.apply(&theta);
    let mut state = AdmmState::warm(&theta, &projected, hp.penalty_init);

    for iteration in 1..=hp.max_admm {
        state.split_features =
            update_feature_split(&state, regressor, effective_labels, &projected)
                .map_err(|e| e.at_iteration(iteration))?;
        theta = update_projection(&state, data, &gram, alignment)
            .map_err(|e| e.at_iteration(iteration))?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "projection update",
                iteration,
            });
        }
        state.split_projection =
            soc_project(&theta, &state.multiplier_projection, state.penalty)
                .map_err(|e| e.at_iteration(iteration))?;
        projected = data.apply(&theta);

        let residuals = update_multipliers(&mut state, &theta, &projected);
        state.residuals.push(residuals);
        state.penalty_trace.push(state.penalty);
        state.iterations = iteration;
        state.penalty = update_penalty(state.penalty, hp.penalty_growth, hp.penalty_max);
        if residuals.0 < hp.admm_tol && residuals.1 < hp.admm_tol {
            break;
        }
    }
    Ok((theta, state))
}

/// Snapshot handed to the progress callback after each outer iteration.
#[derive(Debug)]
pub struct OuterProgress<'a> {
    /// 1-based outer iteration.
    pub iteration: usize,
    /// Objective after this iteration's updates.
    pub objective: f64,
    /// Relative change against the previous objective; absent on the first
    /// iteration.
    pub relative_delta: Option<f64>,
    /// Final residual pair of every subproblem this iteration: shared first,
    /// then one per modality.
    pub residuals: &'a [(f64, f64)],
}

/// Trains a model on the stack. See [`fit_with_progress`].
pub fn fit(stack: &TrainingStack, hp: &HyperParams) -> Result<(ProjectionModel, ConvergenceTrace)> {
    fit_with_progress(stack, hp, |_| {})
}

/// Trains a model, reporting each outer iteration through `progress`.
///
/// Specific projections start from per-modality locality-preserving
/// directions, the shared projection and regressor from zero. Each outer
/// iteration refreshes the regressor in closed form, then re-solves the
/// shared subproblem and every specific subproblem in order; the loop stops
/// when the relative objective change drops below `outer_tol` (a zero
/// previous objective counts as converged) or at `max_outer`.
///
/// Fitting is fully deterministic: no randomness is consumed anywhere.
pub fn fit_with_progress(
    stack: &TrainingStack,
    hp: &HyperParams,
    mut progress: impl FnMut(&OuterProgress<'_>),
) -> Result<(ProjectionModel, ConvergenceTrace)> {
    hp.validate()?;
    let total = stack.total_channels();
    if hp.subspace_dim > total {
        return Err(Error::SubspaceDim {
            requested: hp.subspace_dim,
            limit: total,
        });
    }

    let graph = JointGraph::build(stack, hp)?;
    let k_count = stack.modality_count();
    let block_dims: Vec<usize> = stack.blocks().iter().map(|b| b.channels()).collect();

    let mut specific = Vec::with_capacity(k_count);
    for block in stack.blocks() {
        let intra = crate::graph::intra_adjacency(block.data(), hp.q, hp.sigma)?;
        specific.push(lpp_init(block, &intra, hp.subspace_dim)?);
    }
    let mut model = ProjectionModel {
        shared: DMatrix::zeros(hp.subspace_dim, total),
        specific,
        regressor: DMatrix::zeros(stack.class_count(), hp.subspace_dim),
        block_dims,
    };

    let mut outer_objectives = Vec::new();
    let mut relative_deltas = Vec::new();
    let mut admm_residuals: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut terminated_by = Termination::MaxIterations;
    let mut previous: Option<f64> = None;

    for iteration in 1..=hp.max_outer {
        model.regressor = update_regressor(stack, &model.generalized(), hp.alpha)
            .map_err(|e| e.at_iteration(iteration))?;

        let mut residuals = Vec::with_capacity(k_count + 1);
        let (shared, state) =
            solve_subproblem(SubproblemTarget::Shared, &model, stack, graph.laplacian(), hp)?;
        model.shared = shared;
        residuals.push(state.residuals.last().copied().unwrap_or((0.0, 0.0)));

        // Specific solves are sequential by construction: each sees the
        // projections the previous ones just produced.
        for k in 1..=k_count {
            let (theta_k, state) = solve_subproblem(
                SubproblemTarget::Specific(k),
                &model,
                stack,
                graph.laplacian(),
                hp,
            )?;
            model.specific[k - 1] = theta_k;
            residuals.push(state.residuals.last().copied().unwrap_or((0.0, 0.0)));
        }

        let value = objective(&model, stack, graph.laplacian(), hp)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                stage: "objective evaluation",
                iteration,
            });
        }
        let delta = previous.map(|prev| {
            if prev == 0.0 {
                0.0
            } else {
                (value - prev).abs() / prev
            }
        });

        outer_objectives.push(value);
        if let Some(d) = delta {
            relative_deltas.push(d);
        }
        admm_residuals.push(residuals);
        progress(&OuterProgress {
            iteration,
            objective: value,
            relative_delta: delta,
            residuals: admm_residuals.last().expect("just pushed"),
        });

        if let Some(d) = delta {
            if d < hp.outer_tol {
                terminated_by = Termination::Tolerance;
                break;
            }
        }
        previous = Some(value);
    }

    let trace = ConvergenceTrace {
        outer_objectives,
        relative_deltas,
        admm_residuals,
        terminated_by,
    };
    Ok((model, trace))
}
