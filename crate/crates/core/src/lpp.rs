//! Locality-preserving initialization for the per-modality projections.
//!
//! Rows of the returned projection are generalized eigenvectors of the pair
//! (X L X^T, X D X^T) built from a modality's intra graph, taken at the
//! smallest eigenvalues: the directions along which graph neighbours stay
//! closest. The right-hand matrix is reduced by Cholesky so a plain
//! symmetric eigensolver suffices.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModalityBlock;

/// Initial projection for one modality, `subspace_dim x channels`.
///
/// The right-hand metric `X D X^T` is ridge-shifted before factorization so
/// rank-deficient data (more channels than samples, constant bands, an empty
/// graph) never hard-fails. Each eigenvector is sign-fixed so its
/// largest-magnitude entry is positive; ties go to the first such entry.
/// When `subspace_dim` exceeds the channel count the extra rows are zero.
pub fn lpp_init(
    block: &ModalityBlock,
    intra: &DMatrix<f64>,
    subspace_dim: usize,
) -> Result<DMatrix<f64>> {
    let x = block.data();
    let n = x.ncols();
    let d = x.nrows();
    if intra.nrows() != n || intra.ncols() != n {
        return Err(Error::Dimension(alloc::format!(
            "intra graph is {}x{}, expected {n}x{n}",
            intra.nrows(),
            intra.ncols()
        )));
    }
    if subspace_dim == 0 {
        return Err(Error::Validation("subspace_dim must be at least 1".into()));
    }

    let degrees = DVector::from_iterator(n, intra.row_iter().map(|r| r.sum()));
    // B = X D X^T and A = X L X^T = B - X W X^T, both symmetrized to kill
    // accumulation asymmetry before factorization.
    let mut xd = x.clone();
    for j in 0..n {
        xd.column_mut(j).scale_mut(degrees[j]);
    }
    let b = symmetrize(&xd * x.transpose());
    let a = symmetrize(&b - (x * intra) * x.transpose());

    // Ridge shift relative to the metric's scale; absolute fallback when the
    // graph (hence the trace) is degenerate. Escalate if Cholesky still
    // refuses, which can only happen through heavy cancellation.
    let mut shift = 1e-10 * b.trace() / d as f64;
    if shift.is_nan() || shift <= 0.0 {
        shift = 1e-10;
    }
    let mut chol = None;
    for _ in 0..12 {
        let mut shifted = b.clone();
        for i in 0..d {
            shifted[(i, i)] += shift;
        }
        if let Some(c) = nalgebra::Cholesky::new(shifted) {
            chol = Some(c);
            break;
        }
        shift *= 10.0;
    }
    let Some(chol) = chol else {
        return Err(Error::NonFinite {
            stage: "initialization metric factorization",
            iteration: 0,
        });
    };

    // Reduce the pencil: C = L^-1 A L^-T is symmetric with the same
    // eigenvalues; eigenvectors map back through a = L^-T u and arrive
    // B-orthonormal because u is orthonormal.
    let l = chol.l();
    let half = l
        .solve_lower_triangular(&a)
        .ok_or(Error::NonFinite {
            stage: "initialization reduction",
            iteration: 0,
        })?;
    let c = l
        .solve_lower_triangular(&half.transpose())
        .ok_or(Error::NonFinite {
            stage: "initialization reduction",
            iteration: 0,
        })?;
    let eig = nalgebra::SymmetricEigen::new(symmetrize(c));

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });

    let mut out = DMatrix::zeros(subspace_dim, d);
    for (row, &which) in order.iter().take(subspace_dim.min(d)).enumerate() {
        let u = eig.eigenvectors.column(which).into_owned();
        let mut a_vec = l.tr_solve_lower_triangular(&u).ok_or(Error::NonFinite {
            stage: "initialization back-substitution",
            iteration: 0,
        })?;
        // Largest-magnitude entry positive, first one on ties.
        let mut lead = 0;
        for i in 1..d {
            if a_vec[i].abs() > a_vec[lead].abs() {
                lead = i;
            }
        }
        if a_vec[lead] < 0.0 {
            a_vec.neg_mut();
        }
        out.row_mut(row).copy_from(&a_vec.transpose());
    }
    Ok(out)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}
