//! Sample-similarity graph over the stacked multimodal training set.
//!
//! The joint adjacency is a `KN x KN` grid of `N x N` blocks. Diagonal
//! blocks connect samples within one modality through a Gaussian kernel on
//! symmetrized q-nearest-neighbour edges; off-diagonal blocks connect
//! samples across modalities that share a class, weighted by inverse class
//! size. The Laplacian of this graph drives the alignment term that couples
//! the modalities in the shared projection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{HyperParams, TrainingStack};

/// Joint graphs up to this side length are stored dense; larger ones switch
/// to coordinate-sparse storage.
pub const DENSE_LIMIT: usize = 10_000;

/// Coordinate-sparse square-or-rectangular matrix.
///
/// Entries are kept canonical: sorted by (row, column), duplicate
/// coordinates merged by addition, exact zeros dropped. `get` is a binary
/// search, so lookups are cheap enough for validation passes.
#[derive(Debug, Clone, PartialEq)]
pub struct CooMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize, mut entries: Vec<(u32, u32, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            debug_assert!((i as usize) < nrows && (j as usize) < ncols);
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);
        Self {
            nrows,
            ncols,
            entries: merged,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Stored entries in canonical order.
    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i as u32, j as u32), |&(r, c, _)| (r, c))
            .map(|pos| self.entries[pos].2)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            out[(i as usize, j as usize)] = v;
        }
        out
    }

    pub fn row_sums(&self) -> DVector<f64> {
        let mut sums = DVector::zeros(self.nrows);
        for &(i, _, v) in &self.entries {
            sums[i as usize] += v;
        }
        sums
    }
}

/// Adjacency or Laplacian storage, dense below [`DENSE_LIMIT`] and sparse
/// above it. Both variants expose the handful of products the solver needs.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphMatrix {
    Dense(DMatrix<f64>),
    Sparse(CooMatrix),
}

impl GraphMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            GraphMatrix::Dense(m) => m.nrows(),
            GraphMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            GraphMatrix::Dense(m) => m.ncols(),
            GraphMatrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, GraphMatrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            GraphMatrix::Dense(m) => m[(i, j)],
            GraphMatrix::Sparse(m) => m.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            GraphMatrix::Dense(m) => m.clone(),
            GraphMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn row_sums(&self) -> DVector<f64> {
        match self {
            GraphMatrix::Dense(m) => {
                DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
            }
            GraphMatrix::Sparse(m) => m.row_sums(),
        }
    }

    /// `tr(F * self * F^T)` for `F` with one column per graph node.
    pub fn quadratic_trace(&self, f: &DMatrix<f64>) -> f64 {
        assert_eq!(f.ncols(), self.nrows(), "trace factor column count");
        match self {
            GraphMatrix::Dense(m) => (f * m).dot(f),
            GraphMatrix::Sparse(m) => m
                .entries
                .iter()
                .map(|&(i, j, v)| v * f.column(i as usize).dot(&f.column(j as usize)))
                .sum(),
        }
    }

    /// `self[:, col_start .. col_start + rhs.nrows()] * rhs`.
    ///
    /// This is the building block for alignment products against the virtual
    /// block-diagonal data matrix: only one column block of the graph is
    /// touched per call.
    pub fn mul_columns_block(&self, col_start: usize, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        assert!(col_start + rhs.nrows() <= self.ncols(), "column block range");
        match self {
            GraphMatrix::Dense(m) => m.columns(col_start, rhs.nrows()) * rhs,
            GraphMatrix::Sparse(m) => {
                let lo = col_start as u32;
                let hi = (col_start + rhs.nrows()) as u32;
                let mut out = DMatrix::zeros(m.nrows, rhs.ncols());
                for &(i, j, v) in &m.entries {
                    if j >= lo && j < hi {
                        let mut row = out.row_mut(i as usize);
                        row += rhs.row((j - lo) as usize) * v;
                    }
                }
                out
            }
        }
    }
}

/// Adjacency, degree vector, and Laplacian of the joint multimodal graph.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGraph {
    adjacency: GraphMatrix,
    degrees: DVector<f64>,
    laplacian: GraphMatrix,
    modality_count: usize,
    block_size: usize,
}

impl JointGraph {
    /// Builds the full graph for a training stack: per-modality kernel
    /// blocks on the diagonal, class-coupling blocks everywhere else.
    pub fn build(stack: &TrainingStack, hp: &HyperParams) -> Result<Self> {
        let adjacency = joint_adjacency(stack, hp)?;
        let (degrees, laplacian) = laplacian(&adjacency)?;
        Ok(Self {
            adjacency,
            degrees,
            laplacian,
            modality_count: stack.modality_count(),
            block_size: stack.sample_count(),
        })
    }

    pub fn adjacency(&self) -> &GraphMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn laplacian(&self) -> &GraphMatrix {
        &self.laplacian
    }

    pub fn modality_count(&self) -> usize {
        self.modality_count
    }

    /// Samples per modality (side length of one block).
    pub fn block_size(&self) -> usize {
        self.block_size
    }
}

/// Gaussian-kernel adjacency on the union of q-nearest-neighbour edges.
///
/// An edge (i, j) exists when j is among the q nearest neighbours of i or
/// vice versa; its weight is `exp(-||x_i - x_j||^2 / sigma^2)`. Distance
/// ties are broken by smaller column index. The diagonal is zero.
pub fn intra_adjacency(data: &DMatrix<f64>, q: usize, sigma: f64) -> Result<DMatrix<f64>> {
    let n = data.ncols();
    if q == 0 || q >= n {
        return Err(Error::Validation(format!(
            "q = {q} is outside 1..{n} (need at least q + 1 samples)"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Validation(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }

    let mut dist2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (data.column(i) - data.column(j)).norm_squared();
            dist2[(i, j)] = d;
            dist2[(j, i)] = d;
        }
    }

    let mut w = DMatrix::zeros(n, n);
    let inv = 1.0 / (sigma * sigma);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        // Ties on distance fall back to the smaller index.
        order.sort_unstable_by(|&a, &b| {
            dist2[(i, a)].total_cmp(&dist2[(i, b)]).then(a.cmp(&b))
        });
        for &j in &order[..q] {
            let weight = libm::exp(-dist2[(i, j)] * inv);
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }
    }
    Ok(w)
}

/// Class-coupling adjacency: entry (i, j) is `1 / N_c` when both samples
/// carry class c, zero otherwise. The diagonal is populated too; whether it
/// survives depends on where the block lands in the joint layout.
pub fn inter_adjacency(labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    let n = labels.len();
    let mut counts = vec![0usize; classes];
    for (j, &label) in labels.iter().enumerate() {
        if label == 0 || label > classes {
            return Err(Error::Validation(format!(
                "label {label} at sample {j} is outside 1..={classes}"
            )));
        }
        counts[label - 1] += 1;
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let weight = 1.0 / counts[labels[i] - 1] as f64;
        for j in 0..n {
            if labels[j] == labels[i] {
                w[(i, j)] = weight;
            }
        }
    }
    Ok(w)
}

/// Assembles the `KN x KN` joint adjacency: intra blocks on the diagonal,
/// one shared inter block everywhere else, zero main diagonal.
pub fn joint_adjacency(stack: &TrainingStack, hp: &HyperParams) -> Result<GraphMatrix> {
    hp.validate()?;
    let k_count = stack.modality_count();
    let n = stack.sample_count();
    let kn = k_count * n;

    let intra: Vec<DMatrix<f64>> = (1..=k_count)
        .map(|k| intra_adjacency(stack.modality_data(k), hp.q, hp.sigma))
        .collect::<Result<_>>()?;
    let inter = inter_adjacency(stack.labels(), stack.class_count())?;

    if kn <= DENSE_LIMIT {
        let mut w = DMatrix::zeros(kn, kn);
        for (k, own) in intra.iter().enumerate() {
            for l in 0..k_count {
                let block = if k == l { own } else { &inter };
                w.view_mut((k * n, l * n), (n, n)).copy_from(block);
            }
        }
        Ok(GraphMatrix::Dense(w))
    } else {
        let mut entries: Vec<(u32, u32, f64)> = Vec::new();
        for (k, own) in intra.iter().enumerate() {
            for l in 0..k_count {
                let block = if k == l { own } else { &inter };
                let (ro, co) = ((k * n) as u32, (l * n) as u32);
                for j in 0..n {
                    for i in 0..n {
                        let v = block[(i, j)];
                        if v != 0.0 {
                            entries.push((ro + i as u32, co + j as u32, v));
                        }
                    }
                }
            }
        }
        Ok(GraphMatrix::Sparse(CooMatrix::new(kn, kn, entries)))
    }
}

/// Degree vector and Laplacian `L = D - W` of a validated adjacency.
///
/// The input must be square, symmetric to 1e-12 in the max norm,
/// nonnegative, and zero on the diagonal.
pub fn laplacian(w: &GraphMatrix) -> Result<(DVector<f64>, GraphMatrix)> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Dimension(format!(
            "adjacency is {}x{}, must be square",
            n,
            w.ncols()
        )));
    }

    match w {
        GraphMatrix::Dense(m) => {
            for i in 0..n {
                if m[(i, i)] != 0.0 {
                    return Err(Error::Validation(format!(
                        "adjacency has nonzero diagonal at {i}"
                    )));
                }
                for j in (i + 1)..n {
                    if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                        return Err(Error::Validation(format!(
                            "adjacency is asymmetric at ({i}, {j})"
                        )));
                    }
                }
            }
            if m.iter().any(|&v| v < 0.0) {
                return Err(Error::Validation("adjacency has negative weights".into()));
            }
            let degrees = w.row_sums();
            let mut l = -m.clone();
            for i in 0..n {
                l[(i, i)] = degrees[i];
            }
            Ok((degrees, GraphMatrix::Dense(l)))
        }
        GraphMatrix::Sparse(m) => {
            for &(i, j, v) in &m.entries {
                if v < 0.0 {
                    return Err(Error::Validation("adjacency has negative weights".into()));
                }
                if i == j {
                    return Err(Error::Validation(format!(
                        "adjacency has nonzero diagonal at {i}"
                    )));
                }
                if (v - m.get(j as usize, i as usize)).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "adjacency is asymmetric at ({i}, {j})"
                    )));
                }
            }
            let degrees = m.row_sums();
            let mut entries: Vec<(u32, u32, f64)> =
                m.entries.iter().map(|&(i, j, v)| (i, j, -v)).collect();
            for i in 0..n {
                if degrees[i] != 0.0 {
                    entries.push((i as u32, i as u32, degrees[i]));
                }
            }
            Ok((degrees, GraphMatrix::Sparse(CooMatrix::new(n, n, entries))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModalityBlock;
    use nalgebra::dmatrix;

    #[test]
    fn kernel_weight_values() {
        // Duplicate columns sit at distance zero: weight exactly 1.
        let data = dmatrix![0.0, 0.0, 5.0;
                            1.0, 1.0, 5.0];
        let w = intra_adjacency(&data, 1, 2.0).unwrap();
        assert_eq!(w[(0, 1)], 1.0);
        assert_eq!(w[(1, 0)], 1.0);
        assert_eq!(w[(0, 0)], 0.0);

        // A pair at distance exactly sigma gets weight exp(-1).
        let data = dmatrix![0.0, 3.0];
        let w = intra_adjacency(&data, 1, 3.0).unwrap();
        assert!((w[(0, 1)] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn line_graph_with_union_symmetrization() {
        let data = dmatrix![0.0, 1.0, 2.0, 3.0];
        let w = intra_adjacency(&data, 1, 1.0).unwrap();
        let e = (-1.0f64).exp();
        // Each interior point picks its left neighbour on the tie (smaller
        // index), the union keeps every consecutive pair connected.
        let expected = dmatrix![0.0, e, 0.0, 0.0;
                                e, 0.0, e, 0.0;
                                0.0, e, 0.0, e;
                                0.0, 0.0, e, 0.0];
        assert_eq!(w, expected);
    }

    #[test]
    fn intra_input_validation() {
        let data = dmatrix![0.0, 1.0];
        assert!(intra_adjacency(&data, 2, 1.0).is_err());
        assert!(intra_adjacency(&data, 0, 1.0).is_err());
        assert!(intra_adjacency(&data, 1, 0.0).is_err());
        assert!(intra_adjacency(&data, 1, -1.0).is_err());
    }

    #[test]
    fn rotation_invariance_of_intra() {
        let data = DMatrix::from_fn(2, 6, |i, j| ((3 * i + 7 * j) % 5) as f64 - 1.5);
        // A plain rotation by 0.3 radians.
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = dmatrix![c, -s; s, c];
        let a = intra_adjacency(&data, 2, 1.3).unwrap();
        let b = intra_adjacency(&(rot * &data), 2, 1.3).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }

    #[test]
    fn class_coupling_weights() {
        let w = inter_adjacency(&[1, 1, 1, 1], 1).unwrap();
        assert!(w.iter().all(|&v| v == 0.25));

        let w = inter_adjacency(&[1, 2], 2).unwrap();
        assert_eq!(w, dmatrix![1.0, 0.0; 0.0, 1.0]);

        let w = inter_adjacency(&[1, 1, 2], 2).unwrap();
        assert_eq!(w[(0, 1)], 0.5);
        assert_eq!(w[(0, 2)], 0.0);
        assert_eq!(w[(2, 2)], 1.0);

        // Row sums over a class's own columns hit 1 exactly by construction.
        let labels = [1usize, 2, 1, 3, 2, 1];
        let w = inter_adjacency(&labels, 3).unwrap();
        for i in 0..labels.len() {
            let same: f64 = (0..labels.len())
                .filter(|&j| labels[j] == labels[i])
                .map(|j| w[(i, j)])
                .sum();
            assert!((same - 1.0).abs() < 1e-15);
        }

        assert!(inter_adjacency(&[1, 5], 2).is_err());
    }

    #[test]
    fn laplacian_small_cases() {
        let w = GraphMatrix::Dense(dmatrix![0.0, 1.0; 1.0, 0.0]);
        let (d, l) = laplacian(&w).unwrap();
        assert_eq!(d, nalgebra::dvector![1.0, 1.0]);
        assert_eq!(l.to_dense(), dmatrix![1.0, -1.0; -1.0, 1.0]);

        let zero = GraphMatrix::Dense(DMatrix::zeros(3, 3));
        let (d, l) = laplacian(&zero).unwrap();
        assert_eq!(d, nalgebra::dvector![0.0, 0.0, 0.0]);
        assert_eq!(l.to_dense(), DMatrix::zeros(3, 3));

        let asym = GraphMatrix::Dense(dmatrix![0.0, 1.0; 0.5, 0.0]);
        assert!(laplacian(&asym).is_err());
        let diag = GraphMatrix::Dense(dmatrix![0.5, 0.0; 0.0, 0.0]);
        assert!(laplacian(&diag).is_err());
        let neg = GraphMatrix::Dense(dmatrix![0.0, -1.0; -1.0, 0.0]);
        assert!(laplacian(&neg).is_err());
    }

    #[test]
    fn laplacian_row_sums_vanish_on_random_graphs() {
        // Deterministic pseudo-random symmetric nonnegative W.
        let n = 8;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (((i * 31 + j * 17) % 19) as f64) / 19.0;
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        let (_, l) = laplacian(&GraphMatrix::Dense(w)).unwrap();
        let sums = l.to_dense() * DVector::from_element(n, 1.0);
        assert!(sums.amax() <= 1e-10);
    }

    fn tiny_stack() -> TrainingStack {
        let x1 = dmatrix![0.0, 1.0, 4.0;
                          0.0, 0.5, 4.0];
        let x2 = dmatrix![1.0, 1.1, -3.0];
        TrainingStack::new(
            vec![
                ModalityBlock::new(1, "a", x1).unwrap(),
                ModalityBlock::new(2, "b", x2).unwrap(),
            ],
            vec![1, 1, 2],
            2,
        )
        .unwrap()
    }

    /// The assembled joint matrix must match a brute-force construction that
    /// never goes through the block plumbing.
    #[test]
    fn joint_matches_bruteforce() {
        let stack = tiny_stack();
        let hp = HyperParams {
            q: 1,
            sigma: 1.0,
            ..HyperParams::default()
        };
        let joint = joint_adjacency(&stack, &hp).unwrap();
        assert!(!joint.is_sparse());
        let w = joint.to_dense();

        let n = 3;
        let labels = [1usize, 1, 2];
        let counts = [2usize, 1];
        for i in 0..2 * n {
            for j in 0..2 * n {
                let (k, a) = (i / n, i % n);
                let (l, b) = (j / n, j % n);
                let expected = if k == l {
                    let x = stack.modality_data(k + 1);
                    if a == b {
                        0.0
                    } else {
                        let d2 = (x.column(a) - x.column(b)).norm_squared();
                        // q = 1: edge iff b is a's single nearest or vice versa.
                        let nearest = |p: usize| {
                            (0..n)
                                .filter(|&t| t != p)
                                .min_by(|&s, &t| {
                                    let ds = (x.column(p) - x.column(s)).norm_squared();
                                    let dt = (x.column(p) - x.column(t)).norm_squared();
                                    ds.total_cmp(&dt).then(s.cmp(&t))
                                })
                                .unwrap()
                        };
                        if nearest(a) == b || nearest(b) == a {
                            (-d2).exp()
                        } else {
                            0.0
                        }
                    }
                } else if labels[a] == labels[b] {
                    1.0 / counts[labels[a] - 1] as f64
                } else {
                    0.0
                };
                assert!(
                    (w[(i, j)] - expected).abs() < 1e-15,
                    "mismatch at ({i}, {j}): {} vs {expected}",
                    w[(i, j)]
                );
            }
        }

        // Exact symmetry and zero diagonal of the assembly.
        assert_eq!(w, w.transpose());
        assert!((0..2 * n).all(|i| w[(i, i)] == 0.0));
    }

    #[test]
    fn joint_graph_invariants() {
        let stack = tiny_stack();
        let hp = HyperParams {
            q: 1,
            ..HyperParams::default()
        };
        let graph = JointGraph::build(&stack, &hp).unwrap();
        assert_eq!(graph.modality_count(), 2);
        assert_eq!(graph.block_size(), 3);

        let l = graph.laplacian().to_dense();
        let ones = DVector::from_element(6, 1.0);
        assert!((&l * &ones).amax() <= 1e-10);

        // PSD up to roundoff on a handful of fixed probe vectors.
        for t in 0..20 {
            let x = DVector::from_fn(6, |i, _| (((i * 7 + t * 13) % 11) as f64) - 5.0);
            let quad = (x.transpose() * &l * &x)[(0, 0)];
            assert!(quad >= -1e-10 * x.norm_squared());
        }
    }

    /// Sparse and dense assemblies of the same graph must agree entrywise,
    /// and the sparse products must match their dense counterparts.
    #[test]
    fn sparse_representation_agrees_with_dense() {
        let stack = tiny_stack();
        let hp = HyperParams {
            q: 1,
            ..HyperParams::default()
        };
        let dense = joint_adjacency(&stack, &hp).unwrap();
        let GraphMatrix::Dense(w) = &dense else {
            panic!("expected dense layout")
        };

        let mut entries = Vec::new();
        for j in 0..w.ncols() {
            for i in 0..w.nrows() {
                if w[(i, j)] != 0.0 {
                    entries.push((i as u32, j as u32, w[(i, j)]));
                }
            }
        }
        let sparse = GraphMatrix::Sparse(CooMatrix::new(w.nrows(), w.ncols(), entries));
        assert_eq!(sparse.to_dense(), *w);
        assert_eq!(sparse.row_sums(), dense.row_sums());

        let f = DMatrix::from_fn(2, 6, |i, j| (i as f64) - 0.3 * (j as f64));
        assert!((sparse.quadratic_trace(&f) - dense.quadratic_trace(&f)).abs() < 1e-12);

        let rhs = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64 * 0.5);
        assert_eq!(
            sparse.mul_columns_block(3, &rhs),
            dense.mul_columns_block(3, &rhs)
        );

        let (ds, ls) = laplacian(&sparse).unwrap();
        let (dd, ld) = laplacian(&dense).unwrap();
        assert_eq!(ds, dd);
        assert!((ls.to_dense() - ld.to_dense()).amax() <= 1e-15);
    }

    #[test]
    fn coo_canonicalization() {
        let m = CooMatrix::new(
            3,
            3,
            vec![(2, 1, 0.5), (0, 0, 1.0), (2, 1, 0.25), (1, 2, 0.0)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(2, 1), 0.75);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.get(0, 0), 1.0);
    }
}
