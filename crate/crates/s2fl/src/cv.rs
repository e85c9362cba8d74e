//! Stratified cross-validation over a hyperparameter grid.
//!
//! The fold partition is drawn once from the master seed before any grid
//! point runs, and every fit is deterministic, so evaluating grid points in
//! any order (or in parallel) gives bitwise-identical results.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use s2fl_core::classify::{extract_features, nn_classify, evaluate};
use s2fl_core::{fit, EmbedMode, EmbeddingConfig, Fusion, HyperParams, ModalityBlock, TrainingStack};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub q: Vec<usize>,
    pub ds: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            alpha: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
            beta: vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2],
            sigma: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
            q: (1..=10).map(|i| i * 5).collect(),
            ds: (1..=10).map(|i| i * 5).collect(),
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.alpha.is_empty()
            || self.beta.is_empty()
            || self.sigma.is_empty()
            || self.q.is_empty()
            || self.ds.is_empty()
        {
            return Err(Error::Invalid("every grid list must be nonempty".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.alpha.len() * self.beta.len() * self.sigma.len() * self.q.len() * self.ds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub q: usize,
    pub ds: usize,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub point: GridPoint,
    /// Per-fold validation overall accuracy; `None` when that fold's fit
    /// failed (for example an infeasible subspace dimension).
    pub fold_oa: Vec<Option<f64>>,
    pub mean_oa: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub rows: Vec<GridOutcome>,
    pub best: GridPoint,
    pub best_mean: f64,
    pub folds: Vec<Vec<usize>>,
}

/// Shuffles each class once, then deals samples to folds from a cursor
/// that keeps rotating across classes, so class proportions are preserved
/// and remainders spread round-robin.
pub fn stratified_folds(
    labels: &[usize],
    classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Invalid("cross-validation needs at least 2 folds".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut cursor = 0usize;
    for class in 1..=classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Invalid(format!(
                "class {class} has only {} training samples but {folds} folds were requested; \
                 use --folds {} or fewer",
                members.len(),
                members.len().max(2)
            )));
        }
        members.shuffle(&mut rng);
        for idx in members {
            out[cursor].push(idx);
            cursor = (cursor + 1) % folds;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

fn stack_subset(stack: &TrainingStack, keep: &[usize]) -> Result<TrainingStack> {
    let labels: Vec<usize> = keep.iter().map(|&i| stack.labels()[i]).collect();
    let blocks = stack
        .blocks()
        .iter()
        .map(|b| {
            let src = b.data();
            let data = DMatrix::from_fn(src.nrows(), keep.len(), |r, c| src[(r, keep[c])]);
            ModalityBlock::new(b.id(), b.name().to_string(), data).map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    TrainingStack::new(blocks, labels, stack.class_count()).map_err(Error::from)
}

fn block_subset(stack: &TrainingStack, keep: &[usize]) -> Vec<DMatrix<f64>> {
    stack
        .blocks()
        .iter()
        .map(|b| {
            let src = b.data();
            DMatrix::from_fn(src.nrows(), keep.len(), |r, c| src[(r, keep[c])])
        })
        .collect()
}

/// `a` strictly better than `b`: higher mean accuracy, ties resolved
/// toward the smaller subspace, then smaller alpha, beta, sigma, q.
fn better(a: (&GridPoint, f64), b: (&GridPoint, f64)) -> bool {
    if a.1 != b.1 {
        return a.1 > b.1;
    }
    let ka = (a.0.ds, a.0.alpha, a.0.beta, a.0.sigma, a.0.q);
    let kb = (b.0.ds, b.0.alpha, b.0.beta, b.0.sigma, b.0.q);
    ka < kb
}

fn evaluate_point(
    stack: &TrainingStack,
    folds: &[Vec<usize>],
    point: &GridPoint,
    base: &HyperParams,
    config: &EmbeddingConfig,
) -> GridOutcome {
    let hp = HyperParams {
        alpha: point.alpha,
        beta: point.beta,
        sigma: point.sigma,
        q: point.q,
        subspace_dim: point.ds,
        ..base.clone()
    };

    let n = stack.sample_count();
    let mut fold_oa = Vec::with_capacity(folds.len());
    for fold in folds {
        let train_idx: Vec<usize> = (0..n).filter(|i| !fold.contains(i)).collect();
        let oa = (|| -> Result<f64> {
            let train = stack_subset(stack, &train_idx)?;
            let (model, _) = fit(&train, &hp)?;

            let train_parts = block_subset(stack, &train_idx);
            let train_refs: Vec<&DMatrix<f64>> = train_parts.iter().collect();
            let train_features = extract_features(&model, &train_refs, config)?;

            let val_parts = block_subset(stack, fold);
            let val_refs: Vec<&DMatrix<f64>> = val_parts.iter().collect();
            let val_features = extract_features(&model, &val_refs, config)?;

            let predictions = nn_classify(&train_features, train.labels(), &val_features)?;
            let val_labels: Vec<usize> = fold.iter().map(|&i| stack.labels()[i]).collect();
            let report = evaluate(&predictions, &val_labels, stack.class_count())?;
            Ok(report.overall_accuracy)
        })();
        fold_oa.push(oa.ok());
    }

    let mean_oa = if fold_oa.iter().all(Option::is_some) {
        Some(fold_oa.iter().map(|o| o.unwrap()).sum::<f64>() / fold_oa.len() as f64)
    } else {
        None
    };
    GridOutcome {
        point: *point,
        fold_oa,
        mean_oa,
    }
}

pub fn cross_validate(
    stack: &TrainingStack,
    grid: &GridSpec,
    folds: usize,
    base: &HyperParams,
) -> Result<CvResult> {
    grid.validate()?;
    let partition = stratified_folds(stack.labels(), stack.class_count(), folds, base.seed)?;
    let config = EmbeddingConfig::all(
        stack.modality_count(),
        EmbedMode::Both,
        Fusion::Concatenate,
    )
    .map_err(Error::from)?;

    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(GridPoint, f64)> = None;
    for &ds in &grid.ds {
        for &alpha in &grid.alpha {
            for &beta in &grid.beta {
                for &sigma in &grid.sigma {
                    for &q in &grid.q {
                        let point = GridPoint {
                            alpha,
                            beta,
                            sigma,
                            q,
                            ds,
                        };
                        let outcome = evaluate_point(stack, &partition, &point, base, &config);
                        if let Some(mean) = outcome.mean_oa {
                            let candidate = (&point, mean);
                            if best.is_none()
                                || better(candidate, (&best.as_ref().unwrap().0, best.as_ref().unwrap().1))
                            {
                                best = Some((point, mean));
                            }
                        }
                        rows.push(outcome);
                    }
                }
            }
        }
    }

    let (best, best_mean) = best.ok_or_else(|| {
        Error::Invalid(
            "every grid point failed; the grid may be infeasible for this dataset \
             (check ds against the total channel count and q against the fold size)"
                .into(),
        )
    })?;
    Ok(CvResult {
        rows,
        best,
        best_mean,
        folds: partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_and_stratify() {
        // 12 of class 1, 9 of class 2, 6 of class 3
        let labels: Vec<usize> = [vec![1; 12], vec![2; 9], vec![3; 6]].concat();
        let folds = stratified_folds(&labels, 3, 3, 99).unwrap();

        let mut seen = vec![false; labels.len()];
        for fold in &folds {
            for &i in fold {
                assert!(!seen[i], "sample {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));

        for fold in &folds {
            let c1 = fold.iter().filter(|&&i| labels[i] == 1).count();
            let c2 = fold.iter().filter(|&&i| labels[i] == 2).count();
            let c3 = fold.iter().filter(|&&i| labels[i] == 3).count();
            assert_eq!((c1, c2, c3), (4, 3, 2));
        }
    }

    #[test]
    fn remainders_rotate_across_folds() {
        // 7 samples, 3 folds: fold sizes must be a permutation of 3,2,2
        let labels = vec![1; 7];
        let folds = stratified_folds(&labels, 1, 3, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [2, 2, 3]);
    }

    #[test]
    fn folds_are_seed_deterministic() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3 + 1).collect();
        let a = stratified_folds(&labels, 3, 5, 7).unwrap();
        let b = stratified_folds(&labels, 3, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = stratified_folds(&labels, 3, 5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn small_classes_get_a_helpful_error() {
        let labels = vec![1, 1, 1, 1, 2, 2];
        let err = stratified_folds(&labels, 2, 4, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("class 2") && msg.contains("--folds 2"), "{msg}");
    }

    #[test]
    fn selection_prefers_accuracy_then_small_simple_points() {
        let a = GridPoint { alpha: 0.1, beta: 0.1, sigma: 1.0, q: 10, ds: 10 };
        let b = GridPoint { alpha: 0.1, beta: 0.1, sigma: 1.0, q: 10, ds: 5 };
        assert!(better((&a, 0.9), (&b, 0.8)));
        assert!(better((&b, 0.9), (&a, 0.9)), "smaller ds wins ties");

        let c = GridPoint { alpha: 0.01, ..a };
        assert!(better((&c, 0.9), (&a, 0.9)), "smaller alpha wins after ds");
        let d = GridPoint { q: 5, ..a };
        assert!(better((&d, 0.9), (&a, 0.9)), "q breaks the final tie");
    }
}
