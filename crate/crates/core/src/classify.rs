//! Embedding extraction, nearest-neighbour classification, and metrics.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{ModalityBlock, ProjectionModel, TrainingStack};

/// Which part of the model produces an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedMode {
    /// Shared projection only.
    Shared,
    /// Modality-specific projection only.
    Specific,
    /// Their sum, the full projection.
    Both,
}

/// How per-modality embeddings combine into one feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    /// Vertical stack; dimension grows with the modality count.
    Concatenate,
    /// Elementwise sum.
    Sum,
    /// Elementwise mean.
    Mean,
}

/// Embedding recipe: mode, fusion rule, and the (1-based) modalities to use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingConfig {
    pub mode: EmbedMode,
    pub fusion: Fusion,
    pub modalities: Vec<usize>,
}

impl EmbeddingConfig {
    pub fn new(mode: EmbedMode, fusion: Fusion, modalities: Vec<usize>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::Validation(
                "at least one modality must be selected".into(),
            ));
        }
        for (pos, &m) in modalities.iter().enumerate() {
            if m == 0 {
                return Err(Error::Validation("modality ids are 1-based".into()));
            }
            if modalities[..pos].contains(&m) {
                return Err(Error::Validation(alloc::format!(
                    "modality {m} selected twice"
                )));
            }
        }
        Ok(Self {
            mode,
            fusion,
            modalities,
        })
    }

    /// Config covering modalities `1..=count`.
    pub fn all(count: usize, mode: EmbedMode, fusion: Fusion) -> Result<Self> {
        Self::new(mode, fusion, (1..=count).collect())
    }
}

/// Embeds one modality's data through the chosen part of the model.
pub fn embed_modality(
    model: &ProjectionModel,
    data: &DMatrix<f64>,
    k: usize,
    mode: EmbedMode,
) -> Result<DMatrix<f64>> {
    if k == 0 || k > model.modality_count() {
        return Err(Error::Validation(alloc::format!(
            "modality {k} is outside 1..={}",
            model.modality_count()
        )));
    }
    let expected = model.block_dims()[k - 1];
    if data.nrows() != expected {
        return Err(Error::Dimension(alloc::format!(
            "modality {k} data has {} channels, model expects {expected}",
            data.nrows()
        )));
    }
    Ok(match mode {
        EmbedMode::Shared => model.shared_block(k) * data,
        EmbedMode::Specific => model.specific(k) * data,
        // One product through the summed projection, not a sum of products.
        EmbedMode::Both => model.combined_block(k) * data,
    })
}

/// Combines per-modality embeddings into one feature matrix.
pub fn fuse(parts: &[DMatrix<f64>], fusion: Fusion) -> Result<DMatrix<f64>> {
    let Some(first) = parts.first() else {
        return Err(Error::Validation("nothing to fuse".into()));
    };
    let cols = first.ncols();
    if parts.iter().any(|p| p.ncols() != cols) {
        return Err(Error::Dimension(
            "fused embeddings must share their sample count".into(),
        ));
    }
    match fusion {
        Fusion::Concatenate => {
            let rows = parts.iter().map(|p| p.nrows()).sum();
            let mut out = DMatrix::zeros(rows, cols);
            let mut at = 0;
            for p in parts {
                out.rows_mut(at, p.nrows()).copy_from(p);
                at += p.nrows();
            }
            Ok(out)
        }
        Fusion::Sum | Fusion::Mean => {
            if parts.iter().any(|p| p.nrows() != first.nrows()) {
                return Err(Error::Dimension(
                    "sum and mean fusion need equal embedding dimensions".into(),
                ));
            }
            let mut out = first.clone();
            for p in &parts[1..] {
                out += p;
            }
            if fusion == Fusion::Mean {
                out /= parts.len() as f64;
            }
            Ok(out)
        }
    }
}

/// Embeds the given per-modality data and fuses the result.
///
/// `data[i]` belongs to `config.modalities[i]`; all matrices must share
/// their column (sample) count.
pub fn extract_features(
    model: &ProjectionModel,
    data: &[&DMatrix<f64>],
    config: &EmbeddingConfig,
) -> Result<DMatrix<f64>> {
    if data.len() != config.modalities.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} data blocks for {} configured modalities",
            data.len(),
            config.modalities.len()
        )));
    }
    let parts: Vec<DMatrix<f64>> = config
        .modalities
        .iter()
        .zip(data)
        .map(|(&k, x)| embed_modality(model, x, k, config.mode))
        .collect::<Result<_>>()?;
    fuse(&parts, config.fusion)
}

/// 1-nearest-neighbour labels for every test column.
///
/// Squared Euclidean distances; exact ties keep the smallest training index.
pub fn nn_classify(
    train: &DMatrix<f64>,
    train_labels: &[usize],
    test: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train.ncols() == 0 {
        return Err(Error::Validation("training set is empty".into()));
    }
    if train.ncols() != train_labels.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} training columns, {} labels",
            train.ncols(),
            train_labels.len()
        )));
    }
    if train.nrows() != test.nrows() {
        return Err(Error::Dimension(alloc::format!(
            "train features have {} dimensions, test has {}",
            train.nrows(),
            test.nrows()
        )));
    }
    let dims = train.nrows();
    let mut predictions = Vec::with_capacity(test.ncols());
    for j in 0..test.ncols() {
        let probe = test.column(j);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for i in 0..train.ncols() {
            let candidate = train.column(i);
            let mut dist = 0.0;
            for r in 0..dims {
                let diff = candidate[r] - probe[r];
                dist += diff * diff;
            }
            // Strict improvement only: ties stay with the earlier index.
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        predictions.push(train_labels[best]);
    }
    Ok(predictions)
}

/// Confusion matrix and summary metrics of a prediction run.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Rows index the reference class, columns the predicted class.
    pub confusion: DMatrix<u64>,
    /// Trace over total.
    pub overall_accuracy: f64,
    /// Mean per-class recall over classes present in the reference.
    pub average_accuracy: f64,
    /// Chance-corrected agreement; zero (flagged) when chance agreement
    /// is exactly 1.
    pub kappa: f64,
    /// Recall per class; NaN for classes absent from the reference.
    pub per_class_accuracy: Vec<f64>,
    /// 1-based ids of classes absent from the reference, excluded from the
    /// average.
    pub excluded_classes: Vec<usize>,
    /// Set when the chance-agreement denominator vanished.
    pub kappa_degenerate: bool,
}

/// Computes the confusion matrix, overall and average accuracy, and the
/// chance-corrected agreement coefficient.
pub fn evaluate(predictions: &[usize], reference: &[usize], classes: usize) -> Result<EvalReport> {
    if predictions.len() != reference.len() {
        return Err(Error::Validation(alloc::format!(
            "{} predictions for {} reference labels",
            predictions.len(),
            reference.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Validation("nothing to evaluate".into()));
    }
    if classes == 0 {
        return Err(Error::Validation("class count must be positive".into()));
    }
    let mut confusion: DMatrix<u64> = DMatrix::zeros(classes, classes);
    for (&p, &r) in predictions.iter().zip(reference) {
        if p == 0 || p > classes || r == 0 || r > classes {
            return Err(Error::Validation(alloc::format!(
                "label pair ({p}, {r}) outside 1..={classes}"
            )));
        }
        confusion[(r - 1, p - 1)] += 1;
    }

    let total = predictions.len() as f64;
    let mut diagonal = 0u64;
    let mut per_class = vec![f64::NAN; classes];
    let mut excluded = Vec::new();
    let mut recall_sum = 0.0;
    let mut present = 0usize;
    let mut chance = 0.0;
    for c in 0..classes {
        diagonal += confusion[(c, c)];
        let row: u64 = (0..classes).map(|j| confusion[(c, j)]).sum();
        let col: u64 = (0..classes).map(|i| confusion[(i, c)]).sum();
        chance += row as f64 * col as f64;
        if row == 0 {
            excluded.push(c + 1);
        } else {
            per_class[c] = confusion[(c, c)] as f64 / row as f64;
            recall_sum += per_class[c];
            present += 1;
        }
    }
    let overall = diagonal as f64 / total;
    let average = recall_sum / present as f64;
    chance /= total * total;
    let (kappa, degenerate) = if chance == 1.0 {
        (0.0, true)
    } else {
        ((overall - chance) / (1.0 - chance), false)
    };
    Ok(EvalReport {
        confusion,
        overall_accuracy: overall,
        average_accuracy: average,
        kappa,
        per_class_accuracy: per_class,
        excluded_classes: excluded,
        kappa_degenerate: degenerate,
    })
}

/// Classifies single-modality test data against multimodal training data.
///
/// Training features follow the config; the test side always embeds through
/// the full (shared plus specific) projection of modality `k`. Under
/// concatenation with several training modalities the training embeddings
/// are averaged instead, so both sides live in the same space.
pub fn cml_predict(
    model: &ProjectionModel,
    train_stack: &TrainingStack,
    test_block: &ModalityBlock,
    k: usize,
    config: &EmbeddingConfig,
) -> Result<Vec<usize>> {
    let fusion = if config.fusion == Fusion::Concatenate && config.modalities.len() > 1 {
        Fusion::Mean
    } else {
        config.fusion
    };
    let parts: Vec<DMatrix<f64>> = config
        .modalities
        .iter()
        .map(|&m| embed_modality(model, train_stack.modality_data(m), m, config.mode))
        .collect::<Result<_>>()?;
    let train_features = fuse(&parts, fusion)?;
    let test_features = embed_modality(model, test_block.data(), k, EmbedMode::Both)?;
    nn_classify(&train_features, train_stack.labels(), &test_features)
}
