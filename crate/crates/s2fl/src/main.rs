//! Command-line pipeline: synth, fit, transform, classify, evaluate, cv.
//!
//! Every command is deterministic given its arguments and seed; artifacts
//! contain no timestamps, so repeated runs are byte-identical. Failures
//! print a single `S2FL-ERR:<code>:<message>` line and exit nonzero.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use s2fl::bundle::DatasetBundle;
use s2fl::classmap::write_class_map;
use s2fl::csv;
use s2fl::cv::{cross_validate, GridSpec};
use s2fl::error::{Error, Result};
use s2fl::model_store::StoredModel;
use s2fl::report::{confusion_csv, cv_row, render_metrics};
use s2fl::standardize::{apply_stats, standardize, StandardizeMode};
use s2fl::synthetic::{make_synthetic, SyntheticSpec};

use s2fl_core::classify::{
    cml_predict, evaluate, extract_features, nn_classify, EmbedMode, EmbeddingConfig, Fusion,
};
use s2fl_core::{HyperParams, ModalityBlock};

#[derive(Parser)]
#[command(
    name = "s2fl",
    about = "Shared/specific multimodal subspace learning pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic multimodal bundle
    Synth(SynthArgs),
    /// Learn projections from a bundle's training samples
    Fit(FitArgs),
    /// Export embedded features for external tooling
    Transform(TransformArgs),
    /// Embed, fuse, and nearest-neighbor classify the test samples
    Classify(ClassifyArgs),
    /// Score a predictions file against a reference file
    Evaluate(EvaluateArgs),
    /// Stratified cross-validation over a hyperparameter grid
    Cv(CvArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![12usize, 6])]
    modality_dims: Vec<usize>,
    #[arg(long, default_value_t = 60)]
    train_per_class: usize,
    #[arg(long, default_value_t = 40)]
    test_per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 0.5)]
    shared_fraction: f64,
    #[arg(long, default_value_t = 4)]
    latent_dim: usize,
}

#[derive(Args, Clone)]
struct HyperArgs {
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    q: usize,
    #[arg(long, default_value_t = 10)]
    ds: usize,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value_t = 200)]
    max_admm: usize,
    /// Relative objective change that stops the outer loop
    #[arg(long, default_value_t = 1e-4)]
    zeta: f64,
    /// Residual tolerance that stops each inner solve
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl HyperArgs {
    fn to_params(&self) -> HyperParams {
        HyperParams {
            alpha: self.alpha,
            beta: self.beta,
            sigma: self.sigma,
            q: self.q,
            subspace_dim: self.ds,
            max_outer: self.max_outer,
            max_admm: self.max_admm,
            outer_tol: self.zeta,
            admm_tol: self.eps,
            seed: self.seed,
            ..HyperParams::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value = "zscore")]
    standardize: String,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value = "concat")]
    fusion: String,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value = "concat")]
    fusion: String,
    /// Classify using only this modality at test time (trained on all)
    #[arg(long)]
    cml_modality: Option<usize>,
    /// Also write a full-grid classification map (PGM + legend)
    #[arg(long)]
    map: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Optional bundle supplying class names and the class count
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value = "zscore")]
    standardize: String,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Comma-separated candidates; defaults to the standard grid
    #[arg(long, value_delimiter = ',')]
    grid_alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    grid_q: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    grid_ds: Vec<usize>,
}

// 0 = quiet, 1 = info, 2 = debug; unknown values fall back to info
static LOG_LEVEL: OnceLock<u8> = OnceLock::new();

fn log_level() -> u8 {
    *LOG_LEVEL.get_or_init(|| match std::env::var("S2FL_LOG").as_deref() {
        Ok("quiet") => 0,
        Ok("debug") => 2,
        _ => 1,
    })
}

fn info(msg: &str) {
    if log_level() >= 1 {
        eprintln!("info: {msg}");
    }
}

fn debug(msg: &str) {
    if log_level() >= 2 {
        eprintln!("debug: {msg}");
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        let message = e.to_string().replace('\n', "; ");
        eprintln!("S2FL-ERR:{}:{}", e.code(), message);
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Transform(args) => cmd_transform(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Cv(args) => cmd_cv(args),
    }
}

fn parse_mode(s: &str) -> Result<EmbedMode> {
    match s {
        "shared" => Ok(EmbedMode::Shared),
        "specific" => Ok(EmbedMode::Specific),
        "both" => Ok(EmbedMode::Both),
        other => Err(Error::Invalid(format!(
            "unknown mode `{other}` (expected shared, specific, or both)"
        ))),
    }
}

fn parse_fusion(s: &str) -> Result<Fusion> {
    match s {
        "concat" => Ok(Fusion::Concatenate),
        "sum" => Ok(Fusion::Sum),
        "mean" => Ok(Fusion::Mean),
        other => Err(Error::Invalid(format!(
            "unknown fusion `{other}` (expected concat, sum, or mean)"
        ))),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        classes: args.classes,
        modality_dims: args.modality_dims,
        train_per_class: args.train_per_class,
        test_per_class: args.test_per_class,
        separation: args.separation,
        noise: args.noise,
        shared_fraction: args.shared_fraction,
        latent_dim: args.latent_dim,
        seed: args.seed,
    };
    let bundle = make_synthetic(&spec)?;
    bundle.save(&args.out)?;
    info(&format!(
        "wrote bundle: {} modalities, {} classes, {} pixels -> {}",
        bundle.modalities().len(),
        bundle.class_count(),
        bundle.pixel_count(),
        args.out.display()
    ));
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let mode = StandardizeMode::parse(&args.standardize)?;
    let raw = DatasetBundle::load(&args.bundle)?;
    let (bundle, stats) = standardize(&raw, mode)?;
    let stack = bundle.training_stack()?;
    info(&format!(
        "fitting: {} modalities, {} training samples, {} classes",
        stack.modality_count(),
        stack.sample_count(),
        stack.class_count()
    ));

    let hp = args.hyper.to_params();
    let (model, trace) = s2fl_core::fit_with_progress(&stack, &hp, |p| {
        debug(&format!(
            "outer {} objective {:.6e} delta {}",
            p.iteration,
            p.objective,
            p.relative_delta
                .map(|d| format!("{d:.3e}"))
                .unwrap_or_else(|| "-".into())
        ));
    })?;

    StoredModel::new(model, mode, stats)?.save(&args.model)?;

    let mut rows = Vec::with_capacity(trace.outer_objectives.len());
    for (t, objective) in trace.outer_objectives.iter().enumerate() {
        let rel_delta = if t == 0 {
            f64::NAN
        } else {
            trace.relative_deltas[t - 1]
        };
        let (res_h, res_g) = trace.admm_residuals[t].iter().fold(
            (0.0f64, 0.0f64),
            |(h, g), &(rh, rg)| (h.max(rh), g.max(rg)),
        );
        rows.push(vec![(t + 1) as f64, *objective, rel_delta, res_h, res_g]);
    }
    csv::write_table(
        &args.model.join("convergence.csv"),
        Some(&["iter", "objective", "rel_delta", "res_H", "res_G"]),
        &rows,
    )?;
    info(&format!(
        "fit finished after {} outer iterations ({:?})",
        trace.outer_objectives.len(),
        trace.terminated_by
    ));
    Ok(())
}

/// Loads a model and a bundle together, applying the model's stored
/// standardization so downstream embeddings see the same preprocessing the
/// fit saw.
fn load_pair(bundle_path: &Path, model_path: &Path) -> Result<(DatasetBundle, StoredModel)> {
    let stored = StoredModel::load(model_path)?;
    let raw = DatasetBundle::load(bundle_path)?;
    let bundle = match &stored.stats {
        Some(stats) => apply_stats(&raw, stats)?,
        None => raw,
    };
    Ok((bundle, stored))
}

fn feature_rows(features: &DMatrix<f64>, indices: &[usize]) -> Vec<Vec<f64>> {
    indices
        .iter()
        .enumerate()
        .map(|(col, &pixel)| {
            let mut row = Vec::with_capacity(features.nrows() + 1);
            row.push(pixel as f64);
            row.extend(features.column(col).iter().copied());
            row
        })
        .collect()
}

fn cmd_transform(args: TransformArgs) -> Result<()> {
    let (bundle, stored) = load_pair(&args.bundle, &args.model)?;
    let config = EmbeddingConfig::new(
        parse_mode(&args.mode)?,
        parse_fusion(&args.fusion)?,
        (1..=bundle.modalities().len()).collect(),
    )?;
    ensure_dir(&args.out)?;

    let mut header = vec!["index".to_string()];
    let mut dim_known = None;
    for (name, subset) in [
        ("features_train.csv", bundle.train_subset()),
        ("features_test.csv", bundle.test_subset()),
    ] {
        let refs: Vec<&DMatrix<f64>> = subset.data.iter().collect();
        let features = extract_features(&stored.model, &refs, &config)?;
        if dim_known.is_none() {
            dim_known = Some(features.nrows());
            header.extend((0..features.nrows()).map(|i| format!("f{i}")));
        }
        let cols: Vec<&str> = header.iter().map(String::as_str).collect();
        csv::write_table(
            &args.out.join(name),
            Some(&cols),
            &feature_rows(&features, &subset.indices),
        )?;
    }
    info(&format!(
        "wrote embedded features ({} dimensions) -> {}",
        dim_known.unwrap_or(0),
        args.out.display()
    ));
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let (bundle, stored) = load_pair(&args.bundle, &args.model)?;
    let model = &stored.model;
    let k_count = bundle.modalities().len();
    let config = EmbeddingConfig::new(
        parse_mode(&args.mode)?,
        parse_fusion(&args.fusion)?,
        (1..=k_count).collect(),
    )?;
    ensure_dir(&args.out)?;

    let stack = bundle.training_stack()?;
    let test = bundle.test_subset();

    let predictions = match args.cml_modality {
        Some(k) => {
            let block = modality_subset(&bundle, k, &test_indices(&bundle))?;
            cml_predict(model, &stack, &block, k, &config)?
        }
        None => {
            let train_refs: Vec<&DMatrix<f64>> =
                stack.blocks().iter().map(|b| b.data()).collect();
            let train_features = extract_features(model, &train_refs, &config)?;
            let test_refs: Vec<&DMatrix<f64>> = test.data.iter().collect();
            let test_features = extract_features(model, &test_refs, &config)?;
            nn_classify(&train_features, stack.labels(), &test_features)?
        }
    };

    let pairs: Vec<(usize, usize)> = test
        .indices
        .iter()
        .zip(&predictions)
        .map(|(&i, &l)| (i, l))
        .collect();
    csv::write_labels(&args.out.join("predictions.csv"), &pairs)?;
    let truth: Vec<(usize, usize)> = test
        .indices
        .iter()
        .zip(&test.labels)
        .map(|(&i, &l)| (i, l))
        .collect();
    csv::write_labels(&args.out.join("reference.csv"), &truth)?;

    if args.map {
        let all: Vec<usize> = (0..bundle.pixel_count()).collect();
        let full = match args.cml_modality {
            Some(k) => {
                let block = modality_subset(&bundle, k, &all)?;
                cml_predict(model, &stack, &block, k, &config)?
            }
            None => {
                let train_refs: Vec<&DMatrix<f64>> =
                    stack.blocks().iter().map(|b| b.data()).collect();
                let train_features = extract_features(model, &train_refs, &config)?;
                let refs: Vec<&DMatrix<f64>> =
                    bundle.modalities().iter().map(|b| b.data()).collect();
                let features = extract_features(model, &refs, &config)?;
                nn_classify(&train_features, stack.labels(), &features)?
            }
        };
        let grid_predictions: Vec<u32> = full.iter().map(|&l| l as u32).collect();
        write_class_map(
            &args.out.join("map.pgm"),
            &grid_predictions,
            bundle.grid(),
            bundle.class_names(),
        )?;
    }
    info(&format!(
        "classified {} test samples -> {}",
        pairs.len(),
        args.out.display()
    ));
    Ok(())
}

fn test_indices(bundle: &DatasetBundle) -> Vec<usize> {
    (0..bundle.pixel_count())
        .filter(|&i| bundle.test_mask()[i] != 0)
        .collect()
}

/// One modality restricted to the given pixels, as a block usable for
/// embedding.
fn modality_subset(bundle: &DatasetBundle, k: usize, pixels: &[usize]) -> Result<ModalityBlock> {
    let block = bundle
        .modalities()
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::Invalid(format!("modality {k} does not exist")))?;
    let src = block.data();
    let data = DMatrix::from_fn(src.nrows(), pixels.len(), |r, c| src[(r, pixels[c])]);
    ModalityBlock::new(block.id(), block.name().to_string(), data).map_err(Error::from)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let predictions = csv::read_labels(&args.pred)?;
    let reference = csv::read_labels(&args.reference)?;
    if predictions.len() != reference.len() {
        return Err(Error::Invalid(format!(
            "prediction file has {} rows, reference has {}",
            predictions.len(),
            reference.len()
        )));
    }
    for (row, ((pi, _), (ri, _))) in predictions.iter().zip(&reference).enumerate() {
        if pi != ri {
            return Err(Error::Invalid(format!(
                "prediction and reference indices disagree at data row {}: {pi} vs {ri}",
                row + 1
            )));
        }
    }

    let pred_labels: Vec<usize> = predictions.iter().map(|&(_, l)| l).collect();
    let ref_labels: Vec<usize> = reference.iter().map(|&(_, l)| l).collect();

    let (classes, names) = match &args.bundle {
        Some(dir) => {
            let bundle = DatasetBundle::load(dir)?;
            (bundle.class_count(), bundle.class_names().to_vec())
        }
        None => {
            let max = pred_labels
                .iter()
                .chain(&ref_labels)
                .copied()
                .max()
                .unwrap_or(0);
            (max, (1..=max).map(|c| format!("class_{c}")).collect())
        }
    };

    let report = evaluate(&pred_labels, &ref_labels, classes)?;
    ensure_dir(&args.out)?;
    let metrics = render_metrics(&report, &names);
    write_text(&args.out.join("metrics.txt"), &metrics)?;
    write_text(&args.out.join("confusion.csv"), &confusion_csv(&report, &names))?;
    info(&format!(
        "OA={:.6} AA={:.6} kappa={:.6}",
        report.overall_accuracy, report.average_accuracy, report.kappa
    ));
    Ok(())
}

fn cmd_cv(args: CvArgs) -> Result<()> {
    let mode = StandardizeMode::parse(&args.standardize)?;
    let raw = DatasetBundle::load(&args.bundle)?;
    let (bundle, _) = standardize(&raw, mode)?;
    let stack = bundle.training_stack()?;

    let defaults = GridSpec::default();
    let pick = |given: Vec<f64>, def: Vec<f64>| if given.is_empty() { def } else { given };
    let pick_usize = |given: Vec<usize>, def: Vec<usize>| if given.is_empty() { def } else { given };
    let grid = GridSpec {
        alpha: pick(args.grid_alpha, defaults.alpha),
        beta: pick(args.grid_beta, defaults.beta),
        sigma: pick(args.grid_sigma, defaults.sigma),
        q: pick_usize(args.grid_q, defaults.q),
        ds: pick_usize(args.grid_ds, defaults.ds),
    };
    info(&format!(
        "cross-validating {} grid points over {} folds",
        grid.len(),
        args.folds
    ));

    let base = args.hyper.to_params();
    let result = cross_validate(&stack, &grid, args.folds, &base)?;

    ensure_dir(&args.out)?;
    let mut report = String::from("alpha,beta,sigma,q,ds");
    for f in 1..=args.folds {
        let _ = write!(report, ",fold_{f}");
    }
    report.push_str(",mean_oa\n");
    for row in &result.rows {
        report.push_str(&cv_row(
            row.point.alpha,
            row.point.beta,
            row.point.sigma,
            row.point.q,
            row.point.ds,
            &row.fold_oa,
            row.mean_oa,
        ));
        report.push('\n');
    }
    write_text(&args.out.join("cv_report.csv"), &report)?;

    let best = result.best;
    let selected = format!(
        "alpha={}\nbeta={}\nsigma={}\nq={}\nds={}\nmean_oa={:.6}\n",
        csv::format_cell(best.alpha),
        csv::format_cell(best.beta),
        csv::format_cell(best.sigma),
        best.q,
        best.ds,
        result.best_mean
    );
    write_text(&args.out.join("selected.txt"), &selected)?;
    info(&format!(
        "selected alpha={} beta={} sigma={} q={} ds={} (mean OA {:.6})",
        best.alpha, best.beta, best.sigma, best.q, best.ds, result.best_mean
    ));
    Ok(())
}
