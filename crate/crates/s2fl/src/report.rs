//! Text rendering of evaluation results: a key=value metrics block and a
//! confusion-matrix CSV. All numbers use six decimal places so reports are
//! byte-stable and easy to diff.

use s2fl_core::EvalReport;

use crate::csv::format_cell;

pub fn render_metrics(report: &EvalReport, class_names: &[String]) -> String {
    let total: u64 = report.confusion.iter().sum();
    let mut out = String::new();
    out.push_str(&format!("samples={total}\n"));
    out.push_str(&format!("classes={}\n", report.confusion.nrows()));
    out.push_str(&format!("OA={:.6}\n", report.overall_accuracy));
    out.push_str(&format!("AA={:.6}\n", report.average_accuracy));
    out.push_str(&format!("kappa={:.6}\n", report.kappa));
    for (i, acc) in report.per_class_accuracy.iter().enumerate() {
        let name = class_names
            .get(i)
            .map(String::as_str)
            .unwrap_or("unnamed");
        if acc.is_nan() {
            out.push_str(&format!("class_{}_accuracy=absent # {name}\n", i + 1));
        } else {
            out.push_str(&format!("class_{}_accuracy={acc:.6} # {name}\n", i + 1));
        }
    }
    if !report.excluded_classes.is_empty() {
        let ids: Vec<String> = report.excluded_classes.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("aa_excluded={}\n", ids.join(",")));
    }
    if report.kappa_degenerate {
        out.push_str("kappa_degenerate=true\n");
    }
    out
}

/// Confusion matrix as CSV: reference classes as rows, predictions as
/// columns.
pub fn confusion_csv(report: &EvalReport, class_names: &[String]) -> String {
    let c = report.confusion.nrows();
    let name = |i: usize| {
        class_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("class_{}", i + 1))
    };
    let mut out = String::from("reference");
    for j in 0..c {
        out.push(',');
        out.push_str(&name(j));
    }
    out.push('\n');
    for i in 0..c {
        out.push_str(&name(i));
        for j in 0..c {
            out.push_str(&format!(",{}", report.confusion[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// One row of the per-grid-point cross-validation report.
pub fn cv_row(
    alpha: f64,
    beta: f64,
    sigma: f64,
    q: usize,
    ds: usize,
    fold_oa: &[Option<f64>],
    mean: Option<f64>,
) -> String {
    let mut cells = vec![
        format_cell(alpha),
        format_cell(beta),
        format_cell(sigma),
        q.to_string(),
        ds.to_string(),
    ];
    for f in fold_oa {
        cells.push(match f {
            Some(v) => format!("{v:.6}"),
            None => "nan".to_string(),
        });
    }
    cells.push(match mean {
        Some(v) => format!("{v:.6}"),
        None => "nan".to_string(),
    });
    cells.join(",")
}
